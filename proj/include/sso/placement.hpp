// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "sso/matrix.hpp"

namespace sso {

struct WorkItem {
  std::string module_name;
  double cost = 0.0;  // proxy: d_out * d_in, optionally x solver-depth multiplier
};

struct PlacementReport {
  std::string policy;
  std::map<std::string, int> assignment;  // module -> rank
  std::vector<double> per_rank_load;
  double imbalance = 0.0;  // (max - min) / mean
};

// Size-descending zigzag: ranks 0,1,...,R-1,R-1,...,1,0 repeating.
PlacementReport place_pingpong(std::vector<WorkItem> items, int ranks);

// Size-descending, each item to the currently least-loaded rank.
PlacementReport place_greedy(std::vector<WorkItem> items, int ranks);

// Declaration order, rank = index mod ranks.
PlacementReport place_round_robin(const std::vector<WorkItem>& items, int ranks);

// Optional stochastic solver-depth multiplier (uniform in [1, 1.5], seeded)
// applied on top of the size proxy.
std::vector<WorkItem> apply_solver_depth_multiplier(std::vector<WorkItem> items,
                                                    std::uint64_t seed);

}  // namespace sso
