// SPDX-License-Identifier: Apache-2.0
#include "sso/placement.hpp"

#include <algorithm>
#include <random>

namespace sso {
namespace {

void validate(const std::vector<WorkItem>& items, int ranks) {
  if (ranks < 1) throw ConfigError("placement: ranks must be >= 1");
  if (items.empty()) throw ConfigError("placement: empty workload");
  for (const auto& it : items)
    if (!(it.cost > 0.0)) throw ConfigError("placement: nonpositive cost for " + it.module_name);
}

// Cost descending, ties broken by name so assignment is deterministic.
void sort_by_cost(std::vector<WorkItem>& items) {
  std::sort(items.begin(), items.end(), [](const WorkItem& a, const WorkItem& b) {
    if (a.cost != b.cost) return a.cost > b.cost;
    return a.module_name < b.module_name;
  });
}

PlacementReport finalize(std::string policy, const std::vector<WorkItem>& items,
                         const std::vector<int>& rank_of, int ranks) {
  PlacementReport rep;
  rep.policy = std::move(policy);
  rep.per_rank_load.assign(static_cast<size_t>(ranks), 0.0);
  for (size_t i = 0; i < items.size(); ++i) {
    rep.assignment[items[i].module_name] = rank_of[i];
    rep.per_rank_load[static_cast<size_t>(rank_of[i])] += items[i].cost;
  }
  const double mx = *std::max_element(rep.per_rank_load.begin(), rep.per_rank_load.end());
  const double mn = *std::min_element(rep.per_rank_load.begin(), rep.per_rank_load.end());
  double mean = 0.0;
  for (double l : rep.per_rank_load) mean += l;
  mean /= static_cast<double>(ranks);
  rep.imbalance = mean > 0.0 ? (mx - mn) / mean : 0.0;
  return rep;
}

}  // namespace

PlacementReport place_pingpong(std::vector<WorkItem> items, int ranks) {
  validate(items, ranks);
  sort_by_cost(items);
  std::vector<int> rank_of(items.size());
  const int cycle = 2 * ranks;
  for (size_t i = 0; i < items.size(); ++i) {
    const int phase = static_cast<int>(i % static_cast<size_t>(cycle));
    rank_of[i] = phase < ranks ? phase : cycle - 1 - phase;
  }
  return finalize("pingpong", items, rank_of, ranks);
}

PlacementReport place_greedy(std::vector<WorkItem> items, int ranks) {
  validate(items, ranks);
  sort_by_cost(items);
  std::vector<double> load(static_cast<size_t>(ranks), 0.0);
  std::vector<int> rank_of(items.size());
  for (size_t i = 0; i < items.size(); ++i) {
    int best = 0;
    for (int r = 1; r < ranks; ++r)
      if (load[static_cast<size_t>(r)] < load[static_cast<size_t>(best)]) best = r;
    rank_of[i] = best;
    load[static_cast<size_t>(best)] += items[i].cost;
  }
  return finalize("greedy", items, rank_of, ranks);
}

PlacementReport place_round_robin(const std::vector<WorkItem>& items, int ranks) {
  validate(items, ranks);
  std::vector<int> rank_of(items.size());
  for (size_t i = 0; i < items.size(); ++i)
    rank_of[i] = static_cast<int>(i % static_cast<size_t>(ranks));
  return finalize("roundrobin", items, rank_of, ranks);
}

std::vector<WorkItem> apply_solver_depth_multiplier(std::vector<WorkItem> items,
                                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mult(1.0, 1.5);
  for (auto& it : items) it.cost *= mult(rng);
  return items;
}

}  // namespace sso
