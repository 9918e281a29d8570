// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the command-line tool: exit codes, output files, and
// the SSO_OUTPUT_DIR override. Runs the real binary via the shell.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  fs::path dir = fs::temp_directory_path() / "sso_cli_tests";
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args, const std::string& log_name = "cli.log") {
  const std::string log = (work_dir() / log_name).string();
  const std::string cmd = std::string(SSO_CLI_BIN) + " " + args + " > " + log + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return rc < 0 ? rc : ((rc >> 8) & 0xff);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string train_config(const std::string& out_dir, double eta, const std::string& kind) {
  return R"({
    "task": {"kind": "synthetic_regression", "steps": 12, "batch_size": 8, "seed": 4},
    "arch": {"model": "mlp", "input_dim": 8, "hidden_width": 16, "output_dim": 8,
             "radius_c": 1.0},
    "optimizer": {"kind": ")" +
         kind + R"(", "eta": )" + std::to_string(eta) + R"(},
    "output_dir": ")" + out_dir + R"("
  })";
}

}  // namespace

TEST_CASE("moe-factor subcommand prints the estimate") {
  CHECK(run("moe-factor --n-total 64 --k 4 --n-shared 1 --trials 2000", "moe.log") == 0);
  CHECK(slurp(work_dir() / "moe.log").find("moe scaling factor M = ") != std::string::npos);
  CHECK(run("moe-factor --k 99", "moe_bad.log") == 1);
}

TEST_CASE("place subcommand reproduces the worked example") {
  fs::path wl = work_dir() / "workload.json";
  std::string items = "[";
  const int costs[8] = {9, 8, 7, 6, 5, 4, 3, 2};
  for (int i = 0; i < 8; ++i)
    items += std::string(i ? "," : "") + "{\"module_name\":\"m" + std::to_string(i) +
             "\",\"cost\":" + std::to_string(costs[i]) + "}";
  items += "]";
  write_file(wl, items);

  CHECK(run("place --workload " + wl.string() + " --ranks 4 --policy all", "place.log") == 0);
  const std::string out = slurp(work_dir() / "place.log");
  CHECK(out.find("\"pingpong\"") != std::string::npos);
  CHECK(out.find("\"greedy\"") != std::string::npos);
  CHECK(out.find("\"roundrobin\"") != std::string::npos);
  CHECK(out.find("\"imbalance\": 0.0") != std::string::npos);

  CHECK(run("place --workload " + wl.string() + " --ranks 4 --policy bogus", "place_bad.log") ==
        1);
  CHECK(run("place --workload " + (work_dir() / "nope.json").string() + " --ranks 2",
            "place_missing.log") == 1);
}

TEST_CASE("train subcommand: success, config error, and divergence exit codes") {
  fs::path out1 = work_dir() / "run1";
  fs::path cfg1 = work_dir() / "train_ok.json";
  write_file(cfg1, train_config(out1.string(), 0.02, "sso"));
  CHECK(run("train --config " + cfg1.string(), "train_ok.log") == 0);
  CHECK(fs::exists(out1 / "metrics.jsonl"));
  CHECK(fs::exists(out1 / "summary.csv"));

  fs::path bad = work_dir() / "train_bad.json";
  write_file(bad, R"({"optimizer": {"learning_rate": 0.1}})");
  CHECK(run("train --config " + bad.string(), "train_bad.log") == 1);
  write_file(bad, "{ definitely not json");
  CHECK(run("train --config " + bad.string(), "train_bad2.log") == 1);
  CHECK(run("train --config " + (work_dir() / "missing.json").string(), "train_miss.log") == 1);

  fs::path out2 = work_dir() / "run_div";
  fs::path cfg2 = work_dir() / "train_div.json";
  write_file(cfg2, train_config(out2.string(), 80.0, "muon"));
  CHECK(run("train --config " + cfg2.string(), "train_div.log") == 2);
}

TEST_CASE("identical train invocations produce byte-identical metrics") {
  fs::path outa = work_dir() / "det_a";
  fs::path outb = work_dir() / "det_b";
  fs::path cfg = work_dir() / "train_det.json";

  write_file(cfg, train_config(outa.string(), 0.02, "sso"));
  CHECK(run("train --config " + cfg.string(), "det_a.log") == 0);
  // Same config, output redirected through the environment override.
  const std::string env_cmd = "SSO_OUTPUT_DIR=" + outb.string() + " " + SSO_CLI_BIN +
                              " train --config " + cfg.string() + " > /dev/null 2>&1";
  CHECK(((std::system(env_cmd.c_str()) >> 8) & 0xff) == 0);

  CHECK(slurp(outa / "metrics.jsonl") == slurp(outb / "metrics.jsonl"));
  CHECK(slurp(outa / "summary.csv") == slurp(outb / "summary.csv"));
}

TEST_CASE("sweep subcommand writes the grid csv") {
  fs::path out = work_dir() / "sweep_out";
  fs::path cfg = work_dir() / "sweep.json";
  write_file(cfg, R"({
    "task": {"kind": "synthetic_regression", "steps": 8, "batch_size": 8, "seed": 2},
    "arch": {"model": "mlp", "input_dim": 8, "output_dim": 8, "radius_c": 1.0},
    "optimizer": {"kind": "sso"},
    "widths": [8, 16],
    "etas": [0.01, 0.05],
    "output_dir": ")" + out.string() + R"("
  })");
  CHECK(run("sweep --config " + cfg.string(), "sweep.log") == 0);
  CHECK(fs::exists(out / "sweep.csv"));
  CHECK(slurp(work_dir() / "sweep.log").find("argmin_eta") != std::string::npos);

  fs::path empty = work_dir() / "sweep_empty.json";
  write_file(empty, R"({"widths": [], "etas": []})");
  CHECK(run("sweep --config " + empty.string(), "sweep_empty.log") == 1);
}

TEST_CASE("usage errors exit with the config code") {
  CHECK(run("definitely-not-a-subcommand", "usage.log") == 1);
  CHECK(run("train", "usage2.log") == 1);  // missing --config
}
