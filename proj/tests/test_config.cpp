// SPDX-License-Identifier: Apache-2.0
//
// Strict JSON experiment-config parsing and its serialization round trip.

#include <doctest.h>

#include "sso/config.hpp"

using namespace sso;

TEST_CASE("config fields parse into the right places") {
  ExperimentConfig c = parse_experiment_config(R"({
    "task": {"kind": "synthetic_regression", "steps": 42, "seed": 3, "noise": 0.2},
    "arch": {"model": "mlp", "hidden_width": 128, "radius_c": 1.0,
             "scaler": "align_adam_rms"},
    "optimizer": {"kind": "muon_sphere", "eta": 0.05, "msign_schedule": "newton_schulz",
                  "retraction": "dynamic", "solver_tol": 1e-5},
    "widths": [64, 128],
    "etas": [0.01, 0.02],
    "output_dir": "results"
  })");
  CHECK(c.task.steps == 42);
  CHECK(c.task.noise == doctest::Approx(0.2));
  CHECK(c.arch.hidden_width == 128);
  CHECK(c.arch.scaler == ScalerKind::AlignAdamRms);
  CHECK(c.optimizer == OptimizerKind::MuonSphere);
  CHECK(c.cfg.eta == doctest::Approx(0.05));
  CHECK(c.cfg.msign_schedule == MsignSchedule::NewtonSchulz);
  CHECK(c.cfg.retraction == RetractionKind::Dynamic);
  CHECK(c.cfg.solver_tol == doctest::Approx(1e-5));
  CHECK(c.cfg.radius_c == doctest::Approx(1.0));  // mirrored from arch
  CHECK(c.widths == std::vector<int>{64, 128});
  CHECK(c.output_dir == "results");
}

TEST_CASE("defaults survive an empty config") {
  ExperimentConfig c = parse_experiment_config("{}");
  CHECK(c.task.kind == "synthetic_regression");
  CHECK(c.optimizer == OptimizerKind::Sso);
  CHECK(c.cfg.solver_tol == doctest::Approx(2e-4));
  CHECK(c.cfg.solver_max_iters == 20);
  CHECK(c.cfg.msign_iters == 8);
  CHECK(c.cfg.beta == doctest::Approx(0.9));
  CHECK(c.cfg.nesterov);
  CHECK(c.cfg.adam_beta2 == doctest::Approx(0.95));
  CHECK(c.arch.radius_c == doctest::Approx(2.0));
}

TEST_CASE("unknown keys are fatal at every level") {
  CHECK_THROWS_AS(parse_experiment_config(R"({"tsak": {}})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"task": {"stpes": 5}})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"arch": {"widht": 8}})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"optimizer": {"lr": 0.1}})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"optimizer": {"kind": "sgd"}})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"arch": {"scaler": "fan_in"}})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("not json"), ConfigError);
}

TEST_CASE("serialize / parse round trip preserves every field") {
  ExperimentConfig c;
  c.task.kind = "char_lm";
  c.task.corpus_path = "data/tiny_corpus.txt";
  c.task.steps = 7;
  c.arch.model = "transformer";
  c.arch.vocab = 33;
  c.arch.radius_c = 0.5;
  c.optimizer = OptimizerKind::Muon;
  c.cfg.eta = 0.123;
  c.cfg.nesterov = false;
  c.cfg.retraction = RetractionKind::Dynamic;
  c.widths = {8, 16};
  c.etas = {0.5};

  ExperimentConfig back = parse_experiment_config(serialize_experiment_config(c));
  CHECK(back.task.kind == c.task.kind);
  CHECK(back.task.corpus_path == c.task.corpus_path);
  CHECK(back.task.steps == c.task.steps);
  CHECK(back.arch.model == c.arch.model);
  CHECK(back.arch.vocab == c.arch.vocab);
  CHECK(back.arch.radius_c == doctest::Approx(c.arch.radius_c));
  CHECK(back.optimizer == c.optimizer);
  CHECK(back.cfg.eta == doctest::Approx(c.cfg.eta));
  CHECK(back.cfg.nesterov == c.cfg.nesterov);
  CHECK(back.cfg.retraction == c.cfg.retraction);
  CHECK(back.widths == c.widths);
  CHECK(back.etas == c.etas);
  // Round trip is a fixed point of serialization.
  CHECK(serialize_experiment_config(back) == serialize_experiment_config(c));
}
