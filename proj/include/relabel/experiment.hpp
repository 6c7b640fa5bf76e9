#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relabel/core.hpp"
#include "relabel/dataset_io.hpp"
#include "relabel/engine.hpp"
#include "relabel/metrics.hpp"
#include "relabel/noise.hpp"
#include "relabel/posterior.hpp"
#include "relabel/selector.hpp"

namespace relabel {

// One selector arm of the sweep; the posterior travels with the arm so
// selector/posterior pairings are independently configurable.
struct ArmSpec {
    std::string name;  // filename stem; defaulted from the kinds when empty
    SelectorSpec selector;
    PosteriorSpec posterior;
};

struct ExperimentConfig {
    std::string dataset_path;
    NoiseSpec noise;
    PosteriorSpec posterior;  // default for arms without an override
    std::vector<ArmSpec> arms;
    std::vector<std::uint64_t> seeds;
    std::size_t budget = 0;  // 0: expected oracle budget, computed per seed
    std::size_t update_every = 0;
    std::size_t draw_cap = 100;
    std::size_t budget_runs = 32;  // Monte Carlo runs behind the auto budget
    std::string output_dir;

    void validate() const;
};

// Parses the JSON experiment config; unknown keys are rejected.
ExperimentConfig parse_experiment_config(const std::string& path);

struct RunResult {
    std::string arm;
    std::string selector;
    std::string posterior;
    std::uint64_t seed = 0;
    std::size_t budget = 0;
    std::size_t total_annotations = 0;
    std::size_t overshoot = 0;
    std::size_t rounds = 0;
    std::size_t tie_capped_rounds = 0;
    double initial_fraction = 0.0;
    double final_fraction = 0.0;
    double auc = 0.0;
    std::size_t clear_noisy = 0;
    std::size_t difficult_noisy = 0;
    std::string trace_path;
    std::string curve_path;
    std::string summary_path;
};

struct ExperimentResult {
    std::vector<RunResult> runs;  // arm-major, then seed order
    std::string comparison_path;
    std::string manifest_path;
};

// Runs every (arm x seed) combination, at most `max_threads` at a time,
// and writes per-run trace/curve/summary files plus the cross-run
// comparison table. Any run failure is recorded in the manifest and
// rethrown after the surviving runs finish.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t max_threads);

}  // namespace relabel
