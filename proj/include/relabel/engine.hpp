#pragma once

#include <cstdint>
#include <vector>

#include "relabel/core.hpp"
#include "relabel/posterior.hpp"
#include "relabel/rng.hpp"
#include "relabel/selector.hpp"

namespace relabel {

struct SimulationConfig {
    std::size_t budget = 0;        // B: total annotations allowed (>= 1)
    std::size_t update_every = 0;  // b: model refresh period in annotations; 0 = never
    SelectorSpec selector;
    PosteriorSpec posterior;
    std::size_t draw_cap = 100;  // per-round cap against tied true distributions
    std::size_t max_rounds = 0;  // optional cap on cleaned samples; 0 = unlimited
    std::uint64_t seed = 0;

    void validate() const;
};

struct AnnotationEvent {
    std::size_t annotation_index = 0;  // 1-based running count
    SampleId sample_id = 0;
    std::size_t drawn_class = 0;
    LabelCounts counts_after;
    bool majority_formed = false;
    std::size_t num_correct_after = 0;
    bool model_updated = false;
};

struct SimulationTrace {
    std::vector<AnnotationEvent> events;
    std::size_t total_annotations = 0;
    std::size_t overshoot = 0;  // annotations past the budget in the final round
    std::size_t rounds = 0;     // samples cleaned
    std::size_t tie_capped_rounds = 0;
    bool exhausted_available = false;
    std::size_t num_samples = 0;
    std::size_t initial_correct = 0;
    std::size_t final_correct = 0;
};

// Draws labels from the sample's true distribution until a strict majority
// forms (at least one draw; at most `cap` draws per round). Returns the drawn
// classes in order and mutates the sample's counts.
std::vector<std::size_t> acquire_until_majority(Sample& sample, Rng& rng, std::size_t cap = 100);

// Algorithm: train the posterior model on the initial labels, then loop
// rank -> annotate-to-majority -> mark cleaned -> scheduled model refresh,
// while the spent annotations are below the budget at the round boundary.
SimulationTrace run_simulation(DatasetState& state, const SimulationConfig& cfg);

// Monte Carlo mean over `runs` full oracle cleanings of the annotations needed
// to visit every mislabelled sample.
double oracle_expected_budget(const DatasetState& state, std::size_t runs, std::uint64_t seed);

void write_trace_csv(const std::string& path, const SimulationTrace& trace);

}  // namespace relabel
