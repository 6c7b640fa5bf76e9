#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relabel/core.hpp"

namespace relabel {

enum class NoiseKind { Temperature, Symmetric, ClassDependent, InstanceDependent };

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& name);

// Parameterization of one of the four initial-label noise models. Only the
// fields of the selected kind are meaningful.
struct NoiseSpec {
    NoiseKind kind = NoiseKind::Temperature;
    double tau = 1.0;                               // Temperature; >= 1
    double rate = 0.0;                              // eta in [0,1)
    std::vector<std::vector<double>> confusion_bias;  // ClassDependent; row-stochastic CxC
    bool idn_mask_true_class = true;                // masked flip model keeps E[flips] == rate
    std::uint64_t seed = 0;
};

// Instance-dependent noise generator: one CxL weight matrix per class,
// entries standard normal.
struct IdnModel {
    std::vector<std::vector<std::vector<double>>> weights;  // [class][row C][col L]
    double rate = 0.0;
};

// Realized outcome of an initial-label assignment.
struct NoiseReport {
    double realized_rate = 0.0;                 // fraction with drawn class != true class
    std::vector<std::vector<long>> confusion;   // [true class][drawn class] counts
};

// Distribution proportional to p^(1/tau); zero entries stay zero.
LabelDistribution temperature_scale(const LabelDistribution& dist, double tau);

// Uniform label-flip matrix: diagonal 1-rate, off-diagonal rate/(C-1).
// Rejects rates at or beyond (C-1)/C (diagonal dominance lost).
std::vector<std::vector<double>> symmetric_transition(std::size_t num_classes, double rate);

// Row y = (1-rate) e_y + rate * bias_y, with the bias diagonal zeroed and
// rows renormalized so `rate` is exactly the expected flip probability.
std::vector<std::vector<double>> class_dependent_transition(
    std::size_t num_classes, double rate,
    const std::vector<std::vector<double>>& confusion_bias);

IdnModel make_idn_model(std::size_t num_classes, std::size_t embedding_dim, double rate,
                        std::uint64_t seed);

// Per-sample transition rows under the instance-dependent model. With
// mask_true_class the true-class entry is exactly 1-rate and the flip mass
// is the softmax of the wrong-class logits; unmasked follows the original
// all-class softmax, which deflates the realized rate below `rate`.
std::vector<std::vector<double>> idn_transition_rows(const std::vector<Sample>& samples,
                                                     const IdnModel& model,
                                                     bool mask_true_class = true);

// Convenience: draw the model and compute rows in one step.
std::vector<std::vector<double>> idn_transitions(const std::vector<Sample>& samples,
                                                 double rate, std::uint64_t seed,
                                                 bool mask_true_class = true);

// Draws one initial one-hot label per sample from its transition row
// (conditioned on the clean class). `transitions` holds either a single
// shared row set (size C) or one row per sample (size N). Streams are
// derived from (seed, sample id).
NoiseReport apply_transition_noise(std::vector<Sample>& samples,
                                   const std::vector<std::vector<double>>& transitions,
                                   std::uint64_t seed, bool per_sample_rows = false);

// Temperature model: initial label drawn from temperature_scale(true_dist, tau).
NoiseReport sample_initial_labels(std::vector<Sample>& samples, double tau, std::uint64_t seed);

// Applies `spec` to the dataset, overwriting counts with one-hot initial labels.
NoiseReport apply_noise(Dataset& dataset, const NoiseSpec& spec);

}  // namespace relabel
