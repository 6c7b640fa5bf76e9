#pragma once

#include <cstdint>
#include <vector>

#include "relabel/core.hpp"

namespace relabel {

struct SynthSpec {
    std::size_t num_classes = 4;
    std::size_t samples_per_class = 500;
    std::size_t embedding_dim = 16;
    double cluster_spread = 1.0;
    double class_center_separation = 4.0;
    std::uint64_t seed = 7;

    void validate() const;
};

// One center per class; pairwise distances all equal class_center_separation.
// Requires embedding_dim >= num_classes.
std::vector<std::vector<double>> class_centers(const SynthSpec& spec);

// Exact posterior of the equal-prior isotropic Gaussian mixture at `point`.
std::vector<double> bayes_posterior(const std::vector<double>& point,
                                    const std::vector<std::vector<double>>& centers,
                                    double sigma);

// Samples embeddings around class centers and attaches the exact mixture
// posterior as the true distribution. Counts are left empty.
Dataset generate(const SynthSpec& spec);

}  // namespace relabel
