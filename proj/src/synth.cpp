#include "relabel/synth.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "relabel/rng.hpp"

namespace relabel {

namespace {
constexpr std::uint64_t kSynthStream = 0x53594e54;  // "SYNT"
}

void SynthSpec::validate() const {
    if (num_classes < 2) throw std::invalid_argument("SynthSpec: need >= 2 classes");
    if (samples_per_class == 0) throw std::invalid_argument("SynthSpec: samples_per_class must be positive");
    if (embedding_dim == 0) throw std::invalid_argument("SynthSpec: embedding_dim must be positive");
    if (embedding_dim < num_classes) {
        throw std::invalid_argument("SynthSpec: embedding_dim must be >= num_classes (" +
                                    std::to_string(embedding_dim) + " < " +
                                    std::to_string(num_classes) + ")");
    }
    if (cluster_spread <= 0.0) throw std::invalid_argument("SynthSpec: cluster_spread must be positive");
    if (class_center_separation <= 0.0) {
        throw std::invalid_argument("SynthSpec: class_center_separation must be positive");
    }
}

std::vector<std::vector<double>> class_centers(const SynthSpec& spec) {
    spec.validate();
    // Scaled one-hot corners: |a*e_i - a*e_j| = a*sqrt(2), so a = sep/sqrt(2)
    // gives every pair of centers the requested separation.
    const double a = spec.class_center_separation / std::sqrt(2.0);
    std::vector<std::vector<double>> centers(spec.num_classes,
                                             std::vector<double>(spec.embedding_dim, 0.0));
    for (std::size_t c = 0; c < spec.num_classes; ++c) centers[c][c] = a;
    return centers;
}

std::vector<double> bayes_posterior(const std::vector<double>& point,
                                    const std::vector<std::vector<double>>& centers,
                                    double sigma) {
    const std::size_t num_classes = centers.size();
    std::vector<double> log_p(num_classes, 0.0);
    double best = -HUGE_VAL;
    for (std::size_t c = 0; c < num_classes; ++c) {
        double d2 = 0.0;
        for (std::size_t l = 0; l < point.size(); ++l) {
            const double d = point[l] - centers[c][l];
            d2 += d * d;
        }
        log_p[c] = -d2 / (2.0 * sigma * sigma);
        best = std::max(best, log_p[c]);
    }
    double sum = 0.0;
    std::vector<double> post(num_classes, 0.0);
    for (std::size_t c = 0; c < num_classes; ++c) {
        post[c] = std::exp(log_p[c] - best);
        sum += post[c];
    }
    for (double& v : post) v /= sum;
    return post;
}

Dataset generate(const SynthSpec& spec) {
    spec.validate();
    const auto centers = class_centers(spec);
    Dataset ds;
    ds.num_classes = spec.num_classes;
    ds.embedding_dim = spec.embedding_dim;
    ds.samples.reserve(spec.num_classes * spec.samples_per_class);
    const std::uint64_t stream = mix_seed(spec.seed, kSynthStream);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        for (std::size_t j = 0; j < spec.samples_per_class; ++j) {
            Sample s;
            s.id = static_cast<SampleId>(c * spec.samples_per_class + j);
            Rng rng(mix_seed(stream, s.id));
            s.embedding.resize(spec.embedding_dim);
            for (std::size_t l = 0; l < spec.embedding_dim; ++l) {
                s.embedding[l] = centers[c][l] + spec.cluster_spread * rng.gaussian();
            }
            s.true_dist = LabelDistribution(bayes_posterior(s.embedding, centers,
                                                            spec.cluster_spread));
            // Zeroed counts: no labels yet, but the on-disk format always
            // carries num_classes entries per sample.
            s.counts = LabelCounts(std::vector<int>(spec.num_classes, 0));
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

}  // namespace relabel
