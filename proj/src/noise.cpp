#include "relabel/noise.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "relabel/rng.hpp"

namespace relabel {

namespace {

constexpr std::uint64_t kIdnWeightStream = 0x49444e57;   // weight draws
constexpr std::uint64_t kInitialLabelStream = 0x4c41424c;  // per-sample label draws

void check_row_stochastic(const std::vector<std::vector<double>>& m, std::size_t num_classes,
                          const char* what) {
    if (m.size() != num_classes) throw std::invalid_argument(std::string(what) + ": wrong row count");
    for (const auto& row : m) {
        if (row.size() != num_classes) {
            throw std::invalid_argument(std::string(what) + ": wrong column count");
        }
        double sum = 0.0;
        for (double v : row) {
            if (v < 0.0) throw std::invalid_argument(std::string(what) + ": negative entry");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw std::invalid_argument(std::string(what) + ": row sums to " + std::to_string(sum));
        }
    }
}

NoiseReport draw_labels(std::vector<Sample>& samples,
                        const std::function<std::vector<double>(std::size_t)>& row_for_sample,
                        std::size_t num_classes, std::uint64_t seed) {
    NoiseReport report;
    report.confusion.assign(num_classes, std::vector<long>(num_classes, 0));
    std::size_t flips = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        Sample& s = samples[i];
        const std::vector<double> row = row_for_sample(i);
        Rng rng(mix_seed(mix_seed(seed, kInitialLabelStream), s.id));
        const std::size_t drawn = rng.categorical(row);
        std::vector<int> counts(num_classes, 0);
        counts[drawn] = 1;
        s.counts = LabelCounts(std::move(counts));
        const std::size_t truth = true_class(s);
        report.confusion[truth][drawn] += 1;
        if (drawn != truth) ++flips;
    }
    report.realized_rate = samples.empty() ? 0.0 : static_cast<double>(flips) / samples.size();
    return report;
}

}  // namespace

std::string to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::Temperature: return "temperature";
        case NoiseKind::Symmetric: return "symmetric";
        case NoiseKind::ClassDependent: return "class_dependent";
        case NoiseKind::InstanceDependent: return "idn";
    }
    return "unknown";
}

NoiseKind noise_kind_from_string(const std::string& name) {
    if (name == "temperature") return NoiseKind::Temperature;
    if (name == "symmetric") return NoiseKind::Symmetric;
    if (name == "class_dependent") return NoiseKind::ClassDependent;
    if (name == "idn" || name == "instance_dependent") return NoiseKind::InstanceDependent;
    throw std::invalid_argument("unknown noise kind: " + name);
}

LabelDistribution temperature_scale(const LabelDistribution& dist, double tau) {
    if (tau < 1.0) throw std::invalid_argument("temperature_scale: tau must be >= 1");
    if (tau == 1.0) return dist;
    std::vector<double> scaled(dist.num_classes(), 0.0);
    double sum = 0.0;
    for (std::size_t c = 0; c < dist.num_classes(); ++c) {
        if (dist.probs[c] > 0.0) {
            scaled[c] = std::pow(dist.probs[c], 1.0 / tau);
            sum += scaled[c];
        }
    }
    for (double& v : scaled) v /= sum;
    return LabelDistribution(std::move(scaled));
}

std::vector<std::vector<double>> symmetric_transition(std::size_t num_classes, double rate) {
    if (num_classes < 2) throw std::invalid_argument("symmetric_transition: need >= 2 classes");
    const double bound = static_cast<double>(num_classes - 1) / num_classes;
    if (rate < 0.0 || rate >= bound) {
        throw std::invalid_argument("symmetric_transition: rate " + std::to_string(rate) +
                                    " breaks diagonal dominance (must be < " +
                                    std::to_string(bound) + ")");
    }
    std::vector<std::vector<double>> m(num_classes, std::vector<double>(num_classes, 0.0));
    const double off = rate / static_cast<double>(num_classes - 1);
    for (std::size_t y = 0; y < num_classes; ++y) {
        for (std::size_t c = 0; c < num_classes; ++c) m[y][c] = (y == c) ? 1.0 - rate : off;
    }
    return m;
}

std::vector<std::vector<double>> class_dependent_transition(
    std::size_t num_classes, double rate, const std::vector<std::vector<double>>& confusion_bias) {
    if (rate < 0.0 || rate >= 1.0) {
        throw std::invalid_argument("class_dependent_transition: rate must be in [0,1)");
    }
    check_row_stochastic(confusion_bias, num_classes, "confusion_bias");
    std::vector<std::vector<double>> m(num_classes, std::vector<double>(num_classes, 0.0));
    for (std::size_t y = 0; y < num_classes; ++y) {
        double off_mass = 0.0;
        for (std::size_t c = 0; c < num_classes; ++c) {
            if (c != y) off_mass += confusion_bias[y][c];
        }
        if (off_mass <= 0.0) {
            throw std::invalid_argument("class_dependent_transition: bias row " +
                                        std::to_string(y) + " has no off-diagonal mass");
        }
        for (std::size_t c = 0; c < num_classes; ++c) {
            const double bias = (c == y) ? 0.0 : confusion_bias[y][c] / off_mass;
            m[y][c] = rate * bias + (c == y ? 1.0 - rate : 0.0);
        }
    }
    return m;
}

IdnModel make_idn_model(std::size_t num_classes, std::size_t embedding_dim, double rate,
                        std::uint64_t seed) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("make_idn_model: rate must be in [0,1)");
    IdnModel model;
    model.rate = rate;
    model.weights.assign(num_classes,
                         std::vector<std::vector<double>>(num_classes,
                                                          std::vector<double>(embedding_dim, 0.0)));
    Rng rng(mix_seed(seed, kIdnWeightStream));
    for (auto& w : model.weights) {
        for (auto& row : w) {
            for (double& v : row) v = rng.gaussian();
        }
    }
    return model;
}

std::vector<std::vector<double>> idn_transition_rows(const std::vector<Sample>& samples,
                                                     const IdnModel& model,
                                                     bool mask_true_class) {
    const std::size_t num_classes = model.weights.size();
    std::vector<std::vector<double>> rows;
    rows.reserve(samples.size());
    for (const Sample& s : samples) {
        const std::size_t y = true_class(s);
        const auto& w = model.weights[y];
        std::vector<double> logits(num_classes, 0.0);
        for (std::size_t c = 0; c < num_classes; ++c) {
            double z = 0.0;
            for (std::size_t l = 0; l < s.embedding.size(); ++l) z += w[c][l] * s.embedding[l];
            logits[c] = z;
        }
        std::vector<double> row(num_classes, 0.0);
        if (mask_true_class) {
            // softmax over the wrong classes only; true-class entry exactly 1-rate
            double zmax = -HUGE_VAL;
            for (std::size_t c = 0; c < num_classes; ++c) {
                if (c != y) zmax = std::max(zmax, logits[c]);
            }
            double sum = 0.0;
            for (std::size_t c = 0; c < num_classes; ++c) {
                if (c != y) {
                    row[c] = std::exp(logits[c] - zmax);
                    sum += row[c];
                }
            }
            for (std::size_t c = 0; c < num_classes; ++c) {
                row[c] = (c == y) ? 1.0 - model.rate : model.rate * row[c] / sum;
            }
        } else {
            double zmax = *std::max_element(logits.begin(), logits.end());
            double sum = 0.0;
            for (std::size_t c = 0; c < num_classes; ++c) {
                row[c] = std::exp(logits[c] - zmax);
                sum += row[c];
            }
            for (std::size_t c = 0; c < num_classes; ++c) {
                const double flip = model.rate * row[c] / sum;
                row[c] = (c == y) ? 1.0 - model.rate + flip : flip;
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<std::vector<double>> idn_transitions(const std::vector<Sample>& samples, double rate,
                                                 std::uint64_t seed, bool mask_true_class) {
    if (samples.empty()) return {};
    const std::size_t num_classes = samples.front().true_dist.num_classes();
    const std::size_t embedding_dim = samples.front().embedding.size();
    const IdnModel model = make_idn_model(num_classes, embedding_dim, rate, seed);
    return idn_transition_rows(samples, model, mask_true_class);
}

NoiseReport apply_transition_noise(std::vector<Sample>& samples,
                                   const std::vector<std::vector<double>>& transitions,
                                   std::uint64_t seed, bool per_sample_rows) {
    if (samples.empty()) return {};
    const std::size_t num_classes = samples.front().true_dist.num_classes();
    const bool per_sample =
        per_sample_rows || (transitions.size() == samples.size() && samples.size() != num_classes);
    if (per_sample && transitions.size() != samples.size()) {
        throw std::invalid_argument("apply_transition_noise: need one row per sample");
    }
    if (!per_sample && transitions.size() != num_classes) {
        throw std::invalid_argument("apply_transition_noise: need C shared rows or N per-sample rows");
    }
    return draw_labels(
        samples,
        [&](std::size_t i) {
            return per_sample ? transitions[i] : transitions[true_class(samples[i])];
        },
        num_classes, seed);
}

NoiseReport sample_initial_labels(std::vector<Sample>& samples, double tau, std::uint64_t seed) {
    if (samples.empty()) return {};
    const std::size_t num_classes = samples.front().true_dist.num_classes();
    return draw_labels(
        samples,
        [&](std::size_t i) { return temperature_scale(samples[i].true_dist, tau).probs; },
        num_classes, seed);
}

NoiseReport apply_noise(Dataset& dataset, const NoiseSpec& spec) {
    switch (spec.kind) {
        case NoiseKind::Temperature:
            return sample_initial_labels(dataset.samples, spec.tau, spec.seed);
        case NoiseKind::Symmetric: {
            const auto m = symmetric_transition(dataset.num_classes, spec.rate);
            return apply_transition_noise(dataset.samples, m, spec.seed);
        }
        case NoiseKind::ClassDependent: {
            const auto m = class_dependent_transition(dataset.num_classes, spec.rate,
                                                      spec.confusion_bias);
            return apply_transition_noise(dataset.samples, m, spec.seed);
        }
        case NoiseKind::InstanceDependent: {
            const auto rows = idn_transitions(dataset.samples, spec.rate, spec.seed,
                                              spec.idn_mask_true_class);
            return apply_transition_noise(dataset.samples, rows, spec.seed,
                                          /*per_sample_rows=*/true);
        }
    }
    throw std::logic_error("apply_noise: unhandled noise kind");
}

}  // namespace relabel
