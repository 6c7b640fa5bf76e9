#include "relabel/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace relabel {

namespace {

void check_distribution(const std::vector<double>& probs) {
    if (probs.size() < 2) throw std::invalid_argument("LabelDistribution: need at least 2 classes");
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("LabelDistribution: entry outside [0,1]");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("LabelDistribution: entries sum to " + std::to_string(sum));
    }
}

}  // namespace

LabelDistribution::LabelDistribution(std::vector<double> p) : probs(std::move(p)) {
    check_distribution(probs);
}

LabelCounts::LabelCounts(std::vector<int> c) : counts(std::move(c)) {
    for (int v : counts) {
        if (v < 0) throw std::invalid_argument("LabelCounts: negative count");
    }
}

long LabelCounts::total() const {
    return std::accumulate(counts.begin(), counts.end(), 0L);
}

void Dataset::validate() const {
    if (num_classes < 2) throw std::invalid_argument("Dataset: num_classes must be >= 2");
    std::vector<SampleId> ids;
    ids.reserve(samples.size());
    for (const Sample& s : samples) {
        if (s.embedding.size() != embedding_dim) {
            throw std::invalid_argument("Dataset: sample " + std::to_string(s.id) +
                                        " embedding dim mismatch");
        }
        if (s.true_dist.num_classes() != num_classes) {
            throw std::invalid_argument("Dataset: sample " + std::to_string(s.id) +
                                        " true_dist class count mismatch");
        }
        if (!s.counts.counts.empty() && s.counts.num_classes() != num_classes) {
            throw std::invalid_argument("Dataset: sample " + std::to_string(s.id) +
                                        " counts class count mismatch");
        }
        ids.push_back(s.id);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw std::invalid_argument("Dataset: duplicate sample id");
    }
}

DatasetState::DatasetState(Dataset d) : data(std::move(d)) {
    data.validate();
    for (const Sample& s : data.samples) {
        if (s.counts.num_classes() != data.num_classes || s.counts.total() < 1) {
            throw std::invalid_argument("DatasetState: sample " + std::to_string(s.id) +
                                        " has no labels");
        }
    }
    cleaned.assign(data.size(), false);
    id_index_.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        id_index_.emplace_back(data.samples[i].id, i);
    }
    std::sort(id_index_.begin(), id_index_.end());
}

void DatasetState::mark_cleaned(std::size_t index) {
    if (index >= cleaned.size()) throw std::out_of_range("mark_cleaned: bad index");
    if (cleaned[index]) throw std::logic_error("mark_cleaned: sample already cleaned");
    cleaned[index] = true;
    ++cleaned_count;
}

std::vector<std::size_t> DatasetState::available_indices() const {
    std::vector<std::size_t> out;
    out.reserve(data.size() - cleaned_count);
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!cleaned[i]) out.push_back(i);
    }
    return out;
}

std::size_t DatasetState::index_of(SampleId id) const {
    auto it = std::lower_bound(id_index_.begin(), id_index_.end(),
                               std::make_pair(id, std::size_t{0}));
    if (it == id_index_.end() || it->first != id) {
        throw std::out_of_range("index_of: unknown sample id " + std::to_string(id));
    }
    return it->second;
}

std::size_t argmax_lowest(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

std::size_t argmax_lowest(std::span<const int> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

double entropy(const LabelDistribution& dist) {
    double h = 0.0;
    for (double p : dist.probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h < 0.0 ? 0.0 : h;
}

double normalized_entropy(const LabelDistribution& dist) {
    return entropy(dist) / std::log(static_cast<double>(dist.num_classes()));
}

bool is_difficult(const LabelDistribution& dist, const DifficultyConfig& cfg) {
    return normalized_entropy(dist) > cfg.threshold;
}

double cross_entropy(const LabelCounts& counts, const LabelDistribution& posterior) {
    if (counts.num_classes() != posterior.num_classes()) {
        throw std::invalid_argument("cross_entropy: class count mismatch");
    }
    const double total = static_cast<double>(counts.total());
    if (total < 1.0) throw std::invalid_argument("cross_entropy: empty label counts");
    double ce = 0.0;
    for (std::size_t c = 0; c < counts.num_classes(); ++c) {
        if (counts.counts[c] == 0) continue;
        const double q = counts.counts[c] / total;
        ce -= q * std::log(std::max(posterior.probs[c], kPosteriorFloor));
    }
    return ce;
}

std::size_t majority_label(const LabelCounts& counts) {
    if (counts.total() < 1) throw std::invalid_argument("majority_label: empty label counts");
    return argmax_lowest(std::span<const int>(counts.counts));
}

bool has_majority(const LabelCounts& counts) {
    int best = -1;
    bool unique = false;
    for (int v : counts.counts) {
        if (v > best) {
            best = v;
            unique = true;
        } else if (v == best) {
            unique = false;
        }
    }
    return best >= 1 && unique;
}

bool is_mislabelled(const Sample& s) {
    return majority_label(s.counts) != true_class(s);
}

std::string format_g9(double value) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    return buf;
}

}  // namespace relabel
