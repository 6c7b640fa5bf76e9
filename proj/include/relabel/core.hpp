#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace relabel {

using SampleId = std::uint64_t;

// Probability vector over C classes. Entries in [0,1], sum 1 within 1e-9.
struct LabelDistribution {
    std::vector<double> probs;

    LabelDistribution() = default;
    explicit LabelDistribution(std::vector<double> p);

    std::size_t num_classes() const { return probs.size(); }
};

// Per-class annotation tallies for one sample.
struct LabelCounts {
    std::vector<int> counts;

    LabelCounts() = default;
    explicit LabelCounts(std::vector<int> c);

    std::size_t num_classes() const { return counts.size(); }
    long total() const;
};

struct Sample {
    SampleId id = 0;
    std::vector<double> embedding;
    LabelDistribution true_dist;
    LabelCounts counts;
};

// Immutable sample definitions plus dataset-wide dimensions.
struct Dataset {
    std::size_t num_classes = 0;
    std::size_t embedding_dim = 0;
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    void validate() const;  // throws on inconsistent dims / duplicate ids
};

// Dataset plus the evolving cleaned/available partition. Counts are mutated
// only by the simulation engine (single writer per run).
struct DatasetState {
    Dataset data;
    std::vector<bool> cleaned;  // by sample index
    std::size_t cleaned_count = 0;

    DatasetState() = default;
    explicit DatasetState(Dataset d);  // requires every sample to carry >= 1 label

    std::size_t size() const { return data.size(); }
    std::size_t num_classes() const { return data.num_classes; }
    bool is_cleaned(std::size_t index) const { return cleaned[index]; }
    void mark_cleaned(std::size_t index);
    std::vector<std::size_t> available_indices() const;
    std::size_t index_of(SampleId id) const;  // throws if unknown

private:
    std::vector<std::pair<SampleId, std::size_t>> id_index_;  // sorted by id
};

struct DifficultyConfig {
    double threshold = 0.3;  // strictly in (0,1)
};

// argmax with ties broken by lowest index.
std::size_t argmax_lowest(std::span<const double> values);
std::size_t argmax_lowest(std::span<const int> values);

// Shannon entropy -sum p ln p, with 0 ln 0 = 0. Result in [0, ln C].
double entropy(const LabelDistribution& dist);

// entropy(dist) / ln C; in [0,1].
double normalized_entropy(const LabelDistribution& dist);

// True iff normalized entropy strictly exceeds the threshold.
bool is_difficult(const LabelDistribution& dist, const DifficultyConfig& cfg);

// Cross-entropy from normalized counts to the posterior, with a 1e-12 floor
// inside the log so confident-wrong posteriors stay finite.
double cross_entropy(const LabelCounts& counts, const LabelDistribution& posterior);

inline constexpr double kPosteriorFloor = 1e-12;

// argmax over counts, ties to the lowest class index. Requires total >= 1.
std::size_t majority_label(const LabelCounts& counts);

// True iff the maximum count is strictly greater than every other count.
bool has_majority(const LabelCounts& counts);

// True class of a sample: argmax of its true distribution.
inline std::size_t true_class(const Sample& s) {
    return argmax_lowest(std::span<const double>(s.true_dist.probs));
}

// True iff the sample's current majority label differs from its true class.
bool is_mislabelled(const Sample& s);

// Shared report convention: floats rendered with 9 significant digits.
std::string format_g9(double value);

}  // namespace relabel
