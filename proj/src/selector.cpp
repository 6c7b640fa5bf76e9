#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "relabel/selector.hpp"

namespace relabel {

namespace {
constexpr std::uint64_t kOracleDrawStream = 0x4f524143;  // "ORAC"
constexpr std::size_t kOracleDrawCap = 100;
constexpr std::size_t kOracleDrawRounds = 64;
}

double phi_score(const LabelCounts& counts, const LabelDistribution& posterior) {
    return cross_entropy(counts, posterior) - entropy(posterior);
}

double bald_score(const std::vector<LabelDistribution>& member_rows) {
    if (member_rows.size() < 2) throw std::invalid_argument("bald_score: need >= 2 members");
    const std::size_t num_classes = member_rows.front().num_classes();
    std::vector<double> mean(num_classes, 0.0);
    double mean_entropy = 0.0;
    for (const auto& row : member_rows) {
        for (std::size_t c = 0; c < num_classes; ++c) mean[c] += row.probs[c];
        mean_entropy += entropy(row);
    }
    for (double& v : mean) v /= static_cast<double>(member_rows.size());
    mean_entropy /= static_cast<double>(member_rows.size());
    return std::max(0.0, entropy(LabelDistribution(std::move(mean))) - mean_entropy);
}

Ranking rank_candidates(const DatasetState& state, std::vector<ScoredSample> scores) {
    const std::size_t available = state.size() - state.cleaned_count;
    if (scores.size() != available) {
        throw std::invalid_argument("rank_candidates: expected one score per available sample");
    }
    for (const auto& s : scores) {
        if (!std::isfinite(s.score)) {
            throw std::invalid_argument("rank_candidates: non-finite score for sample " +
                                        std::to_string(s.id));
        }
        if (state.is_cleaned(state.index_of(s.id))) {
            throw std::invalid_argument("rank_candidates: sample " + std::to_string(s.id) +
                                        " is already cleaned");
        }
    }
    std::sort(scores.begin(), scores.end(), [](const ScoredSample& a, const ScoredSample& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    return Ranking{std::move(scores)};
}

Ranking phi_ranking(const DatasetState& state, const PosteriorMatrix& posteriors,
                    bool no_ambiguity_term) {
    if (posteriors.size() != state.size()) {
        throw std::invalid_argument("phi_ranking: posterior row count mismatch");
    }
    std::vector<ScoredSample> scores;
    scores.reserve(state.size() - state.cleaned_count);
    for (std::size_t i : state.available_indices()) {
        const Sample& s = state.data.samples[i];
        ScoredSample entry;
        entry.id = s.id;
        entry.ce_term = cross_entropy(s.counts, posteriors[i]);
        entry.ambiguity_term = no_ambiguity_term ? 0.0 : entropy(posteriors[i]);
        entry.score = entry.ce_term - entry.ambiguity_term;
        scores.push_back(entry);
    }
    return rank_candidates(state, std::move(scores));
}

Ranking bald_ranking(const DatasetState& state, const std::vector<PosteriorMatrix>& members) {
    if (members.size() < 2) {
        throw std::invalid_argument("bald_ranking: need an ensemble posterior (>= 2 members)");
    }
    for (const auto& member : members) {
        if (member.size() != state.size()) {
            throw std::invalid_argument("bald_ranking: member row count mismatch");
        }
    }
    std::vector<ScoredSample> scores;
    scores.reserve(state.size() - state.cleaned_count);
    for (std::size_t i : state.available_indices()) {
        const std::size_t num_classes = state.num_classes();
        std::vector<double> mean(num_classes, 0.0);
        double mean_entropy = 0.0;
        for (const auto& member : members) {
            for (std::size_t c = 0; c < num_classes; ++c) mean[c] += member[i].probs[c];
            mean_entropy += entropy(member[i]);
        }
        for (double& v : mean) v /= static_cast<double>(members.size());
        mean_entropy /= static_cast<double>(members.size());
        ScoredSample entry;
        entry.id = state.data.samples[i].id;
        entry.ce_term = entropy(LabelDistribution(std::move(mean)));
        entry.ambiguity_term = mean_entropy;
        entry.score = std::max(0.0, entry.ce_term - entry.ambiguity_term);
        scores.push_back(entry);
    }
    return rank_candidates(state, std::move(scores));
}

namespace {

// Monte Carlo mean of draws needed to form a strict majority from the
// sample's current counts, drawing from its true distribution.
double mc_expected_draws(const Sample& s, std::uint64_t seed) {
    Rng rng(mix_seed(mix_seed(seed, kOracleDrawStream), s.id));
    double total = 0.0;
    for (std::size_t round = 0; round < kOracleDrawRounds; ++round) {
        LabelCounts counts = s.counts;
        std::size_t draws = 0;
        do {
            const std::size_t c = rng.categorical(s.true_dist.probs);
            counts.counts[c] += 1;
            ++draws;
        } while (!has_majority(counts) && draws < kOracleDrawCap);
        total += static_cast<double>(draws);
    }
    return total / static_cast<double>(kOracleDrawRounds);
}

}  // namespace

Ranking oracle_priority(const DatasetState& state, OracleDifficulty difficulty,
                        std::uint64_t seed) {
    std::vector<ScoredSample> scores;
    scores.reserve(state.size() - state.cleaned_count);
    for (std::size_t i : state.available_indices()) {
        const Sample& s = state.data.samples[i];
        const bool wrong = is_mislabelled(s);
        const double hardness = difficulty == OracleDifficulty::Entropy
                                    ? normalized_entropy(s.true_dist)
                                    : mc_expected_draws(s, seed) / kOracleDrawCap;
        ScoredSample entry;
        entry.id = s.id;
        entry.ce_term = wrong ? 3.0 : 1.0;
        entry.ambiguity_term = hardness;
        entry.score = entry.ce_term - entry.ambiguity_term;
        scores.push_back(entry);
    }
    return rank_candidates(state, std::move(scores));
}

Ranking random_priority(const DatasetState& state, std::uint64_t seed) {
    std::vector<SampleId> ids;
    ids.reserve(state.size() - state.cleaned_count);
    for (std::size_t i : state.available_indices()) ids.push_back(state.data.samples[i].id);
    Rng rng(seed);
    rng.shuffle(ids);
    Ranking ranking;
    ranking.entries.reserve(ids.size());
    for (std::size_t pos = 0; pos < ids.size(); ++pos) {
        ScoredSample entry;
        entry.id = ids[pos];
        entry.score = static_cast<double>(ids.size() - pos);
        ranking.entries.push_back(entry);
    }
    return ranking;
}

std::string to_string(SelectorKind kind) {
    switch (kind) {
        case SelectorKind::Phi: return "phi";
        case SelectorKind::Bald: return "bald";
        case SelectorKind::Oracle: return "oracle";
        case SelectorKind::Random: return "random";
    }
    return "unknown";
}

SelectorKind selector_kind_from_string(const std::string& name) {
    if (name == "phi") return SelectorKind::Phi;
    if (name == "bald") return SelectorKind::Bald;
    if (name == "oracle") return SelectorKind::Oracle;
    if (name == "random") return SelectorKind::Random;
    throw std::invalid_argument("unknown selector kind: " + name);
}

void write_ranking_csv(const std::string& path, const Ranking& ranking) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "rank,sample_id,score,ce_term,ambiguity_term\n";
    for (std::size_t r = 0; r < ranking.entries.size(); ++r) {
        const auto& e = ranking.entries[r];
        out << (r + 1) << ',' << e.id << ',' << format_g9(e.score) << ','
            << format_g9(e.ce_term) << ',' << format_g9(e.ambiguity_term) << '\n';
    }
}

}  // namespace relabel
