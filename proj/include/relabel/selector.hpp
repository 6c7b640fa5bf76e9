#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relabel/core.hpp"
#include "relabel/posterior.hpp"

namespace relabel {

// Score for one available sample, with the additive breakdown
// score = ce_term - ambiguity_term kept for per-sample audits.
struct ScoredSample {
    SampleId id = 0;
    double score = 0.0;
    double ce_term = 0.0;
    double ambiguity_term = 0.0;
};

// Descending by score, ties broken by ascending sample id; covers exactly
// the available (not-yet-cleaned) samples.
struct Ranking {
    std::vector<ScoredSample> entries;

    std::size_t size() const { return entries.size(); }
    const ScoredSample& top() const { return entries.front(); }
};

// Eq. 2: cross-entropy of the given labels under the posterior, minus the
// posterior's entropy. May be negative.
double phi_score(const LabelCounts& counts, const LabelDistribution& posterior);

// Mutual information between the label and the model parameters, estimated
// from ensemble member posteriors: H(mean) - mean(H). Clipped at 0.
double bald_score(const std::vector<LabelDistribution>& member_rows);

// Sorts the scored samples into a ranking. Throws on non-finite scores.
Ranking rank_candidates(const DatasetState& state, std::vector<ScoredSample> scores);

// Phi scores for every available sample; with no_ambiguity_term the entropy
// term is dropped (CE-only ablation).
Ranking phi_ranking(const DatasetState& state, const PosteriorMatrix& posteriors,
                    bool no_ambiguity_term = false);

// BALD scores for every available sample from per-member posterior matrices.
Ranking bald_ranking(const DatasetState& state, const std::vector<PosteriorMatrix>& members);

enum class OracleDifficulty { Entropy, ExpectedDraws };

// Simulation-only: mislabelled samples first, least difficult first within
// each group. Difficulty is the normalized entropy of the true distribution
// (or a Monte Carlo estimate of draws-to-majority in ExpectedDraws mode).
Ranking oracle_priority(const DatasetState& state,
                        OracleDifficulty difficulty = OracleDifficulty::Entropy,
                        std::uint64_t seed = 0);

// Uniform permutation of the available samples, deterministic given seed.
Ranking random_priority(const DatasetState& state, std::uint64_t seed);

enum class SelectorKind { Phi, Bald, Oracle, Random };

std::string to_string(SelectorKind kind);
SelectorKind selector_kind_from_string(const std::string& name);

struct SelectorSpec {
    SelectorKind kind = SelectorKind::Phi;
    bool no_ambiguity_term = false;  // CE-only scoring ablation
    OracleDifficulty oracle_difficulty = OracleDifficulty::Entropy;
};

void write_ranking_csv(const std::string& path, const Ranking& ranking);

}  // namespace relabel
