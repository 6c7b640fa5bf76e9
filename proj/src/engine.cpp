#include <fstream>
#include <stdexcept>
#include <string>

#include "relabel/engine.hpp"

namespace relabel {

namespace {
constexpr std::uint64_t kAnnotationStream = 0x414e4e4f;   // "ANNO"
constexpr std::uint64_t kRandomRoundStream = 0x5253454c;  // "RSEL"
constexpr std::uint64_t kBudgetRunStream = 0x42554447;    // "BUDG"
}

void SimulationConfig::validate() const {
    if (budget == 0) throw std::invalid_argument("SimulationConfig: budget must be >= 1");
    if (draw_cap == 0) throw std::invalid_argument("SimulationConfig: draw_cap must be >= 1");
    posterior.validate();
}

std::vector<std::size_t> acquire_until_majority(Sample& sample, Rng& rng, std::size_t cap) {
    if (cap == 0) throw std::invalid_argument("acquire_until_majority: cap must be >= 1");
    std::vector<std::size_t> draws;
    do {
        const std::size_t c = rng.categorical(sample.true_dist.probs);
        sample.counts.counts[c] += 1;
        draws.push_back(c);
    } while (!has_majority(sample.counts) && draws.size() < cap);
    return draws;
}

namespace {

std::size_t count_correct(const DatasetState& state) {
    std::size_t correct = 0;
    for (const Sample& s : state.data.samples) correct += is_mislabelled(s) ? 0 : 1;
    return correct;
}

Ranking make_ranking(const DatasetState& state, const SimulationConfig& cfg,
                     PosteriorModel* model, std::size_t round) {
    switch (cfg.selector.kind) {
        case SelectorKind::Phi:
            return phi_ranking(state, model->posteriors(state), cfg.selector.no_ambiguity_term);
        case SelectorKind::Bald: {
            auto members = model->member_posteriors(state);
            if (members.empty()) {
                throw std::invalid_argument(
                    "bald selector requires an ensemble posterior (got " + model->name() + ")");
            }
            return bald_ranking(state, members);
        }
        case SelectorKind::Oracle:
            return oracle_priority(state, cfg.selector.oracle_difficulty, cfg.seed);
        case SelectorKind::Random:
            return random_priority(state,
                                   mix_seed(mix_seed(cfg.seed, kRandomRoundStream), round));
    }
    throw std::logic_error("make_ranking: unhandled selector kind");
}

}  // namespace

SimulationTrace run_simulation(DatasetState& state, const SimulationConfig& cfg) {
    cfg.validate();
    const bool needs_model =
        cfg.selector.kind == SelectorKind::Phi || cfg.selector.kind == SelectorKind::Bald;
    std::unique_ptr<PosteriorModel> model;
    if (needs_model) {
        model = make_posterior_model(cfg.posterior);
        model->fit(state);
    }

    SimulationTrace trace;
    trace.num_samples = state.size();
    std::size_t correct = count_correct(state);
    trace.initial_correct = correct;

    std::size_t annotations = 0;
    std::size_t round = 0;
    while (annotations < cfg.budget) {
        if (state.cleaned_count == state.size()) {
            trace.exhausted_available = true;
            break;
        }
        if (cfg.max_rounds > 0 && trace.rounds >= cfg.max_rounds) break;
        const Ranking ranking = make_ranking(state, cfg, model.get(), round);
        const std::size_t idx = state.index_of(ranking.top().id);
        Sample& s = state.data.samples[idx];
        bool was_correct = !is_mislabelled(s);
        Rng draw_rng(mix_seed(mix_seed(cfg.seed, kAnnotationStream), s.id));

        std::size_t draws_this_round = 0;
        bool formed = false;
        do {
            const std::size_t drawn = draw_rng.categorical(s.true_dist.probs);
            s.counts.counts[drawn] += 1;
            ++draws_this_round;
            ++annotations;
            const bool now_correct = majority_label(s.counts) == true_class(s);
            correct += (now_correct ? 1 : 0) - (was_correct ? 1 : 0);
            was_correct = now_correct;
            formed = has_majority(s.counts);

            bool updated = false;
            if (needs_model && cfg.update_every > 0 && annotations % cfg.update_every == 0) {
                model->update(state);
                updated = true;
            }
            AnnotationEvent event;
            event.annotation_index = annotations;
            event.sample_id = s.id;
            event.drawn_class = drawn;
            event.counts_after = s.counts;
            event.majority_formed = formed;
            event.num_correct_after = correct;
            event.model_updated = updated;
            trace.events.push_back(std::move(event));
        } while (!formed && draws_this_round < cfg.draw_cap);

        if (!formed) ++trace.tie_capped_rounds;
        state.mark_cleaned(idx);
        ++trace.rounds;
        ++round;
    }

    trace.total_annotations = annotations;
    trace.overshoot = annotations > cfg.budget ? annotations - cfg.budget : 0;
    trace.final_correct = correct;
    return trace;
}

double oracle_expected_budget(const DatasetState& state, std::size_t runs, std::uint64_t seed) {
    if (runs == 0) throw std::invalid_argument("oracle_expected_budget: runs must be >= 1");
    // The oracle's relative order of the other samples never changes while one
    // sample is being annotated, so a single ranking pass equals the full
    // rank-clean-repeat loop.
    const Ranking ranking = oracle_priority(state);
    std::vector<std::size_t> targets;
    for (const auto& entry : ranking.entries) {
        const std::size_t idx = state.index_of(entry.id);
        if (is_mislabelled(state.data.samples[idx])) targets.push_back(idx);
    }
    double total = 0.0;
    for (std::size_t r = 0; r < runs; ++r) {
        const std::uint64_t run_seed = mix_seed(mix_seed(seed, kBudgetRunStream), r);
        for (std::size_t idx : targets) {
            const Sample& s = state.data.samples[idx];
            LabelCounts counts = s.counts;
            Rng rng(mix_seed(mix_seed(run_seed, kAnnotationStream), s.id));
            std::size_t draws = 0;
            do {
                counts.counts[rng.categorical(s.true_dist.probs)] += 1;
                ++draws;
            } while (!has_majority(counts) && draws < 100);
            total += static_cast<double>(draws);
        }
    }
    return total / static_cast<double>(runs);
}

void write_trace_csv(const std::string& path, const SimulationTrace& trace) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "annotation_index,sample_id,drawn_class,majority_formed,num_correct_after,"
           "model_updated\n";
    for (const auto& e : trace.events) {
        out << e.annotation_index << ',' << e.sample_id << ',' << e.drawn_class << ','
            << (e.majority_formed ? 1 : 0) << ',' << e.num_correct_after << ','
            << (e.model_updated ? 1 : 0) << '\n';
    }
}

}  // namespace relabel
