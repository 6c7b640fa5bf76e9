#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "relabel/posterior.hpp"

namespace relabel {

Labels majority_labels(const DatasetState& state) {
    Labels labels;
    labels.reserve(state.size());
    for (const Sample& s : state.data.samples) labels.push_back(majority_label(s.counts));
    return labels;
}

PosteriorMatrix empirical_posteriors(const DatasetState& state) {
    PosteriorMatrix out;
    out.rows.reserve(state.size());
    for (const Sample& s : state.data.samples) {
        const double total = static_cast<double>(s.counts.total());
        if (total < 1.0) {
            throw std::invalid_argument("empirical_posteriors: sample " + std::to_string(s.id) +
                                        " has no labels");
        }
        std::vector<double> row(s.counts.num_classes(), 0.0);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] = s.counts.counts[c] / total;
        out.rows.emplace_back(std::move(row));
    }
    return out;
}

std::string to_string(PosteriorKind kind) {
    switch (kind) {
        case PosteriorKind::Empirical: return "empirical";
        case PosteriorKind::SoftmaxHead: return "softmax_head";
        case PosteriorKind::CoTeaching: return "co_teaching";
        case PosteriorKind::Ensemble: return "ensemble";
        case PosteriorKind::Graph: return "graph";
    }
    return "unknown";
}

PosteriorKind posterior_kind_from_string(const std::string& name) {
    if (name == "empirical") return PosteriorKind::Empirical;
    if (name == "softmax_head") return PosteriorKind::SoftmaxHead;
    if (name == "co_teaching") return PosteriorKind::CoTeaching;
    if (name == "ensemble") return PosteriorKind::Ensemble;
    if (name == "graph") return PosteriorKind::Graph;
    throw std::invalid_argument("unknown posterior kind: " + name);
}

void PosteriorSpec::validate() const {
    head.validate();
    graph.validate();
    if (co_teach_drop_rate >= 1.0) {
        throw std::invalid_argument("PosteriorSpec: co_teach_drop_rate must be < 1");
    }
    if (ensemble_members < 2) {
        throw std::invalid_argument("PosteriorSpec: ensemble needs >= 2 members");
    }
}

namespace {

Embeddings collect_embeddings(const DatasetState& state) {
    Embeddings x;
    x.reserve(state.size());
    for (const Sample& s : state.data.samples) x.push_back(s.embedding);
    return x;
}

double mislabelled_fraction(const DatasetState& state) {
    if (state.size() == 0) return 0.0;
    std::size_t wrong = 0;
    for (const Sample& s : state.data.samples) wrong += is_mislabelled(s) ? 1 : 0;
    return static_cast<double>(wrong) / static_cast<double>(state.size());
}

class EmpiricalModel final : public PosteriorModel {
public:
    std::string name() const override { return "empirical"; }
    void fit(const DatasetState&) override {}
    void update(const DatasetState&) override {}
    PosteriorMatrix posteriors(const DatasetState& state) override {
        return empirical_posteriors(state);
    }
};

class SoftmaxHeadModel final : public PosteriorModel {
public:
    explicit SoftmaxHeadModel(PosteriorSpec spec) : spec_(std::move(spec)) {}

    std::string name() const override { return "softmax_head"; }

    void fit(const DatasetState& state) override {
        embeddings_ = collect_embeddings(state);
        SoftmaxHeadConfig cfg = spec_.head;
        cfg.seed = spec_.seed;
        head_ = SoftmaxHead(state.num_classes(), state.data.embedding_dim, cfg);
        rng_.emplace(cfg.seed);
        head_.train(embeddings_, majority_labels(state), cfg.epochs, *rng_);
    }

    void update(const DatasetState& state) override {
        head_.train(embeddings_, majority_labels(state), spec_.head.refresh_epochs, *rng_);
    }

    PosteriorMatrix posteriors(const DatasetState&) override {
        return head_.predict_all(embeddings_);
    }

private:
    PosteriorSpec spec_;
    Embeddings embeddings_;
    SoftmaxHead head_;
    std::optional<Rng> rng_;
};

class CoTeachingModel final : public PosteriorModel {
public:
    explicit CoTeachingModel(PosteriorSpec spec) : spec_(std::move(spec)) {}

    std::string name() const override { return "co_teaching"; }

    void fit(const DatasetState& state) override {
        embeddings_ = collect_embeddings(state);
        cfg_.head = spec_.head;
        cfg_.warmup_epochs = spec_.co_teach_warmup;
        cfg_.seed = spec_.seed;
        cfg_.drop_rate = spec_.co_teach_drop_rate >= 0.0 ? spec_.co_teach_drop_rate
                                                         : mislabelled_fraction(state);
        cfg_.validate();
        rngs_.emplace(std::array<Rng, 2>{Rng(member_seed(cfg_.seed, 0)),
                                         Rng(member_seed(cfg_.seed, 1))});
        for (std::size_t m = 0; m < 2; ++m) {
            SoftmaxHeadConfig head_cfg = cfg_.head;
            head_cfg.seed = member_seed(cfg_.seed, m);
            pair_.heads[m] = SoftmaxHead(state.num_classes(), state.data.embedding_dim, head_cfg);
        }
        co_teaching_train(pair_, embeddings_, majority_labels(state), cfg_, cfg_.head.epochs,
                          cfg_.warmup_epochs, *rngs_);
    }

    void update(const DatasetState& state) override {
        // Heads are already warmed up; selection stays active for the refresh.
        co_teaching_train(pair_, embeddings_, majority_labels(state), cfg_,
                          spec_.head.refresh_epochs, 0, *rngs_);
    }

    PosteriorMatrix posteriors(const DatasetState&) override {
        return pair_.predict_all(embeddings_);
    }

private:
    PosteriorSpec spec_;
    CoTeachingConfig cfg_;
    Embeddings embeddings_;
    CoTeachingPair pair_;
    std::optional<std::array<Rng, 2>> rngs_;
};

class EnsembleModel final : public PosteriorModel {
public:
    explicit EnsembleModel(PosteriorSpec spec) : spec_(std::move(spec)) {}

    std::string name() const override { return "ensemble"; }

    void fit(const DatasetState& state) override {
        embeddings_ = collect_embeddings(state);
        const Labels labels = majority_labels(state);
        heads_.clear();
        rngs_.clear();
        member_indices_.clear();
        for (std::size_t m = 0; m < spec_.ensemble_members; ++m) {
            const std::uint64_t seed = member_seed(spec_.seed, m);
            SoftmaxHeadConfig cfg = spec_.head;
            cfg.seed = seed;
            // Bootstrap index multiset is drawn once and kept for refreshes,
            // from a stream separate from the training shuffles.
            std::vector<std::size_t> indices(state.size());
            if (spec_.ensemble_bootstrap) {
                Rng boot(mix_seed(seed, 0x424f4f54));  // "BOOT"
                for (auto& idx : indices) {
                    idx = static_cast<std::size_t>(boot.uniform_below(state.size()));
                }
            } else {
                for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
            }
            member_indices_.push_back(std::move(indices));
            heads_.emplace_back(state.num_classes(), state.data.embedding_dim, cfg);
            rngs_.emplace_back(seed);
            train_member(m, labels, cfg.epochs);
        }
    }

    void update(const DatasetState& state) override {
        const Labels labels = majority_labels(state);
        for (std::size_t m = 0; m < heads_.size(); ++m) {
            train_member(m, labels, spec_.head.refresh_epochs);
        }
    }

    PosteriorMatrix posteriors(const DatasetState& state) override {
        PosteriorMatrix mean;
        mean.rows.reserve(state.size());
        std::vector<PosteriorMatrix> members = member_posteriors(state);
        for (std::size_t i = 0; i < state.size(); ++i) {
            std::vector<double> row(state.num_classes(), 0.0);
            for (const auto& member : members) {
                for (std::size_t c = 0; c < row.size(); ++c) row[c] += member[i].probs[c];
            }
            for (double& v : row) v /= static_cast<double>(members.size());
            mean.rows.emplace_back(std::move(row));
        }
        return mean;
    }

    std::vector<PosteriorMatrix> member_posteriors(const DatasetState&) override {
        std::vector<PosteriorMatrix> out;
        out.reserve(heads_.size());
        for (const auto& head : heads_) out.push_back(head.predict_all(embeddings_));
        return out;
    }

private:
    void train_member(std::size_t m, const Labels& labels, std::size_t epochs) {
        Embeddings x;
        Labels y;
        x.reserve(member_indices_[m].size());
        y.reserve(member_indices_[m].size());
        for (std::size_t idx : member_indices_[m]) {
            x.push_back(embeddings_[idx]);
            y.push_back(labels[idx]);
        }
        heads_[m].train(x, y, epochs, rngs_[m]);
    }

    PosteriorSpec spec_;
    Embeddings embeddings_;
    std::vector<SoftmaxHead> heads_;
    std::vector<Rng> rngs_;
    std::vector<std::vector<std::size_t>> member_indices_;
};

class GraphModel final : public PosteriorModel {
public:
    explicit GraphModel(PosteriorSpec spec) : spec_(std::move(spec)) {}

    std::string name() const override { return "graph"; }

    void fit(const DatasetState& state) override {
        embeddings_ = collect_embeddings(state);
        graph_ = build_knn_graph(embeddings_, spec_.graph);
        spreader_.emplace(graph_, spec_.graph);
    }

    // Transductive: new labels only change Y, never the factorization.
    void update(const DatasetState&) override {}

    PosteriorMatrix posteriors(const DatasetState& state) override {
        PosteriorMatrix out = spreader_->solve(one_hot_labels(state));
        const auto& isolated = spreader_->isolated();
        if (std::find(isolated.begin(), isolated.end(), true) != isolated.end()) {
            const PosteriorMatrix fallback = empirical_posteriors(state);
            for (std::size_t i = 0; i < out.size(); ++i) {
                if (isolated[i]) out.rows[i] = fallback[i];
            }
        }
        return out;
    }

private:
    PosteriorSpec spec_;
    Embeddings embeddings_;
    KnnGraph graph_;
    std::optional<GraphSpreader> spreader_;
};

}  // namespace

std::unique_ptr<PosteriorModel> make_posterior_model(const PosteriorSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case PosteriorKind::Empirical: return std::make_unique<EmpiricalModel>();
        case PosteriorKind::SoftmaxHead: return std::make_unique<SoftmaxHeadModel>(spec);
        case PosteriorKind::CoTeaching: return std::make_unique<CoTeachingModel>(spec);
        case PosteriorKind::Ensemble: return std::make_unique<EnsembleModel>(spec);
        case PosteriorKind::Graph: return std::make_unique<GraphModel>(spec);
    }
    throw std::logic_error("make_posterior_model: unhandled kind");
}

}  // namespace relabel
