#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "relabel/core.hpp"
#include "relabel/rng.hpp"

namespace relabel {

using Embeddings = std::vector<std::vector<double>>;
using Labels = std::vector<std::size_t>;

// One posterior row per sample, in dataset order.
struct PosteriorMatrix {
    std::vector<LabelDistribution> rows;

    std::size_t size() const { return rows.size(); }
    const LabelDistribution& operator[](std::size_t i) const { return rows[i]; }
};

// Majority label of every sample (cleaned and available alike).
Labels majority_labels(const DatasetState& state);

// counts_i / ||counts_i||_1 for every sample.
PosteriorMatrix empirical_posteriors(const DatasetState& state);

struct SoftmaxHeadConfig {
    double learning_rate = 0.1;
    std::size_t epochs = 120;
    double weight_decay = 1e-3;
    double label_smoothing = 0.1;   // epsilon of the smoothed one-hot targets
    double logit_clamp_alpha = 20.0;  // alpha of the tanh logit clamp
    std::size_t batch_size = 128;
    std::size_t refresh_epochs = 20;  // epochs per scheduled mid-run refresh
    std::uint64_t seed = 0;

    void validate() const;
};

// Multinomial logistic head on fixed embeddings. Weights start at zero;
// the seed only drives batch shuffling.
class SoftmaxHead {
public:
    SoftmaxHead() = default;
    SoftmaxHead(std::size_t num_classes, std::size_t embedding_dim, SoftmaxHeadConfig cfg);

    // Runs `epochs` of mini-batch gradient descent from the current weights,
    // consuming `rng` for the per-epoch shuffles. Appends the full-data
    // objective after each epoch to epoch_losses().
    void train(const Embeddings& embeddings, const Labels& labels, std::size_t epochs, Rng& rng);

    // Logits after the alpha*tanh(z/alpha) clamp; |entry| <= alpha.
    std::vector<double> clamped_logits(const std::vector<double>& embedding) const;
    LabelDistribution predict(const std::vector<double>& embedding) const;
    PosteriorMatrix predict_all(const Embeddings& embeddings) const;

    // Mean smoothed cross-entropy plus the L2 penalty, at the current weights.
    double objective(const Embeddings& embeddings, const Labels& labels) const;
    // Gradient of objective() flattened as [weights row-major, then biases].
    std::vector<double> objective_gradient(const Embeddings& embeddings, const Labels& labels) const;
    // Per-sample unsmoothed cross-entropy losses for the given indices.
    std::vector<double> sample_losses(const Embeddings& embeddings, const Labels& labels,
                                      const std::vector<std::size_t>& indices) const;
    // One averaged gradient step over the given sample indices.
    void gd_step(const Embeddings& embeddings, const Labels& labels,
                 const std::vector<std::size_t>& batch);

    std::vector<double> flat_params() const;
    void set_flat_params(const std::vector<double>& params);
    const std::vector<double>& epoch_losses() const { return epoch_losses_; }
    const SoftmaxHeadConfig& config() const { return cfg_; }
    std::size_t num_classes() const { return num_classes_; }
    std::size_t embedding_dim() const { return embedding_dim_; }

    void save_weights_csv(const std::string& path) const;
    static SoftmaxHead load_weights_csv(const std::string& path, SoftmaxHeadConfig cfg);

private:
    std::size_t num_classes_ = 0;
    std::size_t embedding_dim_ = 0;
    SoftmaxHeadConfig cfg_;
    std::vector<std::vector<double>> weights_;  // C x L
    std::vector<double> bias_;                  // C
    std::vector<double> epoch_losses_;
};

// Trains a fresh head for cfg.epochs on the given data.
SoftmaxHead fit_softmax_head(const Embeddings& embeddings, const Labels& labels,
                             std::size_t num_classes, const SoftmaxHeadConfig& cfg);

// Seed for ensemble member / co-teaching peer m under a base seed.
std::uint64_t member_seed(std::uint64_t seed, std::size_t member);

struct CoTeachingConfig {
    SoftmaxHeadConfig head;      // shared hyperparameters; peer seeds derive from `seed`
    double drop_rate = 0.0;      // fraction of each batch discarded after warmup
    std::size_t warmup_epochs = 10;
    std::uint64_t seed = 0;

    void validate() const;
};

struct CoTeachingPair {
    std::array<SoftmaxHead, 2> heads;

    PosteriorMatrix predict_all(const Embeddings& embeddings) const;  // mean of the two heads
};

// Two peer heads; after warmup each head steps only on the share of its batch
// with the smallest loss under the other head.
CoTeachingPair fit_co_teaching(const Embeddings& embeddings, const Labels& labels,
                               std::size_t num_classes, const CoTeachingConfig& cfg);

// Continues training an existing pair (selection active from the first epoch).
void co_teaching_train(CoTeachingPair& pair, const Embeddings& embeddings, const Labels& labels,
                       const CoTeachingConfig& cfg, std::size_t epochs, std::size_t warmup_epochs,
                       std::array<Rng, 2>& rngs);

struct EnsembleConfig {
    SoftmaxHeadConfig head;
    std::size_t members = 5;
    bool bootstrap = true;
    std::uint64_t seed = 0;

    void validate() const;
};

// M heads with per-member seeds, each trained on a bootstrap resample
// (or on the full data when bootstrap is off).
std::vector<SoftmaxHead> fit_ensemble(const Embeddings& embeddings, const Labels& labels,
                                      std::size_t num_classes, const EnsembleConfig& cfg);
std::vector<SoftmaxHead> fit_ensemble_with_seeds(const Embeddings& embeddings, const Labels& labels,
                                                 std::size_t num_classes,
                                                 const SoftmaxHeadConfig& head,
                                                 const std::vector<std::uint64_t>& seeds,
                                                 bool bootstrap);

struct GraphConfig {
    enum class Solver { ClosedForm, Iterative };

    std::size_t k_neighbors = 10;
    double mu = 0.0101;  // fidelity coefficient; propagation weight 1/(1+mu)
    Solver solver = Solver::ClosedForm;
    double iterative_tol = 1e-8;
    std::size_t max_iters = 20000;

    void validate() const;
};

std::string to_string(GraphConfig::Solver solver);
GraphConfig::Solver solver_from_string(const std::string& name);

// Symmetric kNN affinity graph, W_ij = (1 + cos(h_i, h_j)) / 2 kept for the
// K nearest neighbours of either endpoint, zero diagonal.
class KnnGraph {
public:
    KnnGraph() = default;
    explicit KnnGraph(std::vector<std::vector<std::pair<std::size_t, double>>> adjacency);

    std::size_t size() const { return adjacency_.size(); }
    // Per-row neighbours sorted by column index.
    const std::vector<std::pair<std::size_t, double>>& neighbors(std::size_t i) const {
        return adjacency_[i];
    }
    std::vector<double> degrees() const;
    double weight(std::size_t i, std::size_t j) const;  // 0 when absent

private:
    std::vector<std::vector<std::pair<std::size_t, double>>> adjacency_;
};

KnnGraph build_knn_graph(const Embeddings& embeddings, const GraphConfig& cfg);

// Label spreading on a fixed graph. The closed-form route factorizes the
// system once and re-solves for new label matrices; the iterative route runs
// the propagation fixed point.
class GraphSpreader {
public:
    GraphSpreader(const KnnGraph& graph, GraphConfig cfg);
    ~GraphSpreader();
    GraphSpreader(GraphSpreader&&) noexcept;
    GraphSpreader& operator=(GraphSpreader&&) noexcept;

    // Raw spread labels F; rows need not sum to 1.
    std::vector<std::vector<double>> solve_raw(const std::vector<std::vector<double>>& y) const;
    // Row-renormalized F as posterior rows.
    PosteriorMatrix solve(const std::vector<std::vector<double>>& y) const;
    const std::vector<bool>& isolated() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

PosteriorMatrix spread_labels(const KnnGraph& graph, const std::vector<std::vector<double>>& y,
                              const GraphConfig& cfg);

// One-hot rows from the current majority labels.
std::vector<std::vector<double>> one_hot_labels(const DatasetState& state);

enum class PosteriorKind { Empirical, SoftmaxHead, CoTeaching, Ensemble, Graph };

std::string to_string(PosteriorKind kind);
PosteriorKind posterior_kind_from_string(const std::string& name);

struct PosteriorSpec {
    PosteriorKind kind = PosteriorKind::Graph;
    SoftmaxHeadConfig head;          // base hyperparameters for the trained kinds
    double co_teach_drop_rate = -1.0;  // < 0: measured initial noise rate
    std::size_t co_teach_warmup = 10;
    std::size_t ensemble_members = 5;
    bool ensemble_bootstrap = true;
    GraphConfig graph;
    std::uint64_t seed = 0;

    void validate() const;
};

// Estimator lifecycle driven by the simulation engine: fit once on the
// initial labels, update on the annotation schedule, posteriors on demand.
class PosteriorModel {
public:
    virtual ~PosteriorModel() = default;

    virtual std::string name() const = 0;
    virtual void fit(const DatasetState& state) = 0;
    virtual void update(const DatasetState& state) = 0;
    virtual PosteriorMatrix posteriors(const DatasetState& state) = 0;
    // Per-member rows for mutual-information scoring; empty unless the model
    // carries an ensemble.
    virtual std::vector<PosteriorMatrix> member_posteriors(const DatasetState& state) {
        (void)state;
        return {};
    }
};

std::unique_ptr<PosteriorModel> make_posterior_model(const PosteriorSpec& spec);

}  // namespace relabel
