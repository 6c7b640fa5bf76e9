#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "relabel/posterior.hpp"

namespace relabel {

void GraphConfig::validate() const {
    if (k_neighbors == 0) throw std::invalid_argument("GraphConfig: k_neighbors must be positive");
    if (mu <= 0.0) throw std::invalid_argument("GraphConfig: mu must be positive");
    if (iterative_tol <= 0.0) throw std::invalid_argument("GraphConfig: iterative_tol must be positive");
    if (max_iters == 0) throw std::invalid_argument("GraphConfig: max_iters must be positive");
}

std::string to_string(GraphConfig::Solver solver) {
    return solver == GraphConfig::Solver::ClosedForm ? "closed_form" : "iterative";
}

GraphConfig::Solver solver_from_string(const std::string& name) {
    if (name == "closed_form") return GraphConfig::Solver::ClosedForm;
    if (name == "iterative") return GraphConfig::Solver::Iterative;
    throw std::invalid_argument("unknown graph solver: " + name);
}

KnnGraph::KnnGraph(std::vector<std::vector<std::pair<std::size_t, double>>> adjacency)
    : adjacency_(std::move(adjacency)) {}

std::vector<double> KnnGraph::degrees() const {
    std::vector<double> deg(adjacency_.size(), 0.0);
    for (std::size_t i = 0; i < adjacency_.size(); ++i) {
        for (const auto& [j, w] : adjacency_[i]) {
            (void)j;
            deg[i] += w;
        }
    }
    return deg;
}

double KnnGraph::weight(std::size_t i, std::size_t j) const {
    for (const auto& [col, w] : adjacency_[i]) {
        if (col == j) return w;
    }
    return 0.0;
}

KnnGraph build_knn_graph(const Embeddings& embeddings, const GraphConfig& cfg) {
    cfg.validate();
    const std::size_t n = embeddings.size();
    if (n < cfg.k_neighbors + 1) {
        throw std::invalid_argument("build_knn_graph: need at least K+1 samples");
    }
    std::vector<double> norms(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (double v : embeddings[i]) s += v * v;
        norms[i] = std::sqrt(s);
        if (norms[i] == 0.0) {
            throw std::invalid_argument("build_knn_graph: zero-norm embedding at row " +
                                        std::to_string(i));
        }
    }
    std::vector<std::vector<std::pair<std::size_t, double>>> adjacency(n);
    std::vector<std::pair<double, std::size_t>> affinities;  // (-affinity, column) for sorting
    for (std::size_t i = 0; i < n; ++i) {
        affinities.clear();
        affinities.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double dot = 0.0;
            for (std::size_t l = 0; l < embeddings[i].size(); ++l) {
                dot += embeddings[i][l] * embeddings[j][l];
            }
            const double cosine = dot / (norms[i] * norms[j]);
            affinities.emplace_back(-0.5 * (1.0 + cosine), j);
        }
        const std::size_t k = std::min(cfg.k_neighbors, affinities.size());
        std::partial_sort(affinities.begin(), affinities.begin() + k, affinities.end());
        for (std::size_t r = 0; r < k; ++r) {
            const double w = -affinities[r].first;
            if (w > 0.0) adjacency[i].emplace_back(affinities[r].second, w);
        }
    }
    // Symmetrize by elementwise max: keep every declared neighbour relation.
    std::vector<std::vector<std::pair<std::size_t, double>>> symmetric(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& [j, w] : adjacency[i]) {
            symmetric[i].emplace_back(j, w);
            symmetric[j].emplace_back(i, w);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto& row = symmetric[i];
        std::sort(row.begin(), row.end());
        std::vector<std::pair<std::size_t, double>> merged;
        for (const auto& [j, w] : row) {
            if (!merged.empty() && merged.back().first == j) {
                merged.back().second = std::max(merged.back().second, w);
            } else {
                merged.emplace_back(j, w);
            }
        }
        row = std::move(merged);
    }
    return KnnGraph(std::move(symmetric));
}

struct GraphSpreader::Impl {
    GraphConfig cfg;
    std::size_t n = 0;
    std::vector<bool> isolated;
    Eigen::SparseMatrix<double> s;  // D^{-1/2} W D^{-1/2}
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
};

GraphSpreader::GraphSpreader(const KnnGraph& graph, GraphConfig cfg) : impl_(new Impl) {
    cfg.validate();
    impl_->cfg = cfg;
    const std::size_t n = graph.size();
    impl_->n = n;
    const auto degrees = graph.degrees();
    impl_->isolated.resize(n);
    std::vector<double> inv_sqrt(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        impl_->isolated[i] = degrees[i] <= 0.0;
        if (!impl_->isolated[i]) inv_sqrt[i] = 1.0 / std::sqrt(degrees[i]);
    }
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& [j, w] : graph.neighbors(i)) {
            triplets.emplace_back(static_cast<int>(i), static_cast<int>(j),
                                  w * inv_sqrt[i] * inv_sqrt[j]);
        }
    }
    impl_->s.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    impl_->s.setFromTriplets(triplets.begin(), triplets.end());
    if (cfg.solver == GraphConfig::Solver::ClosedForm) {
        const double c = 1.0 / (1.0 + cfg.mu);
        Eigen::SparseMatrix<double> identity(static_cast<Eigen::Index>(n),
                                             static_cast<Eigen::Index>(n));
        identity.setIdentity();
        Eigen::SparseMatrix<double> system = identity - c * impl_->s;
        impl_->llt.compute(system);
        if (impl_->llt.info() != Eigen::Success) {
            throw std::runtime_error("spread_labels: factorization failed (system not SPD?)");
        }
    }
}

GraphSpreader::~GraphSpreader() = default;
GraphSpreader::GraphSpreader(GraphSpreader&&) noexcept = default;
GraphSpreader& GraphSpreader::operator=(GraphSpreader&&) noexcept = default;

const std::vector<bool>& GraphSpreader::isolated() const { return impl_->isolated; }

std::vector<std::vector<double>> GraphSpreader::solve_raw(
    const std::vector<std::vector<double>>& y) const {
    const std::size_t n = impl_->n;
    if (y.size() != n) throw std::invalid_argument("spread_labels: Y row count mismatch");
    const std::size_t num_classes = y.empty() ? 0 : y.front().size();
    const double c = 1.0 / (1.0 + impl_->cfg.mu);
    const double fidelity = impl_->cfg.mu / (1.0 + impl_->cfg.mu);
    Eigen::MatrixXd ym(n, num_classes);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < num_classes; ++k) ym(i, k) = y[i][k];
    }
    Eigen::MatrixXd f;
    if (impl_->cfg.solver == GraphConfig::Solver::ClosedForm) {
        f = impl_->llt.solve(fidelity * ym);
        if (impl_->llt.info() != Eigen::Success) {
            throw std::runtime_error("spread_labels: solve failed");
        }
    } else {
        f = ym;
        bool converged = false;
        for (std::size_t it = 0; it < impl_->cfg.max_iters; ++it) {
            Eigen::MatrixXd next = c * (impl_->s * f) + fidelity * ym;
            const double delta = (next - f).cwiseAbs().maxCoeff();
            f = std::move(next);
            if (delta < impl_->cfg.iterative_tol) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            throw std::runtime_error("spread_labels: iterative solver did not converge within " +
                                     std::to_string(impl_->cfg.max_iters) + " iterations");
        }
    }
    std::vector<std::vector<double>> out(n, std::vector<double>(num_classes, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < num_classes; ++k) out[i][k] = f(i, k);
    }
    return out;
}

PosteriorMatrix GraphSpreader::solve(const std::vector<std::vector<double>>& y) const {
    auto raw = solve_raw(y);
    PosteriorMatrix out;
    out.rows.reserve(raw.size());
    for (auto& row : raw) {
        double sum = 0.0;
        for (double v : row) sum += v;
        if (sum <= 0.0) throw std::runtime_error("spread_labels: non-positive row sum");
        for (double& v : row) v /= sum;
        out.rows.emplace_back(std::move(row));
    }
    return out;
}

PosteriorMatrix spread_labels(const KnnGraph& graph, const std::vector<std::vector<double>>& y,
                              const GraphConfig& cfg) {
    return GraphSpreader(graph, cfg).solve(y);
}

std::vector<std::vector<double>> one_hot_labels(const DatasetState& state) {
    std::vector<std::vector<double>> y(state.size(),
                                       std::vector<double>(state.num_classes(), 0.0));
    for (std::size_t i = 0; i < state.size(); ++i) {
        y[i][majority_label(state.data.samples[i].counts)] = 1.0;
    }
    return y;
}

}  // namespace relabel
