#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "relabel/posterior.hpp"

namespace relabel {

namespace {

constexpr std::uint64_t kMemberStream = 0x4d454d42;     // "MEMB"
constexpr std::uint64_t kBootstrapStream = 0x424f4f54;  // "BOOT"

void validate_training_inputs(const Embeddings& embeddings, const Labels& labels,
                              std::size_t num_classes) {
    if (embeddings.size() != labels.size()) {
        throw std::invalid_argument("softmax head: embeddings/labels size mismatch");
    }
    if (embeddings.size() < num_classes) {
        throw std::invalid_argument("softmax head: need at least one sample per class");
    }
    std::vector<bool> seen(num_classes, false);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_classes) {
            throw std::invalid_argument("softmax head: label out of range at sample " +
                                        std::to_string(i));
        }
        seen[labels[i]] = true;
        for (double v : embeddings[i]) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("softmax head: non-finite embedding at sample " +
                                            std::to_string(i));
            }
        }
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (!seen[c]) {
            throw std::invalid_argument("softmax head: class " + std::to_string(c) +
                                        " absent from training labels (degenerate fold)");
        }
    }
}

std::vector<double> softmax(std::vector<double> z) {
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (double& v : z) v /= sum;
    return z;
}

}  // namespace

void SoftmaxHeadConfig::validate() const {
    if (learning_rate <= 0.0) throw std::invalid_argument("SoftmaxHeadConfig: learning_rate must be positive");
    if (weight_decay < 0.0) throw std::invalid_argument("SoftmaxHeadConfig: weight_decay must be >= 0");
    if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
        throw std::invalid_argument("SoftmaxHeadConfig: label_smoothing must be in [0,1)");
    }
    if (logit_clamp_alpha <= 0.0) {
        throw std::invalid_argument("SoftmaxHeadConfig: logit_clamp_alpha must be positive");
    }
    if (batch_size == 0) throw std::invalid_argument("SoftmaxHeadConfig: batch_size must be positive");
}

SoftmaxHead::SoftmaxHead(std::size_t num_classes, std::size_t embedding_dim, SoftmaxHeadConfig cfg)
    : num_classes_(num_classes),
      embedding_dim_(embedding_dim),
      cfg_(cfg),
      weights_(num_classes, std::vector<double>(embedding_dim, 0.0)),
      bias_(num_classes, 0.0) {
    cfg_.validate();
    if (num_classes < 2) throw std::invalid_argument("SoftmaxHead: need >= 2 classes");
    if (embedding_dim == 0) throw std::invalid_argument("SoftmaxHead: embedding_dim must be positive");
}

std::vector<double> SoftmaxHead::clamped_logits(const std::vector<double>& embedding) const {
    const double alpha = cfg_.logit_clamp_alpha;
    std::vector<double> z(num_classes_, 0.0);
    for (std::size_t c = 0; c < num_classes_; ++c) {
        double v = bias_[c];
        const auto& w = weights_[c];
        for (std::size_t l = 0; l < embedding_dim_; ++l) v += w[l] * embedding[l];
        z[c] = alpha * std::tanh(v / alpha);
    }
    return z;
}

LabelDistribution SoftmaxHead::predict(const std::vector<double>& embedding) const {
    return LabelDistribution(softmax(clamped_logits(embedding)));
}

PosteriorMatrix SoftmaxHead::predict_all(const Embeddings& embeddings) const {
    PosteriorMatrix out;
    out.rows.reserve(embeddings.size());
    for (const auto& x : embeddings) out.rows.push_back(predict(x));
    return out;
}

double SoftmaxHead::objective(const Embeddings& embeddings, const Labels& labels) const {
    const double eps = cfg_.label_smoothing;
    double total = 0.0;
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        const auto p = softmax(clamped_logits(embeddings[i]));
        double loss = 0.0;
        for (std::size_t c = 0; c < num_classes_; ++c) {
            const double target = (c == labels[i] ? 1.0 - eps : 0.0) + eps / num_classes_;
            loss -= target * std::log(std::max(p[c], kPosteriorFloor));
        }
        total += loss;
    }
    double penalty = 0.0;
    for (const auto& w : weights_) {
        for (double v : w) penalty += v * v;
    }
    return total / static_cast<double>(embeddings.size()) + 0.5 * cfg_.weight_decay * penalty;
}

std::vector<double> SoftmaxHead::objective_gradient(const Embeddings& embeddings,
                                                    const Labels& labels) const {
    const double eps = cfg_.label_smoothing;
    const double alpha = cfg_.logit_clamp_alpha;
    std::vector<std::vector<double>> gw(num_classes_, std::vector<double>(embedding_dim_, 0.0));
    std::vector<double> gb(num_classes_, 0.0);
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        const auto& x = embeddings[i];
        std::vector<double> raw(num_classes_, 0.0);
        for (std::size_t c = 0; c < num_classes_; ++c) {
            double v = bias_[c];
            for (std::size_t l = 0; l < embedding_dim_; ++l) v += weights_[c][l] * x[l];
            raw[c] = v;
        }
        std::vector<double> clamped(num_classes_);
        for (std::size_t c = 0; c < num_classes_; ++c) clamped[c] = alpha * std::tanh(raw[c] / alpha);
        const auto p = softmax(clamped);
        for (std::size_t c = 0; c < num_classes_; ++c) {
            const double target = (c == labels[i] ? 1.0 - eps : 0.0) + eps / num_classes_;
            const double t = std::tanh(raw[c] / alpha);
            const double dz = (p[c] - target) * (1.0 - t * t);
            gb[c] += dz;
            for (std::size_t l = 0; l < embedding_dim_; ++l) gw[c][l] += dz * x[l];
        }
    }
    const double inv_n = 1.0 / static_cast<double>(embeddings.size());
    std::vector<double> flat;
    flat.reserve(num_classes_ * (embedding_dim_ + 1));
    for (std::size_t c = 0; c < num_classes_; ++c) {
        for (std::size_t l = 0; l < embedding_dim_; ++l) {
            flat.push_back(gw[c][l] * inv_n + cfg_.weight_decay * weights_[c][l]);
        }
    }
    for (std::size_t c = 0; c < num_classes_; ++c) flat.push_back(gb[c] * inv_n);
    return flat;
}

std::vector<double> SoftmaxHead::sample_losses(const Embeddings& embeddings, const Labels& labels,
                                               const std::vector<std::size_t>& indices) const {
    std::vector<double> losses;
    losses.reserve(indices.size());
    for (std::size_t i : indices) {
        const auto p = softmax(clamped_logits(embeddings[i]));
        losses.push_back(-std::log(std::max(p[labels[i]], kPosteriorFloor)));
    }
    return losses;
}

void SoftmaxHead::gd_step(const Embeddings& embeddings, const Labels& labels,
                          const std::vector<std::size_t>& batch) {
    if (batch.empty()) return;
    const double eps = cfg_.label_smoothing;
    const double alpha = cfg_.logit_clamp_alpha;
    std::vector<std::vector<double>> gw(num_classes_, std::vector<double>(embedding_dim_, 0.0));
    std::vector<double> gb(num_classes_, 0.0);
    for (std::size_t i : batch) {
        const auto& x = embeddings[i];
        std::vector<double> raw(num_classes_, 0.0);
        for (std::size_t c = 0; c < num_classes_; ++c) {
            double v = bias_[c];
            for (std::size_t l = 0; l < embedding_dim_; ++l) v += weights_[c][l] * x[l];
            raw[c] = v;
        }
        std::vector<double> clamped(num_classes_);
        for (std::size_t c = 0; c < num_classes_; ++c) clamped[c] = alpha * std::tanh(raw[c] / alpha);
        const auto p = softmax(clamped);
        for (std::size_t c = 0; c < num_classes_; ++c) {
            const double target = (c == labels[i] ? 1.0 - eps : 0.0) + eps / num_classes_;
            const double t = std::tanh(raw[c] / alpha);
            const double dz = (p[c] - target) * (1.0 - t * t);
            gb[c] += dz;
            for (std::size_t l = 0; l < embedding_dim_; ++l) gw[c][l] += dz * x[l];
        }
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const double lr = cfg_.learning_rate;
    for (std::size_t c = 0; c < num_classes_; ++c) {
        for (std::size_t l = 0; l < embedding_dim_; ++l) {
            weights_[c][l] -= lr * (gw[c][l] * inv_b + cfg_.weight_decay * weights_[c][l]);
        }
        bias_[c] -= lr * gb[c] * inv_b;
    }
}

void SoftmaxHead::train(const Embeddings& embeddings, const Labels& labels, std::size_t epochs,
                        Rng& rng) {
    if (epochs == 0) return;
    validate_training_inputs(embeddings, labels, num_classes_);
    std::vector<std::size_t> order(embeddings.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::size_t> batch;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
            const std::size_t stop = std::min(start + cfg_.batch_size, order.size());
            batch.assign(order.begin() + start, order.begin() + stop);
            gd_step(embeddings, labels, batch);
        }
        epoch_losses_.push_back(objective(embeddings, labels));
    }
}

std::vector<double> SoftmaxHead::flat_params() const {
    std::vector<double> flat;
    flat.reserve(num_classes_ * (embedding_dim_ + 1));
    for (const auto& w : weights_) flat.insert(flat.end(), w.begin(), w.end());
    flat.insert(flat.end(), bias_.begin(), bias_.end());
    return flat;
}

void SoftmaxHead::set_flat_params(const std::vector<double>& params) {
    if (params.size() != num_classes_ * (embedding_dim_ + 1)) {
        throw std::invalid_argument("set_flat_params: wrong parameter count");
    }
    std::size_t k = 0;
    for (auto& w : weights_) {
        for (double& v : w) v = params[k++];
    }
    for (double& v : bias_) v = params[k++];
}

void SoftmaxHead::save_weights_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "class";
    for (std::size_t l = 0; l < embedding_dim_; ++l) out << ",w" << l;
    out << ",bias\n";
    out.precision(17);
    for (std::size_t c = 0; c < num_classes_; ++c) {
        out << c;
        for (std::size_t l = 0; l < embedding_dim_; ++l) out << ',' << weights_[c][l];
        out << ',' << bias_[c] << '\n';
    }
}

SoftmaxHead SoftmaxHead::load_weights_csv(const std::string& path, SoftmaxHeadConfig cfg) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty weights file");
    const std::size_t dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) - 1;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != dim + 2) throw std::runtime_error(path + ": malformed weights row");
        rows.push_back(std::move(row));
    }
    SoftmaxHead head(rows.size(), dim, cfg);
    std::vector<double> flat;
    for (const auto& row : rows) flat.insert(flat.end(), row.begin() + 1, row.end() - 1);
    for (const auto& row : rows) flat.push_back(row.back());
    head.set_flat_params(flat);
    return head;
}

SoftmaxHead fit_softmax_head(const Embeddings& embeddings, const Labels& labels,
                             std::size_t num_classes, const SoftmaxHeadConfig& cfg) {
    if (embeddings.empty()) throw std::invalid_argument("fit_softmax_head: empty training set");
    SoftmaxHead head(num_classes, embeddings.front().size(), cfg);
    Rng rng(cfg.seed);
    head.train(embeddings, labels, cfg.epochs, rng);
    return head;
}

std::uint64_t member_seed(std::uint64_t seed, std::size_t member) {
    return mix_seed(mix_seed(seed, kMemberStream), member);
}

void CoTeachingConfig::validate() const {
    head.validate();
    if (drop_rate < 0.0 || drop_rate >= 1.0) {
        throw std::invalid_argument("CoTeachingConfig: drop_rate must be in [0,1)");
    }
}

PosteriorMatrix CoTeachingPair::predict_all(const Embeddings& embeddings) const {
    PosteriorMatrix out;
    out.rows.reserve(embeddings.size());
    for (const auto& x : embeddings) {
        const auto p0 = heads[0].predict(x);
        const auto p1 = heads[1].predict(x);
        std::vector<double> mean(p0.num_classes(), 0.0);
        for (std::size_t c = 0; c < mean.size(); ++c) mean[c] = 0.5 * (p0.probs[c] + p1.probs[c]);
        out.rows.emplace_back(std::move(mean));
    }
    return out;
}

namespace {

// Keep the `keep` smallest-loss members of `batch` under the peer head,
// preserving the original batch order so that keep == batch.size() leaves
// the batch untouched.
std::vector<std::size_t> small_loss_subset(const SoftmaxHead& peer, const Embeddings& embeddings,
                                           const Labels& labels,
                                           const std::vector<std::size_t>& batch,
                                           std::size_t keep) {
    if (keep >= batch.size()) return batch;
    const auto losses = peer.sample_losses(embeddings, labels, batch);
    std::vector<std::size_t> pos(batch.size());
    std::iota(pos.begin(), pos.end(), std::size_t{0});
    std::stable_sort(pos.begin(), pos.end(),
                     [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
    pos.resize(keep);
    std::sort(pos.begin(), pos.end());
    std::vector<std::size_t> kept;
    kept.reserve(keep);
    for (std::size_t p : pos) kept.push_back(batch[p]);
    return kept;
}

}  // namespace

void co_teaching_train(CoTeachingPair& pair, const Embeddings& embeddings, const Labels& labels,
                       const CoTeachingConfig& cfg, std::size_t epochs, std::size_t warmup_epochs,
                       std::array<Rng, 2>& rngs) {
    if (epochs == 0) return;
    const std::size_t n = embeddings.size();
    const std::size_t batch_size = cfg.head.batch_size;
    std::array<std::vector<std::size_t>, 2> orders;
    for (auto& order : orders) {
        order.resize(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
    }
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        rngs[0].shuffle(orders[0]);
        rngs[1].shuffle(orders[1]);
        const bool selecting = epoch >= warmup_epochs && cfg.drop_rate > 0.0;
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t stop = std::min(start + batch_size, n);
            std::array<std::vector<std::size_t>, 2> batches;
            for (std::size_t m = 0; m < 2; ++m) {
                batches[m].assign(orders[m].begin() + start, orders[m].begin() + stop);
                if (selecting) {
                    const std::size_t size = batches[m].size();
                    const std::size_t drop =
                        static_cast<std::size_t>(std::floor(cfg.drop_rate * size + 1e-12));
                    const std::size_t keep = std::max<std::size_t>(1, size - drop);
                    batches[m] = small_loss_subset(pair.heads[1 - m], embeddings, labels,
                                                   batches[m], keep);
                }
            }
            pair.heads[0].gd_step(embeddings, labels, batches[0]);
            pair.heads[1].gd_step(embeddings, labels, batches[1]);
        }
    }
}

CoTeachingPair fit_co_teaching(const Embeddings& embeddings, const Labels& labels,
                               std::size_t num_classes, const CoTeachingConfig& cfg) {
    cfg.validate();
    if (embeddings.empty()) throw std::invalid_argument("fit_co_teaching: empty training set");
    validate_training_inputs(embeddings, labels, num_classes);
    const std::size_t dim = embeddings.front().size();
    CoTeachingPair pair;
    std::array<Rng, 2> rngs{Rng(member_seed(cfg.seed, 0)), Rng(member_seed(cfg.seed, 1))};
    for (std::size_t m = 0; m < 2; ++m) {
        SoftmaxHeadConfig head_cfg = cfg.head;
        head_cfg.seed = member_seed(cfg.seed, m);
        pair.heads[m] = SoftmaxHead(num_classes, dim, head_cfg);
    }
    co_teaching_train(pair, embeddings, labels, cfg, cfg.head.epochs, cfg.warmup_epochs, rngs);
    return pair;
}

void EnsembleConfig::validate() const {
    head.validate();
    if (members < 2) throw std::invalid_argument("EnsembleConfig: need >= 2 members");
}

std::vector<SoftmaxHead> fit_ensemble_with_seeds(const Embeddings& embeddings, const Labels& labels,
                                                 std::size_t num_classes,
                                                 const SoftmaxHeadConfig& head,
                                                 const std::vector<std::uint64_t>& seeds,
                                                 bool bootstrap) {
    if (embeddings.empty()) throw std::invalid_argument("fit_ensemble: empty training set");
    std::vector<SoftmaxHead> members;
    members.reserve(seeds.size());
    for (std::uint64_t seed : seeds) {
        SoftmaxHeadConfig cfg = head;
        cfg.seed = seed;
        if (bootstrap) {
            Rng boot(mix_seed(seed, kBootstrapStream));
            Embeddings resampled_x;
            Labels resampled_y;
            resampled_x.reserve(embeddings.size());
            resampled_y.reserve(labels.size());
            for (std::size_t i = 0; i < embeddings.size(); ++i) {
                const std::size_t j = static_cast<std::size_t>(boot.uniform_below(embeddings.size()));
                resampled_x.push_back(embeddings[j]);
                resampled_y.push_back(labels[j]);
            }
            members.push_back(fit_softmax_head(resampled_x, resampled_y, num_classes, cfg));
        } else {
            members.push_back(fit_softmax_head(embeddings, labels, num_classes, cfg));
        }
    }
    return members;
}

std::vector<SoftmaxHead> fit_ensemble(const Embeddings& embeddings, const Labels& labels,
                                      std::size_t num_classes, const EnsembleConfig& cfg) {
    cfg.validate();
    std::vector<std::uint64_t> seeds;
    seeds.reserve(cfg.members);
    for (std::size_t m = 0; m < cfg.members; ++m) seeds.push_back(member_seed(cfg.seed, m));
    return fit_ensemble_with_seeds(embeddings, labels, num_classes, cfg.head, seeds, cfg.bootstrap);
}

}  // namespace relabel
