#pragma once
// Training loop: cross-entropy objective, optional virtual adversarial
// training regularizer, adaptive-moment optimizer with decoupled weight
// decay, per-epoch dev evaluation with best-checkpoint retention.
//
// VAT inner maximization uses a one-step power approximation in input
// embedding space: probe a random direction at scale xi, take the gradient of
// CE(f(x), f(x + probe)) with respect to the probe offset (clean prediction
// held constant) and rescale it to norm epsilon. The total objective is
// CE(f(x), y) + alpha * CE(f(x), f(x + delta)) with a stop-gradient on the
// first CE argument of the VAT term.

#include <atomic>
#include <cmath>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "kear/encoder.hpp"

namespace kear {

struct TrainConfig {
    int epochs = 10;
    int batch_size = 16;
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    // Step size of the decoupled decay term; the parameter shrink per step is
    // exactly (1 - weight_decay * decay_step) regardless of the learning rate.
    double decay_step = 1e-3;
    bool vat_enabled = false;
    double vat_alpha = 1.0;
    double vat_epsilon = 1e-5;
    double vat_xi = 1e-6;
    uint64_t seed = 0;

    void validate() const {
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
        if (vat_enabled && !(vat_epsilon > 0.0)) {
            throw std::invalid_argument("TrainConfig: vat_epsilon must be > 0");
        }
        if (vat_alpha < 0.0) throw std::invalid_argument("TrainConfig: vat_alpha must be >= 0");
    }
};

struct TrainExample {
    std::string id;
    std::vector<AugmentedInput> inputs;  // one per choice
    std::optional<int> answer;
};

struct QuestionResult {
    std::string id;
    ChoiceDistribution dist;
    int predicted = 0;
    bool correct = false;
};

struct EvalReport {
    double accuracy = 0.0;
    std::vector<QuestionResult> per_question;
};

inline constexpr double kCeFloor = 1e-12;

inline std::atomic<long>& ce_clamp_counter() {
    static std::atomic<long> counter{0};
    return counter;
}

inline long ce_clamp_count() { return ce_clamp_counter().load(); }
inline void reset_ce_clamp_count() { ce_clamp_counter().store(0); }

// -ln(pred[y]), clamped at the documented floor rather than reaching infinity.
inline double ce_loss(const ChoiceDistribution& pred, int y) {
    if (y < 0 || y >= static_cast<int>(pred.probs.size())) {
        throw std::invalid_argument("ce_loss: answer index out of range");
    }
    double p = pred.probs[static_cast<size_t>(y)];
    if (p < kCeFloor) {
        ++ce_clamp_counter();
        p = kCeFloor;
    }
    return -std::log(p);
}

// CE(p, q) = -sum_i p_i ln q_i, with the same floor on q.
inline double cross_entropy(const std::vector<double>& p, const std::vector<double>& q) {
    double total = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        double qi = q[i];
        if (qi < kCeFloor) {
            ++ce_clamp_counter();
            qi = kCeFloor;
        }
        total -= p[i] * std::log(qi);
    }
    return total;
}

inline double entropy(const std::vector<double>& p) { return cross_entropy(p, p); }

struct VatPerturbation {
    std::vector<MatrixXd> deltas;  // one per choice, same shape as the embeddings

    double norm() const {
        double sq = 0.0;
        for (const auto& d : deltas) sq += d.squaredNorm();
        return std::sqrt(sq);
    }
};

namespace detail {

inline std::vector<double> choice_logits(const std::vector<ForwardCache>& caches) {
    std::vector<double> logits;
    logits.reserve(caches.size());
    for (const auto& c : caches) logits.push_back(c.logit);
    return logits;
}

// Backward of a per-question loss through every choice sequence given
// d(loss)/d(logit_i); scatters embedding gradients via the token ids.
inline void backward_question(const std::vector<ForwardCache>& caches,
                              const std::vector<AugmentedInput>& inputs,
                              const ModelParams& params, const TransformerConfig& cfg,
                              const std::vector<double>& d_logits, ModelParams& grads,
                              std::vector<MatrixXd>* d_embeddings = nullptr) {
    if (d_embeddings) d_embeddings->resize(caches.size());
    for (size_t i = 0; i < caches.size(); ++i) {
        MatrixXd d_x;
        backward_embedded(caches[i], params, cfg, d_logits[i], grads, &d_x);
        scatter_embedding_grads(inputs[i], d_x, grads);
        if (d_embeddings) (*d_embeddings)[i] = std::move(d_x);
    }
}

}  // namespace detail

// One-step power approximation of the worst-case direction. Returns delta with
// ||delta||_2 = epsilon (zero when the probe gradient vanishes).
inline VatPerturbation vat_perturbation(const TrainExample& example, const ModelParams& params,
                                        const TransformerConfig& cfg, const TrainConfig& tcfg,
                                        Rng& rng) {
    if (!tcfg.vat_enabled) throw std::logic_error("vat_perturbation: VAT disabled");
    size_t n = example.inputs.size();

    std::vector<MatrixXd> clean_x;
    std::vector<ForwardCache> clean;
    clean_x.reserve(n);
    clean.reserve(n);
    for (const auto& input : example.inputs) {
        clean_x.push_back(embed_input(input, params, cfg));
        clean.push_back(forward_embedded(clean_x.back(),
                                         std::vector<uint8_t>(input.token_ids.size(), 1), params,
                                         cfg));
    }
    std::vector<double> p = softmax(detail::choice_logits(clean));

    // isotropic random direction, normalized over all choice sequences jointly
    std::vector<MatrixXd> u(n);
    double u_norm_sq = 0.0;
    for (size_t i = 0; i < n; ++i) {
        u[i].resize(clean_x[i].rows(), clean_x[i].cols());
        for (Eigen::Index k = 0; k < u[i].size(); ++k) u[i].data()[k] = rng.normal();
        u_norm_sq += u[i].squaredNorm();
    }
    double u_norm = std::sqrt(u_norm_sq);
    if (u_norm == 0.0) return VatPerturbation{std::vector<MatrixXd>(n)};

    std::vector<ForwardCache> probed;
    probed.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        MatrixXd x = clean_x[i] + (tcfg.vat_xi / u_norm) * u[i];
        probed.push_back(forward_embedded(std::move(x),
                                          std::vector<uint8_t>(example.inputs[i].token_ids.size(), 1),
                                          params, cfg));
    }
    std::vector<double> q = softmax(detail::choice_logits(probed));

    // d CE(p_const, softmax(z)) / dz = q - p
    std::vector<double> d_logits(n);
    for (size_t i = 0; i < n; ++i) d_logits[i] = q[i] - p[i];

    VatPerturbation vp;
    vp.deltas.resize(n);
    ModelParams scratch = ModelParams::zeros(cfg);
    double g_norm_sq = 0.0;
    for (size_t i = 0; i < n; ++i) {
        backward_embedded(probed[i], params, cfg, d_logits[i], scratch, &vp.deltas[i]);
        g_norm_sq += vp.deltas[i].squaredNorm();
    }
    double g_norm = std::sqrt(g_norm_sq);
    if (!std::isfinite(g_norm)) throw std::runtime_error("vat_perturbation: non-finite gradient");
    if (g_norm == 0.0) {
        for (auto& d : vp.deltas) d.setZero();
        return vp;
    }
    for (auto& d : vp.deltas) d *= tcfg.vat_epsilon / g_norm;
    return vp;
}

// CE(f(x), f(x + delta)) with the clean prediction treated as constant.
inline double vat_loss(const TrainExample& example, const VatPerturbation& delta,
                       const ModelParams& params, const TransformerConfig& cfg) {
    size_t n = example.inputs.size();
    std::vector<double> clean_logits, perturbed_logits;
    for (size_t i = 0; i < n; ++i) {
        MatrixXd x = embed_input(example.inputs[i], params, cfg);
        std::vector<uint8_t> mask(example.inputs[i].token_ids.size(), 1);
        clean_logits.push_back(forward_embedded(x, mask, params, cfg).logit);
        MatrixXd xp = delta.deltas[i].size() > 0 ? MatrixXd(x + delta.deltas[i]) : x;
        perturbed_logits.push_back(forward_embedded(std::move(xp), mask, params, cfg).logit);
    }
    return cross_entropy(softmax(clean_logits), softmax(perturbed_logits));
}

// Adaptive-moment optimizer with decoupled weight decay:
//   theta <- theta * (1 - weight_decay * decay_step)
//            - learning_rate * m_hat / (sqrt(v_hat) + eps)
class AdamW {
  public:
    AdamW(const TransformerConfig& cfg, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8)
        : m_(ModelParams::zeros(cfg)), v_(ModelParams::zeros(cfg)), beta1_(beta1), beta2_(beta2),
          eps_(eps) {}

    void update(ModelParams& params, ModelParams& grads, const TrainConfig& cfg) {
        ++step_;
        double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
        double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
        auto p = params.tensors();
        auto g = grads.tensors();
        auto m = m_.tensors();
        auto v = v_.tensors();
        double shrink = 1.0 - cfg.weight_decay * cfg.decay_step;
        for (size_t t = 0; t < p.size(); ++t) {
            for (size_t i = 0; i < p[t].size; ++i) {
                double grad = g[t].data[i];
                double mi = m[t].data[i] = beta1_ * m[t].data[i] + (1.0 - beta1_) * grad;
                double vi = v[t].data[i] = beta2_ * v[t].data[i] + (1.0 - beta2_) * grad * grad;
                double update = cfg.learning_rate * (mi / bc1) / (std::sqrt(vi / bc2) + eps_);
                double value = p[t].data[i];
                if (cfg.weight_decay != 0.0) value *= shrink;
                if (cfg.learning_rate != 0.0) value -= update;
                p[t].data[i] = value;
            }
        }
    }

    long step() const { return step_; }

  private:
    ModelParams m_, v_;
    double beta1_, beta2_, eps_;
    long step_ = 0;
};

// argmax prediction per question, ties to the lowest index.
inline EvalReport evaluate(const std::vector<TrainExample>& data, const ModelParams& params,
                           const TransformerConfig& cfg) {
    if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
    EvalReport report;
    long correct = 0;
    for (const auto& ex : data) {
        if (!ex.answer) throw std::runtime_error("evaluate: question " + ex.id + " has no answer");
        QuestionResult r;
        r.id = ex.id;
        r.dist = predict(ex.inputs, params, cfg);
        r.predicted = r.dist.argmax();
        r.correct = r.predicted == *ex.answer;
        if (r.correct) ++correct;
        report.per_question.push_back(std::move(r));
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return report;
}

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double dev_accuracy = 0.0;
};

struct TrainResult {
    ModelParams best_params;
    EvalReport best_report;
    int best_epoch = 0;
    std::vector<EpochLog> epochs;
};

inline TrainResult train(const std::vector<TrainExample>& train_data,
                         const std::vector<TrainExample>& dev_data, ModelParams params,
                         const TransformerConfig& cfg, const TrainConfig& tcfg,
                         std::ostream* log = nullptr) {
    if (train_data.empty()) throw std::invalid_argument("train: empty training set");
    tcfg.validate();
    for (const auto& ex : train_data) {
        if (!ex.answer) throw std::runtime_error("train: question " + ex.id + " has no answer");
    }

    Rng rng(tcfg.seed);
    AdamW optimizer(cfg);
    TrainResult result;
    result.best_params = params;
    double best_acc = -1.0;

    std::vector<size_t> order(train_data.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        long seen = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(tcfg.batch_size)) {
            size_t stop = std::min(order.size(), start + static_cast<size_t>(tcfg.batch_size));
            double inv_batch = 1.0 / static_cast<double>(stop - start);
            ModelParams grads = ModelParams::zeros(cfg);
            for (size_t bi = start; bi < stop; ++bi) {
                const TrainExample& ex = train_data[order[bi]];
                size_t n = ex.inputs.size();
                Rng* drop = cfg.dropout_rate > 0.0 ? &rng : nullptr;
                std::vector<ForwardCache> caches;
                caches.reserve(n);
                for (const auto& input : ex.inputs) {
                    caches.push_back(forward_choice_cached(input, params, cfg, drop));
                }
                std::vector<double> probs = softmax(detail::choice_logits(caches));
                double loss = ce_loss(ChoiceDistribution{probs}, *ex.answer);

                std::vector<double> d_logits(n);
                for (size_t i = 0; i < n; ++i) {
                    d_logits[i] =
                        (probs[i] - (static_cast<int>(i) == *ex.answer ? 1.0 : 0.0)) * inv_batch;
                }
                detail::backward_question(caches, ex.inputs, params, cfg, d_logits, grads);

                if (tcfg.vat_enabled && tcfg.vat_alpha > 0.0) {
                    VatPerturbation delta = vat_perturbation(ex, params, cfg, tcfg, rng);
                    std::vector<double> p_clean = probs;
                    std::vector<ForwardCache> perturbed;
                    perturbed.reserve(n);
                    for (size_t i = 0; i < n; ++i) {
                        MatrixXd x = embed_input(ex.inputs[i], params, cfg);
                        if (delta.deltas[i].size() > 0) x += delta.deltas[i];
                        perturbed.push_back(forward_embedded(
                            std::move(x), std::vector<uint8_t>(ex.inputs[i].token_ids.size(), 1),
                            params, cfg));
                    }
                    std::vector<double> q = softmax(detail::choice_logits(perturbed));
                    loss += tcfg.vat_alpha * cross_entropy(p_clean, q);
                    std::vector<double> d_vat(n);
                    for (size_t i = 0; i < n; ++i) {
                        d_vat[i] = tcfg.vat_alpha * (q[i] - p_clean[i]) * inv_batch;
                    }
                    detail::backward_question(perturbed, ex.inputs, params, cfg, d_vat, grads);
                }

                if (!std::isfinite(loss)) {
                    throw std::runtime_error("train: non-finite loss at epoch " +
                                             std::to_string(epoch) + ", question " + ex.id);
                }
                epoch_loss += loss;
                ++seen;
            }
            optimizer.update(params, grads, tcfg);
        }
        if (!params.all_finite()) {
            throw std::runtime_error("train: parameters diverged at epoch " +
                                     std::to_string(epoch));
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = epoch_loss / static_cast<double>(std::max(1L, seen));
        if (!dev_data.empty()) {
            EvalReport dev = evaluate(dev_data, params, cfg);
            entry.dev_accuracy = dev.accuracy;
            if (dev.accuracy > best_acc) {
                best_acc = dev.accuracy;
                result.best_params = params;
                result.best_report = std::move(dev);
                result.best_epoch = epoch;
            }
        } else {
            result.best_params = params;
            result.best_epoch = epoch;
        }
        result.epochs.push_back(entry);
        if (log) {
            (*log) << "epoch=" << entry.epoch << " train_loss=" << entry.train_loss
                   << " dev_acc=" << entry.dev_accuracy << "\n";
            log->flush();
        }
    }
    if (tcfg.epochs == 0) result.best_params = std::move(params);
    return result;
}

}  // namespace kear
