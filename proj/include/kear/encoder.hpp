#pragma once
// Small transformer encoder scoring one (question, choice, knowledge) sequence
// with a [CLS] scalar head. External attention is realized purely at the input
// level, so this is an ordinary self-attention encoder over [X; K].
//
// Blocks are post-layer-norm residuals with a two-layer GELU feedforward.
// Attention uses scale 1/sqrt(d/h); with h = 1 this degenerates to the plain
// single-head formulation. Everything runs in double precision and the
// backward pass is exact reverse-mode differentiation, which is what makes the
// finite-difference checks meaningful.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "kear/assembler.hpp"
#include "kear/common.hpp"

namespace kear {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr int kCheckpointFormatVersion = 1;

struct TransformerConfig {
    int num_layers = 2;
    int hidden_dim = 32;
    int num_heads = 2;
    int vocab_size = 0;
    int max_len = 512;
    int feedforward_dim = 64;
    double dropout_rate = 0.0;

    void validate() const {
        if (num_layers < 1 || hidden_dim < 1 || num_heads < 1 || vocab_size < 1 ||
            max_len < 1 || feedforward_dim < 1) {
            throw std::invalid_argument("TransformerConfig: all dimensions must be positive");
        }
        if (hidden_dim % num_heads != 0) {
            throw std::invalid_argument("TransformerConfig: hidden_dim not divisible by num_heads");
        }
        if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
            throw std::invalid_argument("TransformerConfig: dropout_rate must be in [0, 1)");
        }
    }
};

struct LayerParams {
    MatrixXd w_q, w_k, w_v, w_o;        // d x d
    VectorXd b_q, b_k, b_v, b_o;        // d
    MatrixXd w_ff1;                     // d x ff
    VectorXd b_ff1;                     // ff
    MatrixXd w_ff2;                     // ff x d
    VectorXd b_ff2;                     // d
    VectorXd ln1_scale, ln1_offset;     // d
    VectorXd ln2_scale, ln2_offset;     // d
};

struct TensorView {
    std::string name;
    double* data;
    size_t size;
};

struct ModelParams {
    MatrixXd token_embedding;     // vocab_size x d
    MatrixXd segment_embedding;   // 2 x d
    MatrixXd position_embedding;  // max_len x d
    std::vector<LayerParams> layers;
    VectorXd scorer_w;            // d
    double scorer_b = 0.0;

    // Initialization: symmetric uniform with scale 1/sqrt(d) for weight
    // matrices and embeddings, zeros for biases and layer-norm offsets, ones
    // for layer-norm scales. Fixed by seed.
    static ModelParams init(const TransformerConfig& cfg, uint64_t seed) {
        cfg.validate();
        Rng rng(seed);
        double scale = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
        auto uniform_fill = [&](auto& m) {
            for (Eigen::Index i = 0; i < m.size(); ++i) {
                m.data()[i] = rng.uniform(-scale, scale);
            }
        };
        ModelParams p = zeros(cfg);
        uniform_fill(p.token_embedding);
        uniform_fill(p.segment_embedding);
        uniform_fill(p.position_embedding);
        for (auto& l : p.layers) {
            uniform_fill(l.w_q);
            uniform_fill(l.w_k);
            uniform_fill(l.w_v);
            uniform_fill(l.w_o);
            uniform_fill(l.w_ff1);
            uniform_fill(l.w_ff2);
            l.ln1_scale.setOnes();
            l.ln2_scale.setOnes();
        }
        uniform_fill(p.scorer_w);
        return p;
    }

    static ModelParams zeros(const TransformerConfig& cfg) {
        cfg.validate();
        ModelParams p;
        int d = cfg.hidden_dim;
        p.token_embedding = MatrixXd::Zero(cfg.vocab_size, d);
        p.segment_embedding = MatrixXd::Zero(2, d);
        p.position_embedding = MatrixXd::Zero(cfg.max_len, d);
        p.layers.resize(cfg.num_layers);
        for (auto& l : p.layers) {
            l.w_q = MatrixXd::Zero(d, d);
            l.w_k = MatrixXd::Zero(d, d);
            l.w_v = MatrixXd::Zero(d, d);
            l.w_o = MatrixXd::Zero(d, d);
            l.b_q = VectorXd::Zero(d);
            l.b_k = VectorXd::Zero(d);
            l.b_v = VectorXd::Zero(d);
            l.b_o = VectorXd::Zero(d);
            l.w_ff1 = MatrixXd::Zero(d, cfg.feedforward_dim);
            l.b_ff1 = VectorXd::Zero(cfg.feedforward_dim);
            l.w_ff2 = MatrixXd::Zero(cfg.feedforward_dim, d);
            l.b_ff2 = VectorXd::Zero(d);
            l.ln1_scale = VectorXd::Zero(d);
            l.ln1_offset = VectorXd::Zero(d);
            l.ln2_scale = VectorXd::Zero(d);
            l.ln2_offset = VectorXd::Zero(d);
        }
        p.scorer_w = VectorXd::Zero(d);
        p.scorer_b = 0.0;
        return p;
    }

    // Flat views over every parameter, in a fixed order shared by params,
    // gradients and optimizer moments.
    std::vector<TensorView> tensors() {
        std::vector<TensorView> out;
        auto add = [&](const std::string& name, auto& m) {
            out.push_back({name, m.data(), static_cast<size_t>(m.size())});
        };
        add("token_embedding", token_embedding);
        add("segment_embedding", segment_embedding);
        add("position_embedding", position_embedding);
        for (size_t i = 0; i < layers.size(); ++i) {
            std::string prefix = "layer" + std::to_string(i) + ".";
            auto& l = layers[i];
            add(prefix + "w_q", l.w_q);
            add(prefix + "w_k", l.w_k);
            add(prefix + "w_v", l.w_v);
            add(prefix + "w_o", l.w_o);
            add(prefix + "b_q", l.b_q);
            add(prefix + "b_k", l.b_k);
            add(prefix + "b_v", l.b_v);
            add(prefix + "b_o", l.b_o);
            add(prefix + "w_ff1", l.w_ff1);
            add(prefix + "b_ff1", l.b_ff1);
            add(prefix + "w_ff2", l.w_ff2);
            add(prefix + "b_ff2", l.b_ff2);
            add(prefix + "ln1_scale", l.ln1_scale);
            add(prefix + "ln1_offset", l.ln1_offset);
            add(prefix + "ln2_scale", l.ln2_scale);
            add(prefix + "ln2_offset", l.ln2_offset);
        }
        add("scorer_w", scorer_w);
        out.push_back({"scorer_b", &scorer_b, 1});
        return out;
    }

    bool all_finite() {
        for (const auto& t : tensors()) {
            for (size_t i = 0; i < t.size; ++i) {
                if (!std::isfinite(t.data[i])) return false;
            }
        }
        return true;
    }
};

struct ChoiceDistribution {
    std::vector<double> probs;

    int argmax() const {
        int best = 0;
        for (size_t i = 1; i < probs.size(); ++i) {
            if (probs[i] > probs[static_cast<size_t>(best)]) best = static_cast<int>(i);
        }
        return best;
    }
};

inline std::vector<double> softmax(const std::vector<double>& logits) {
    double max_logit = logits[0];
    for (double v : logits) max_logit = std::max(max_logit, v);
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - max_logit);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

namespace nn {

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

inline double gelu_grad(double x) {
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

struct LayerNormCache {
    VectorXd rstd;     // per row
    MatrixXd normed;   // (x - mean) * rstd
};

inline MatrixXd layer_norm_forward(const MatrixXd& x, const VectorXd& scale,
                                   const VectorXd& offset, LayerNormCache& cache) {
    Eigen::Index l = x.rows(), d = x.cols();
    cache.rstd.resize(l);
    cache.normed.resize(l, d);
    MatrixXd out(l, d);
    for (Eigen::Index i = 0; i < l; ++i) {
        double mean = x.row(i).mean();
        double var = (x.row(i).array() - mean).square().mean();
        double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
        cache.rstd(i) = rstd;
        cache.normed.row(i) = (x.row(i).array() - mean) * rstd;
        out.row(i) = cache.normed.row(i).array() * scale.transpose().array() +
                     offset.transpose().array();
    }
    return out;
}

inline MatrixXd layer_norm_backward(const MatrixXd& d_out, const LayerNormCache& cache,
                                    const VectorXd& scale, VectorXd& d_scale,
                                    VectorXd& d_offset) {
    Eigen::Index l = d_out.rows(), d = d_out.cols();
    MatrixXd dx(l, d);
    for (Eigen::Index i = 0; i < l; ++i) {
        Eigen::ArrayXd normed = cache.normed.row(i).transpose().array();
        Eigen::ArrayXd dy = d_out.row(i).transpose().array();
        d_offset.array() += dy;
        d_scale.array() += dy * normed;
        Eigen::ArrayXd dxhat = dy * scale.array();
        double m1 = dxhat.mean();
        double m2 = (dxhat * normed).mean();
        dx.row(i) = (cache.rstd(i) * (dxhat - m1 - normed * m2)).transpose();
    }
    return dx;
}

struct AttentionCache {
    MatrixXd q, k, v;                // l x d, post projection
    std::vector<MatrixXd> probs;     // per head, l x l softmax rows
    MatrixXd concat;                 // l x d, heads concatenated
    MatrixXd out;                    // after output projection (pre-residual)
};

inline MatrixXd attention_forward(const MatrixXd& h, const LayerParams& lp,
                                  const std::vector<uint8_t>& mask,
                                  const TransformerConfig& cfg, AttentionCache& cache) {
    Eigen::Index l = h.rows();
    int d = cfg.hidden_dim;
    int heads = cfg.num_heads;
    int dk = d / heads;
    double inv_scale = 1.0 / std::sqrt(static_cast<double>(dk));

    cache.q = h * lp.w_q;
    cache.q.rowwise() += lp.b_q.transpose();
    cache.k = h * lp.w_k;
    cache.k.rowwise() += lp.b_k.transpose();
    cache.v = h * lp.w_v;
    cache.v.rowwise() += lp.b_v.transpose();

    cache.probs.assign(static_cast<size_t>(heads), MatrixXd());
    cache.concat.resize(l, d);
    for (int hd = 0; hd < heads; ++hd) {
        auto qh = cache.q.middleCols(hd * dk, dk);
        auto kh = cache.k.middleCols(hd * dk, dk);
        auto vh = cache.v.middleCols(hd * dk, dk);
        MatrixXd scores = qh * kh.transpose() * inv_scale;
        for (Eigen::Index j = 0; j < l; ++j) {
            if (!mask[static_cast<size_t>(j)]) {
                scores.col(j).setConstant(-std::numeric_limits<double>::infinity());
            }
        }
        MatrixXd& probs = cache.probs[static_cast<size_t>(hd)];
        probs.resize(l, l);
        for (Eigen::Index i = 0; i < l; ++i) {
            double row_max = scores.row(i).maxCoeff();
            if (!std::isfinite(row_max)) {
                throw std::runtime_error("attention: every key position is masked");
            }
            Eigen::ArrayXd e = (scores.row(i).array() - row_max).exp();
            probs.row(i) = e / e.sum();
        }
        cache.concat.middleCols(hd * dk, dk) = probs * vh;
    }
    cache.out = cache.concat * lp.w_o;
    cache.out.rowwise() += lp.b_o.transpose();
    return cache.out;
}

// Returns d(h) and accumulates parameter gradients; d_concat_out is the
// gradient at the attention output (post projection, pre residual).
inline MatrixXd attention_backward(const MatrixXd& h, const MatrixXd& d_out,
                                   const LayerParams& lp, const AttentionCache& cache,
                                   const TransformerConfig& cfg, LayerParams& grads) {
    int d = cfg.hidden_dim;
    int heads = cfg.num_heads;
    int dk = d / heads;
    double inv_scale = 1.0 / std::sqrt(static_cast<double>(dk));
    Eigen::Index l = h.rows();

    grads.w_o += cache.concat.transpose() * d_out;
    grads.b_o += d_out.colwise().sum().transpose();
    MatrixXd d_concat = d_out * lp.w_o.transpose();

    MatrixXd dq(l, d), dkm(l, d), dv(l, d);
    for (int hd = 0; hd < heads; ++hd) {
        auto qh = cache.q.middleCols(hd * dk, dk);
        auto kh = cache.k.middleCols(hd * dk, dk);
        auto vh = cache.v.middleCols(hd * dk, dk);
        const MatrixXd& probs = cache.probs[static_cast<size_t>(hd)];
        auto d_oh = d_concat.middleCols(hd * dk, dk);

        MatrixXd d_probs = d_oh * vh.transpose();
        dv.middleCols(hd * dk, dk) = probs.transpose() * d_oh;

        MatrixXd d_scores(l, l);
        for (Eigen::Index i = 0; i < l; ++i) {
            double dot = d_probs.row(i).dot(probs.row(i));
            d_scores.row(i) = probs.row(i).array() * (d_probs.row(i).array() - dot);
        }
        dq.middleCols(hd * dk, dk) = d_scores * kh * inv_scale;
        dkm.middleCols(hd * dk, dk) = d_scores.transpose() * qh * inv_scale;
    }

    grads.w_q += h.transpose() * dq;
    grads.b_q += dq.colwise().sum().transpose();
    grads.w_k += h.transpose() * dkm;
    grads.b_k += dkm.colwise().sum().transpose();
    grads.w_v += h.transpose() * dv;
    grads.b_v += dv.colwise().sum().transpose();

    return dq * lp.w_q.transpose() + dkm * lp.w_k.transpose() + dv * lp.w_v.transpose();
}

struct LayerCache {
    MatrixXd input;
    AttentionCache attn;
    MatrixXd attn_dropout_mask;  // empty when dropout inactive
    MatrixXd res1;
    LayerNormCache ln1;
    MatrixXd h1;
    MatrixXd ff_pre;   // l x ff
    MatrixXd ff_act;
    MatrixXd ff_out;
    MatrixXd ff_dropout_mask;
    MatrixXd res2;
    LayerNormCache ln2;
};

inline MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    MatrixXd mask(rows, cols);
    double keep_scale = 1.0 / (1.0 - rate);
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    }
    return mask;
}

inline MatrixXd layer_forward(const MatrixXd& h, const LayerParams& lp,
                              const std::vector<uint8_t>& mask, const TransformerConfig& cfg,
                              LayerCache& cache, Rng* dropout_rng) {
    cache.input = h;
    MatrixXd attn_out = attention_forward(h, lp, mask, cfg, cache.attn);
    if (dropout_rng && cfg.dropout_rate > 0.0) {
        cache.attn_dropout_mask =
            dropout_mask(attn_out.rows(), attn_out.cols(), cfg.dropout_rate, *dropout_rng);
        attn_out = attn_out.cwiseProduct(cache.attn_dropout_mask);
    }
    cache.res1 = h + attn_out;
    cache.h1 = layer_norm_forward(cache.res1, lp.ln1_scale, lp.ln1_offset, cache.ln1);

    cache.ff_pre = cache.h1 * lp.w_ff1;
    cache.ff_pre.rowwise() += lp.b_ff1.transpose();
    cache.ff_act = cache.ff_pre.unaryExpr([](double x) { return gelu(x); });
    cache.ff_out = cache.ff_act * lp.w_ff2;
    cache.ff_out.rowwise() += lp.b_ff2.transpose();
    MatrixXd ff_out = cache.ff_out;
    if (dropout_rng && cfg.dropout_rate > 0.0) {
        cache.ff_dropout_mask =
            dropout_mask(ff_out.rows(), ff_out.cols(), cfg.dropout_rate, *dropout_rng);
        ff_out = ff_out.cwiseProduct(cache.ff_dropout_mask);
    }
    cache.res2 = cache.h1 + ff_out;
    return layer_norm_forward(cache.res2, lp.ln2_scale, lp.ln2_offset, cache.ln2);
}

inline MatrixXd layer_backward(const MatrixXd& d_out, const LayerParams& lp,
                               const LayerCache& cache, const TransformerConfig& cfg,
                               LayerParams& grads) {
    MatrixXd d_res2 =
        layer_norm_backward(d_out, cache.ln2, lp.ln2_scale, grads.ln2_scale, grads.ln2_offset);
    MatrixXd d_ff_out = d_res2;
    if (cache.ff_dropout_mask.size() > 0) {
        d_ff_out = d_ff_out.cwiseProduct(cache.ff_dropout_mask);
    }
    MatrixXd d_h1 = d_res2;

    grads.w_ff2 += cache.ff_act.transpose() * d_ff_out;
    grads.b_ff2 += d_ff_out.colwise().sum().transpose();
    MatrixXd d_act = d_ff_out * lp.w_ff2.transpose();
    MatrixXd d_pre =
        d_act.cwiseProduct(cache.ff_pre.unaryExpr([](double x) { return gelu_grad(x); }));
    grads.w_ff1 += cache.h1.transpose() * d_pre;
    grads.b_ff1 += d_pre.colwise().sum().transpose();
    d_h1 += d_pre * lp.w_ff1.transpose();

    MatrixXd d_res1 =
        layer_norm_backward(d_h1, cache.ln1, lp.ln1_scale, grads.ln1_scale, grads.ln1_offset);
    MatrixXd d_attn_out = d_res1;
    if (cache.attn_dropout_mask.size() > 0) {
        d_attn_out = d_attn_out.cwiseProduct(cache.attn_dropout_mask);
    }
    MatrixXd d_h = d_res1;  // residual branch
    d_h += attention_backward(cache.input, d_attn_out, lp, cache.attn, cfg, grads);
    return d_h;
}

}  // namespace nn

// The attention sublayer as a unit: multi-head attention, residual connection
// and layer norm. Exposed separately so its contracts are directly testable.
inline MatrixXd self_attention_layer(const MatrixXd& h, const LayerParams& lp,
                                     const std::vector<uint8_t>& mask,
                                     const TransformerConfig& cfg,
                                     nn::AttentionCache* cache_out = nullptr) {
    if (h.rows() == 0) throw std::invalid_argument("self_attention_layer: empty input");
    nn::AttentionCache cache;
    MatrixXd attn = nn::attention_forward(h, lp, mask, cfg, cache);
    nn::LayerNormCache ln;
    MatrixXd out = nn::layer_norm_forward(h + attn, lp.ln1_scale, lp.ln1_offset, ln);
    if (cache_out) *cache_out = std::move(cache);
    return out;
}

struct ForwardCache {
    MatrixXd embedded;  // X fed to the first layer (token + segment + position)
    std::vector<uint8_t> mask;
    std::vector<nn::LayerCache> layers;
    VectorXd cls_final;
    double logit = 0.0;
};

inline MatrixXd embed_input(const AugmentedInput& input, const ModelParams& params,
                            const TransformerConfig& cfg) {
    int l = static_cast<int>(input.token_ids.size());
    if (l > cfg.max_len) {
        throw std::runtime_error("encoder: input length " + std::to_string(l) +
                                 " exceeds max_len " + std::to_string(cfg.max_len));
    }
    MatrixXd x(l, cfg.hidden_dim);
    for (int t = 0; t < l; ++t) {
        int tok = input.token_ids[static_cast<size_t>(t)];
        if (tok < 0 || tok >= cfg.vocab_size) {
            throw std::runtime_error("encoder: token id out of range");
        }
        x.row(t) = params.token_embedding.row(tok) +
                   params.segment_embedding.row(input.segment_ids[static_cast<size_t>(t)]) +
                   params.position_embedding.row(input.position_ids[static_cast<size_t>(t)] - 1);
    }
    return x;
}

// Runs the encoder on already-embedded input; the entry point for VAT, which
// perturbs in embedding space.
inline ForwardCache forward_embedded(MatrixXd x, std::vector<uint8_t> mask,
                                     const ModelParams& params, const TransformerConfig& cfg,
                                     Rng* dropout_rng = nullptr) {
    ForwardCache cache;
    cache.embedded = std::move(x);
    cache.mask = std::move(mask);
    cache.layers.resize(static_cast<size_t>(cfg.num_layers));
    MatrixXd h = cache.embedded;
    for (int layer = 0; layer < cfg.num_layers; ++layer) {
        h = nn::layer_forward(h, params.layers[static_cast<size_t>(layer)], cache.mask, cfg,
                              cache.layers[static_cast<size_t>(layer)], dropout_rng);
    }
    cache.cls_final = h.row(0).transpose();
    cache.logit = params.scorer_w.dot(cache.cls_final) + params.scorer_b;
    if (!std::isfinite(cache.logit)) {
        throw std::runtime_error("encoder: non-finite activations (divergence)");
    }
    return cache;
}

inline ForwardCache forward_choice_cached(const AugmentedInput& input, const ModelParams& params,
                                          const TransformerConfig& cfg,
                                          Rng* dropout_rng = nullptr) {
    return forward_embedded(embed_input(input, params, cfg),
                            std::vector<uint8_t>(input.token_ids.size(), 1), params, cfg,
                            dropout_rng);
}

inline double forward_choice(const AugmentedInput& input, const ModelParams& params,
                             const TransformerConfig& cfg) {
    return forward_choice_cached(input, params, cfg).logit;
}

// Reverse-mode gradients for a single sequence given d(loss)/d(logit).
// Accumulates into grads; d_embedded, when requested, receives d(loss)/dX.
inline void backward_embedded(const ForwardCache& cache, const ModelParams& params,
                              const TransformerConfig& cfg, double d_logit, ModelParams& grads,
                              MatrixXd* d_embedded = nullptr) {
    Eigen::Index l = cache.embedded.rows();
    grads.scorer_w += d_logit * cache.cls_final;
    grads.scorer_b += d_logit;
    MatrixXd d_h = MatrixXd::Zero(l, cfg.hidden_dim);
    d_h.row(0) = d_logit * params.scorer_w.transpose();
    for (int layer = cfg.num_layers - 1; layer >= 0; --layer) {
        d_h = nn::layer_backward(d_h, params.layers[static_cast<size_t>(layer)],
                                 cache.layers[static_cast<size_t>(layer)], cfg,
                                 grads.layers[static_cast<size_t>(layer)]);
    }
    if (d_embedded) *d_embedded = std::move(d_h);
}

inline void scatter_embedding_grads(const AugmentedInput& input, const MatrixXd& d_embedded,
                                    ModelParams& grads) {
    for (Eigen::Index t = 0; t < d_embedded.rows(); ++t) {
        size_t ti = static_cast<size_t>(t);
        grads.token_embedding.row(input.token_ids[ti]) += d_embedded.row(t);
        grads.segment_embedding.row(input.segment_ids[ti]) += d_embedded.row(t);
        grads.position_embedding.row(input.position_ids[ti] - 1) += d_embedded.row(t);
    }
}

// Gradients for one sequence with respect to every parameter, embeddings
// included; optionally also with respect to the input embeddings (for VAT).
inline void backward_choice(const ForwardCache& cache, const AugmentedInput& input,
                            const ModelParams& params, const TransformerConfig& cfg,
                            double d_logit, ModelParams& grads, MatrixXd* d_inputptr = nullptr) {
    MatrixXd d_input;
    backward_embedded(cache, params, cfg, d_logit, grads, &d_input);
    scatter_embedding_grads(input, d_input, grads);
    if (d_inputptr) *d_inputptr = std::move(d_input);
}

inline ChoiceDistribution predict(const std::vector<AugmentedInput>& inputs,
                                  const ModelParams& params, const TransformerConfig& cfg) {
    if (inputs.size() < 2) throw std::invalid_argument("predict: need at least 2 choices");
    std::vector<double> logits;
    logits.reserve(inputs.size());
    for (const auto& input : inputs) logits.push_back(forward_choice(input, params, cfg));
    return ChoiceDistribution{softmax(logits)};
}

// ---- checkpointing ---------------------------------------------------------

inline void save_checkpoint(const std::string& path, const TransformerConfig& cfg,
                            const Tokenizer& tok, ModelParams& params) {
    json j;
    j["format_version"] = kCheckpointFormatVersion;
    j["config"] = {{"num_layers", cfg.num_layers},
                   {"hidden_dim", cfg.hidden_dim},
                   {"num_heads", cfg.num_heads},
                   {"vocab_size", cfg.vocab_size},
                   {"max_len", cfg.max_len},
                   {"feedforward_dim", cfg.feedforward_dim},
                   {"dropout_rate", cfg.dropout_rate}};
    j["vocab"] = tok.vocab;
    json tensors;
    for (const auto& t : params.tensors()) {
        tensors[t.name] = std::vector<double>(t.data, t.data + t.size);
    }
    j["params"] = std::move(tensors);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump() << "\n";
}

struct Checkpoint {
    TransformerConfig config;
    Tokenizer tokenizer;
    ModelParams params;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    json j = json::parse(in);
    if (!j.contains("format_version") ||
        j["format_version"].get<int>() != kCheckpointFormatVersion) {
        throw std::runtime_error("unsupported checkpoint format version in " + path);
    }
    Checkpoint cp;
    const json& c = j.at("config");
    cp.config.num_layers = c.at("num_layers").get<int>();
    cp.config.hidden_dim = c.at("hidden_dim").get<int>();
    cp.config.num_heads = c.at("num_heads").get<int>();
    cp.config.vocab_size = c.at("vocab_size").get<int>();
    cp.config.max_len = c.at("max_len").get<int>();
    cp.config.feedforward_dim = c.at("feedforward_dim").get<int>();
    cp.config.dropout_rate = c.at("dropout_rate").get<double>();
    cp.config.validate();
    cp.tokenizer.vocab = j.at("vocab").get<std::map<std::string, int>>();
    cp.params = ModelParams::zeros(cp.config);
    const json& tensors = j.at("params");
    for (auto& t : cp.params.tensors()) {
        auto values = tensors.at(t.name).get<std::vector<double>>();
        if (values.size() != t.size) {
            throw std::runtime_error("checkpoint tensor size mismatch for " + t.name);
        }
        std::copy(values.begin(), values.end(), t.data);
    }
    return cp;
}

}  // namespace kear
