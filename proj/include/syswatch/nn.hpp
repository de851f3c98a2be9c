#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "syswatch/attention.hpp"
#include "syswatch/errors.hpp"
#include "syswatch/model_config.hpp"
#include "syswatch/rng.hpp"

// Encoder network internals, templated on scalar type: float for training
// and inference, double for finite-difference gradient verification. The
// attention kernel walks the mask's column ranges, so cost scales with the
// number of admitted pairs rather than C^2.
namespace syswatch::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;
template <class S>
using ColVec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

inline constexpr double kLayerNormEps = 1e-5;

template <class S>
struct LayerParams {
    Mat<S> wq, wk, wv, wo;           // d x d
    RowVec<S> bq, bk, bv, bo;        // d
    RowVec<S> ln1_gamma, ln1_beta;   // d
    Mat<S> w1;                       // d x ffn
    RowVec<S> b1;                    // ffn
    Mat<S> w2;                       // ffn x d
    RowVec<S> b2;                    // d
    RowVec<S> ln2_gamma, ln2_beta;   // d
};

template <class S>
struct TensorView {
    std::string name;
    S* data;
    Eigen::Index size;
};

// All learnable parameters, in fixed declaration order. Checkpointing, the
// optimizer and the gradient checker all iterate tensors() and rely on this
// order being stable.
template <class S>
struct NetParams {
    Mat<S> token_embed;              // V x d
    Mat<S> pos_embed;                // C x d
    std::vector<LayerParams<S>> layers;
    Mat<S> head_w;                   // d x K
    RowVec<S> head_b;                // K

    static NetParams sized(const ModelConfig& cfg) {
        NetParams p;
        const auto d = cfg.embed_dim;
        p.token_embed.setZero(cfg.vocab_size, d);
        p.pos_embed.setZero(cfg.context, d);
        p.layers.resize(static_cast<size_t>(cfg.num_layers));
        for (auto& l : p.layers) {
            l.wq.setZero(d, d);
            l.wk.setZero(d, d);
            l.wv.setZero(d, d);
            l.wo.setZero(d, d);
            l.bq.setZero(d);
            l.bk.setZero(d);
            l.bv.setZero(d);
            l.bo.setZero(d);
            l.ln1_gamma.setZero(d);
            l.ln1_beta.setZero(d);
            l.w1.setZero(d, cfg.ffn());
            l.b1.setZero(cfg.ffn());
            l.w2.setZero(cfg.ffn(), d);
            l.b2.setZero(d);
            l.ln2_gamma.setZero(d);
            l.ln2_beta.setZero(d);
        }
        p.head_w.setZero(d, cfg.num_classes);
        p.head_b.setZero(cfg.num_classes);
        return p;
    }

    std::vector<TensorView<S>> tensors() {
        std::vector<TensorView<S>> out;
        out.reserve(4 + 16 * layers.size());
        auto add = [&out](std::string name, auto& m) {
            out.push_back({std::move(name), m.data(), m.size()});
        };
        add("token_embed", token_embed);
        add("pos_embed", pos_embed);
        for (size_t i = 0; i < layers.size(); ++i) {
            auto& l = layers[i];
            const std::string prefix = "layer" + std::to_string(i) + ".";
            add(prefix + "wq", l.wq);
            add(prefix + "bq", l.bq);
            add(prefix + "wk", l.wk);
            add(prefix + "bk", l.bk);
            add(prefix + "wv", l.wv);
            add(prefix + "bv", l.bv);
            add(prefix + "wo", l.wo);
            add(prefix + "bo", l.bo);
            add(prefix + "ln1_gamma", l.ln1_gamma);
            add(prefix + "ln1_beta", l.ln1_beta);
            add(prefix + "w1", l.w1);
            add(prefix + "b1", l.b1);
            add(prefix + "w2", l.w2);
            add(prefix + "b2", l.b2);
            add(prefix + "ln2_gamma", l.ln2_gamma);
            add(prefix + "ln2_beta", l.ln2_beta);
        }
        add("head_w", head_w);
        add("head_b", head_b);
        return out;
    }

    std::vector<TensorView<const S>> tensors() const {
        auto views = const_cast<NetParams*>(this)->tensors();
        std::vector<TensorView<const S>> out;
        out.reserve(views.size());
        for (auto& v : views) out.push_back({std::move(v.name), v.data, v.size});
        return out;
    }

    Eigen::Index param_count() const {
        Eigen::Index total = 0;
        for (const auto& t : tensors()) total += t.size;
        return total;
    }

    template <class T>
    NetParams<T> cast() const {
        NetParams<T> out;
        out.token_embed = token_embed.template cast<T>();
        out.pos_embed = pos_embed.template cast<T>();
        out.layers.resize(layers.size());
        for (size_t i = 0; i < layers.size(); ++i) {
            const auto& a = layers[i];
            auto& b = out.layers[i];
            b.wq = a.wq.template cast<T>();
            b.wk = a.wk.template cast<T>();
            b.wv = a.wv.template cast<T>();
            b.wo = a.wo.template cast<T>();
            b.bq = a.bq.template cast<T>();
            b.bk = a.bk.template cast<T>();
            b.bv = a.bv.template cast<T>();
            b.bo = a.bo.template cast<T>();
            b.ln1_gamma = a.ln1_gamma.template cast<T>();
            b.ln1_beta = a.ln1_beta.template cast<T>();
            b.w1 = a.w1.template cast<T>();
            b.b1 = a.b1.template cast<T>();
            b.w2 = a.w2.template cast<T>();
            b.b2 = a.b2.template cast<T>();
            b.ln2_gamma = a.ln2_gamma.template cast<T>();
            b.ln2_beta = a.ln2_beta.template cast<T>();
        }
        out.head_w = head_w.template cast<T>();
        out.head_b = head_b.template cast<T>();
        return out;
    }

    void set_zero() {
        for (auto& t : tensors()) std::fill(t.data, t.data + t.size, S(0));
    }

    void accumulate(const NetParams& other) {
        auto a = tensors();
        auto b = other.tensors();
        for (size_t i = 0; i < a.size(); ++i) {
            Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> dst(a[i].data, a[i].size);
            Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> src(b[i].data, b[i].size);
            dst += src;
        }
    }

    void scale(S factor) {
        for (auto& t : tensors()) {
            Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> m(t.data, t.size);
            m *= factor;
        }
    }

    bool all_finite() const {
        for (const auto& t : tensors()) {
            Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> m(t.data, t.size);
            if (!m.isFinite().all()) return false;
        }
        return true;
    }
};

// Dimension-scaled init: Xavier-normal linear maps, 1/sqrt(d) embeddings,
// zero biases, unit layer-norm gains. At desk-scale widths a fixed small
// constant leaves the attention logits flat and their gradients orders of
// magnitude below everything else; fan-scaled draws avoid that dead start.
// Draw order follows tensors() declaration order so a seed pins every bit.
template <class S>
NetParams<S> init_params(const ModelConfig& cfg, uint64_t seed) {
    NetParams<S> p = NetParams<S>::sized(cfg);
    Rng rng(seed);
    auto fill_normal = [&rng](auto& m, double stddev) {
        S* data = m.data();
        for (Eigen::Index i = 0; i < m.size(); ++i)
            data[i] = static_cast<S>(rng.normal() * stddev);
    };
    auto xavier = [&fill_normal](auto& m) {
        fill_normal(m, std::sqrt(2.0 / static_cast<double>(m.rows() + m.cols())));
    };
    const double embed_std = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
    fill_normal(p.token_embed, embed_std);
    fill_normal(p.pos_embed, embed_std);
    for (auto& l : p.layers) {
        xavier(l.wq);
        xavier(l.wk);
        xavier(l.wv);
        xavier(l.wo);
        xavier(l.w1);
        xavier(l.w2);
        l.ln1_gamma.setOnes();
        l.ln2_gamma.setOnes();
    }
    xavier(p.head_w);
    return p;
}

template <class S>
struct LayerCache {
    Mat<S> x_in;                       // layer input (n x d)
    Mat<S> q, k, v;                    // n x d
    std::vector<int64_t> row_offsets;  // n+1 prefix offsets into probs, per head
    std::vector<S> probs;              // H * nnz attention probabilities
    Mat<S> attn_concat;                // n x d, heads side by side
    std::vector<uint8_t> drop_attn;
    Mat<S> xhat1;                      // LN1 normalized input
    Eigen::Array<S, Eigen::Dynamic, 1> inv_std1;
    Mat<S> y1;                         // LN1 output / FFN input
    Mat<S> h_pre;                      // n x ffn, pre-activation
    Mat<S> tanh_u;                     // n x ffn, tanh term of GELU
    std::vector<uint8_t> drop_ffn;
    Mat<S> xhat2;
    Eigen::Array<S, Eigen::Dynamic, 1> inv_std2;
};

template <class S>
struct ForwardCache {
    int32_t n = 0;  // valid length
    std::vector<int32_t> ids;
    std::vector<uint8_t> drop_embed;
    std::vector<LayerCache<S>> layers;
    Mat<S> final_x;     // last layer output (n x d)
    RowVec<S> logits;   // K
};

namespace detail {

template <class S>
void apply_dropout(Mat<S>& x, std::vector<uint8_t>& mask, float rate, Rng& rng) {
    const S scale = S(1) / (S(1) - S(rate));
    mask.resize(static_cast<size_t>(x.size()));
    S* data = x.data();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const bool keep = rng.uniform() >= rate;
        mask[static_cast<size_t>(i)] = keep ? 1 : 0;
        data[i] = keep ? data[i] * scale : S(0);
    }
}

template <class S>
void dropout_backward(Mat<S>& dx, const std::vector<uint8_t>& mask, float rate) {
    if (mask.empty()) return;
    const S scale = S(1) / (S(1) - S(rate));
    S* data = dx.data();
    for (Eigen::Index i = 0; i < dx.size(); ++i)
        data[i] = mask[static_cast<size_t>(i)] ? data[i] * scale : S(0);
}

// Row-wise layer norm; stores the normalized input and 1/std for backward.
template <class S>
void layer_norm(const Mat<S>& x, const RowVec<S>& gamma, const RowVec<S>& beta,
                Mat<S>& xhat, Eigen::Array<S, Eigen::Dynamic, 1>& inv_std, Mat<S>& y) {
    const Eigen::Index n = x.rows(), d = x.cols();
    xhat.resize(n, d);
    y.resize(n, d);
    inv_std.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const S mu = x.row(i).mean();
        auto centered = x.row(i).array() - mu;
        const S var = centered.square().mean();
        const S is = S(1) / std::sqrt(var + S(kLayerNormEps));
        inv_std(i) = is;
        xhat.row(i) = centered * is;
        y.row(i) = xhat.row(i).cwiseProduct(gamma) + beta;
    }
}

template <class S>
void layer_norm_backward(const Mat<S>& dy, const Mat<S>& xhat,
                         const Eigen::Array<S, Eigen::Dynamic, 1>& inv_std,
                         const RowVec<S>& gamma, Mat<S>& dx, RowVec<S>& dgamma,
                         RowVec<S>& dbeta) {
    const Eigen::Index n = dy.rows(), d = dy.cols();
    dx.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        dgamma += dy.row(i).cwiseProduct(xhat.row(i));
        dbeta += dy.row(i);
        auto dyhat = dy.row(i).cwiseProduct(gamma).array();
        const S m1 = dyhat.mean();
        const S m2 = (dyhat * xhat.row(i).array()).mean();
        dx.row(i) = ((dyhat - m1) - xhat.row(i).array() * m2) * inv_std(i);
    }
}

inline constexpr double kGeluCoef = 0.044715;
inline constexpr double kSqrt2OverPi = 0.79788456080286535588;

// Iterates the mask row's column ranges clipped to the valid length.
template <class F>
void for_each_range(const AttentionMask& mask, int32_t row, int32_t valid_len, F&& f) {
    for (const auto& r : mask.row(row)) {
        if (r.begin >= valid_len) break;
        f(r.begin, std::min(r.end, valid_len));
    }
}

}  // namespace detail

// Forward pass over the first valid_len positions of `ids`. PAD positions are
// never materialized, so extending a window with PAD cannot change the
// output. `dropout_rng` non-null enables training-mode dropout; the cache
// retains everything backward() needs.
template <class S>
RowVec<S> forward_logits(const NetParams<S>& p, const ModelConfig& cfg,
                         const AttentionMask& mask, std::span<const int32_t> ids,
                         int32_t valid_len, Rng* dropout_rng, ForwardCache<S>& cache) {
    const int32_t d = cfg.embed_dim;
    const int32_t heads = cfg.num_heads;
    const int32_t dh = d / heads;
    const int32_t n = valid_len;
    if (n < 1 || n > cfg.context || static_cast<size_t>(cfg.context) != ids.size())
        throw InvalidConfig("window does not match model context");
    for (int32_t t = 0; t < n; ++t)
        if (ids[static_cast<size_t>(t)] < 0 || ids[static_cast<size_t>(t)] >= cfg.vocab_size)
            throw InvalidConfig("token id out of vocabulary range");

    const bool training = dropout_rng != nullptr && cfg.dropout > 0.0f;
    const S inv_sqrt_dh = S(1) / std::sqrt(S(dh));

    cache.n = n;
    cache.ids.assign(ids.begin(), ids.begin() + n);
    cache.layers.resize(static_cast<size_t>(cfg.num_layers));
    cache.drop_embed.clear();

    Mat<S> x(n, d);
    for (int32_t t = 0; t < n; ++t)
        x.row(t) = p.token_embed.row(ids[static_cast<size_t>(t)]) + p.pos_embed.row(t);
    if (training) detail::apply_dropout(x, cache.drop_embed, cfg.dropout, *dropout_rng);

    ColVec<S> scores(cfg.context);
    ColVec<S> prow(cfg.context);

    for (int32_t li = 0; li < cfg.num_layers; ++li) {
        auto& lc = cache.layers[static_cast<size_t>(li)];
        const auto& lp = p.layers[static_cast<size_t>(li)];
        lc.x_in = x;
        lc.drop_attn.clear();
        lc.drop_ffn.clear();

        lc.q.noalias() = x * lp.wq;
        lc.q.rowwise() += lp.bq;
        lc.k.noalias() = x * lp.wk;
        lc.k.rowwise() += lp.bk;
        lc.v.noalias() = x * lp.wv;
        lc.v.rowwise() += lp.bv;

        lc.row_offsets.assign(static_cast<size_t>(n) + 1, 0);
        for (int32_t i = 0; i < n; ++i) {
            int64_t len = 0;
            detail::for_each_range(mask, i, n, [&](int32_t a, int32_t b) { len += b - a; });
            lc.row_offsets[static_cast<size_t>(i) + 1] =
                lc.row_offsets[static_cast<size_t>(i)] + len;
        }
        const int64_t nnz = lc.row_offsets[static_cast<size_t>(n)];
        lc.probs.resize(static_cast<size_t>(heads) * static_cast<size_t>(nnz));
        lc.attn_concat.setZero(n, d);

        for (int32_t h = 0; h < heads; ++h) {
            const int32_t hc = h * dh;
            S* head_probs = lc.probs.data() + static_cast<size_t>(h) * static_cast<size_t>(nnz);
            for (int32_t i = 0; i < n; ++i) {
                const int64_t row_len =
                    lc.row_offsets[static_cast<size_t>(i) + 1] - lc.row_offsets[static_cast<size_t>(i)];
                auto qrow = lc.q.block(i, hc, 1, dh);
                int64_t pos = 0;
                detail::for_each_range(mask, i, n, [&](int32_t a, int32_t b) {
                    const int32_t len = b - a;
                    scores.segment(pos, len).noalias() =
                        lc.k.block(a, hc, len, dh) * qrow.transpose();
                    pos += len;
                });
                auto srow = scores.head(row_len).array();
                srow *= inv_sqrt_dh;
                const S smax = srow.maxCoeff();
                prow.head(row_len).array() = (srow - smax).exp();
                const S z = prow.head(row_len).sum();
                prow.head(row_len) /= z;
                S* dst = head_probs + lc.row_offsets[static_cast<size_t>(i)];
                Eigen::Map<ColVec<S>>(dst, row_len) = prow.head(row_len);

                pos = 0;
                detail::for_each_range(mask, i, n, [&](int32_t a, int32_t b) {
                    const int32_t len = b - a;
                    lc.attn_concat.block(i, hc, 1, dh).noalias() +=
                        Eigen::Map<const ColVec<S>>(dst + pos, len).transpose() *
                        lc.v.block(a, hc, len, dh);
                    pos += len;
                });
            }
        }

        Mat<S> attn_out;
        attn_out.noalias() = lc.attn_concat * lp.wo;
        attn_out.rowwise() += lp.bo;
        if (training) detail::apply_dropout(attn_out, lc.drop_attn, cfg.dropout, *dropout_rng);
        attn_out += x;  // residual
        detail::layer_norm(attn_out, lp.ln1_gamma, lp.ln1_beta, lc.xhat1, lc.inv_std1, lc.y1);

        lc.h_pre.noalias() = lc.y1 * lp.w1;
        lc.h_pre.rowwise() += lp.b1;
        lc.tanh_u = (S(detail::kSqrt2OverPi) *
                     (lc.h_pre.array() + S(detail::kGeluCoef) * lc.h_pre.array().cube()))
                        .tanh()
                        .matrix();
        Mat<S> ffn_out;
        ffn_out.noalias() =
            (S(0.5) * lc.h_pre.array() * (S(1) + lc.tanh_u.array())).matrix() * lp.w2;
        ffn_out.rowwise() += lp.b2;
        if (training) detail::apply_dropout(ffn_out, lc.drop_ffn, cfg.dropout, *dropout_rng);
        ffn_out += lc.y1;  // residual
        detail::layer_norm(ffn_out, lp.ln2_gamma, lp.ln2_beta, lc.xhat2, lc.inv_std2, x);
    }

    cache.final_x = x;
    cache.logits.noalias() = x.row(0) * p.head_w;
    cache.logits += p.head_b;
    if (!cache.logits.allFinite())
        throw NumericalFault("non-finite logits in forward pass");
    return cache.logits;
}

// Backpropagates d(loss)/d(logits) through the cached forward pass,
// accumulating into `grads` (pre-sized, not cleared here).
template <class S>
void backward(const NetParams<S>& p, const ModelConfig& cfg, const AttentionMask& mask,
              const ForwardCache<S>& cache, const RowVec<S>& dlogits, NetParams<S>& grads) {
    const int32_t d = cfg.embed_dim;
    const int32_t heads = cfg.num_heads;
    const int32_t dh = d / heads;
    const int32_t n = cache.n;
    const S inv_sqrt_dh = S(1) / std::sqrt(S(dh));

    grads.head_w.noalias() += cache.final_x.row(0).transpose() * dlogits;
    grads.head_b += dlogits;

    Mat<S> dx = Mat<S>::Zero(n, d);
    dx.row(0).noalias() = dlogits * p.head_w.transpose();

    Mat<S> dres, dy1, dff, dh_act, dh_pre, dattn, dconcat, dq, dk, dv, dxl;
    ColVec<S> dp(cfg.context), ds(cfg.context);

    for (int32_t li = cfg.num_layers - 1; li >= 0; --li) {
        const auto& lc = cache.layers[static_cast<size_t>(li)];
        const auto& lp = p.layers[static_cast<size_t>(li)];
        auto& lg = grads.layers[static_cast<size_t>(li)];
        const int64_t nnz = lc.row_offsets[static_cast<size_t>(n)];

        // LN2 backward: dx is the gradient at this layer's output.
        detail::layer_norm_backward(dx, lc.xhat2, lc.inv_std2, lp.ln2_gamma, dres,
                                    lg.ln2_gamma, lg.ln2_beta);
        dy1 = dres;  // residual branch
        dff = dres;
        detail::dropout_backward(dff, lc.drop_ffn, cfg.dropout);

        auto h_act = (S(0.5) * lc.h_pre.array() * (S(1) + lc.tanh_u.array())).matrix();
        lg.w2.noalias() += h_act.transpose() * dff;
        lg.b2 += dff.colwise().sum();
        dh_act.noalias() = dff * lp.w2.transpose();

        // GELU'(x) with u = sqrt(2/pi) (x + c x^3), t = tanh(u):
        // 0.5 (1 + t) + 0.5 x (1 - t^2) sqrt(2/pi) (1 + 3 c x^2)
        dh_pre = (dh_act.array() *
                  (S(0.5) * (S(1) + lc.tanh_u.array()) +
                   S(0.5) * lc.h_pre.array() * (S(1) - lc.tanh_u.array().square()) *
                       S(detail::kSqrt2OverPi) *
                       (S(1) + S(3.0 * detail::kGeluCoef) * lc.h_pre.array().square())))
                     .matrix();

        lg.w1.noalias() += lc.y1.transpose() * dh_pre;
        lg.b1 += dh_pre.colwise().sum();
        dy1.noalias() += dh_pre * lp.w1.transpose();

        detail::layer_norm_backward(dy1, lc.xhat1, lc.inv_std1, lp.ln1_gamma, dres,
                                    lg.ln1_gamma, lg.ln1_beta);
        dxl = dres;  // residual branch into the layer input
        dattn = dres;
        detail::dropout_backward(dattn, lc.drop_attn, cfg.dropout);

        lg.wo.noalias() += lc.attn_concat.transpose() * dattn;
        lg.bo += dattn.colwise().sum();
        dconcat.noalias() = dattn * lp.wo.transpose();

        dq.setZero(n, d);
        dk.setZero(n, d);
        dv.setZero(n, d);
        for (int32_t h = 0; h < heads; ++h) {
            const int32_t hc = h * dh;
            const S* head_probs =
                lc.probs.data() + static_cast<size_t>(h) * static_cast<size_t>(nnz);
            for (int32_t i = 0; i < n; ++i) {
                const int64_t off = lc.row_offsets[static_cast<size_t>(i)];
                const int64_t row_len = lc.row_offsets[static_cast<size_t>(i) + 1] - off;
                Eigen::Map<const ColVec<S>> prow(head_probs + off, row_len);
                auto dout = dconcat.block(i, hc, 1, dh);

                int64_t pos = 0;
                detail::for_each_range(mask, i, n, [&](int32_t a, int32_t b) {
                    const int32_t len = b - a;
                    dp.segment(pos, len).noalias() = lc.v.block(a, hc, len, dh) * dout.transpose();
                    dv.block(a, hc, len, dh).noalias() += prow.segment(pos, len) * dout;
                    pos += len;
                });
                const S delta = prow.dot(dp.head(row_len));
                ds.head(row_len) =
                    (prow.array() * (dp.head(row_len).array() - delta)) * inv_sqrt_dh;

                pos = 0;
                detail::for_each_range(mask, i, n, [&](int32_t a, int32_t b) {
                    const int32_t len = b - a;
                    dq.block(i, hc, 1, dh).noalias() +=
                        ds.segment(pos, len).transpose() * lc.k.block(a, hc, len, dh);
                    dk.block(a, hc, len, dh).noalias() +=
                        ds.segment(pos, len) * lc.q.block(i, hc, 1, dh);
                    pos += len;
                });
            }
        }

        lg.wq.noalias() += lc.x_in.transpose() * dq;
        lg.bq += dq.colwise().sum();
        lg.wk.noalias() += lc.x_in.transpose() * dk;
        lg.bk += dk.colwise().sum();
        lg.wv.noalias() += lc.x_in.transpose() * dv;
        lg.bv += dv.colwise().sum();

        dxl.noalias() += dq * lp.wq.transpose();
        dxl.noalias() += dk * lp.wk.transpose();
        dxl.noalias() += dv * lp.wv.transpose();
        dx = dxl;
    }

    detail::dropout_backward(dx, cache.drop_embed, cfg.dropout);
    grads.pos_embed.topRows(n) += dx;
    for (int32_t t = 0; t < n; ++t)
        grads.token_embed.row(cache.ids[static_cast<size_t>(t)]) += dx.row(t);
}

}  // namespace syswatch::nn
