#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hum/common.hpp"
#include "hum/tensor.hpp"
#include "hum/textio.hpp"

// Token-sequence encoder: learned token + position embeddings feeding post-norm
// transformer blocks (attention, add, norm, feed-forward, add, norm) and a
// final norm. The caller reads out one position's state as the sequence
// embedding. Backward passes are hand-written against cached activations; the
// math here is the substance of the project, so no autodiff library is used.

namespace hum {

enum class AttentionKind {
    causal,        // position i sees j <= i
    bidirectional, // every position sees every position
    bag            // no mixing at all: embeddings + final norm only
};

struct EncoderConfig {
    int vocab_size = 0;
    int dim = 64;
    int n_layers = 2;
    int n_heads = 4;
    int ffn_dim = 128;
    int max_len = 96;
    double init_scale = 0.02;
    AttentionKind attention = AttentionKind::causal;

    void validate() const {
        if (vocab_size <= 0) throw std::invalid_argument("EncoderConfig: vocab_size must be set");
        if (dim <= 0 || n_heads <= 0 || ffn_dim <= 0 || max_len <= 0 || n_layers < 0)
            throw std::invalid_argument("EncoderConfig: sizes must be positive");
        if (dim % n_heads != 0)
            throw std::invalid_argument("EncoderConfig: dim must be divisible by n_heads");
        if (init_scale <= 0.0) throw std::invalid_argument("EncoderConfig: init_scale must be > 0");
    }

    int head_dim() const { return dim / n_heads; }
};

template <typename Real>
struct LayerParams {
    Mat<Real> wq, wk, wv, wo;         // dim x dim
    Mat<Real> bq, bk, bv, bo;         // 1 x dim
    Mat<Real> ln1_g, ln1_b;           // 1 x dim
    Mat<Real> w1;                     // dim x ffn_dim
    Mat<Real> b1;                     // 1 x ffn_dim
    Mat<Real> w2;                     // ffn_dim x dim
    Mat<Real> b2;                     // 1 x dim
    Mat<Real> ln2_g, ln2_b;           // 1 x dim
};

template <typename Real>
struct EncoderParams {
    EncoderConfig cfg;
    Mat<Real> tok_embed; // vocab x dim
    Mat<Real> pos_embed; // max_len x dim
    std::vector<LayerParams<Real>> layers;
    Mat<Real> fin_g, fin_b; // 1 x dim

    // Stable name -> tensor registry; ordering defines the serialized layout.
    std::vector<std::pair<std::string, Mat<Real>*>> tensors() {
        std::vector<std::pair<std::string, Mat<Real>*>> out;
        out.emplace_back("tok_embed", &tok_embed);
        out.emplace_back("pos_embed", &pos_embed);
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const std::string p = "layer" + std::to_string(l) + ".";
            auto& lp = layers[l];
            out.emplace_back(p + "wq", &lp.wq);
            out.emplace_back(p + "bq", &lp.bq);
            out.emplace_back(p + "wk", &lp.wk);
            out.emplace_back(p + "bk", &lp.bk);
            out.emplace_back(p + "wv", &lp.wv);
            out.emplace_back(p + "bv", &lp.bv);
            out.emplace_back(p + "wo", &lp.wo);
            out.emplace_back(p + "bo", &lp.bo);
            out.emplace_back(p + "ln1_g", &lp.ln1_g);
            out.emplace_back(p + "ln1_b", &lp.ln1_b);
            out.emplace_back(p + "w1", &lp.w1);
            out.emplace_back(p + "b1", &lp.b1);
            out.emplace_back(p + "w2", &lp.w2);
            out.emplace_back(p + "b2", &lp.b2);
            out.emplace_back(p + "ln2_g", &lp.ln2_g);
            out.emplace_back(p + "ln2_b", &lp.ln2_b);
        }
        out.emplace_back("final_ln.g", &fin_g);
        out.emplace_back("final_ln.b", &fin_b);
        return out;
    }

    std::vector<std::pair<std::string, const Mat<Real>*>> tensors() const {
        auto mut = const_cast<EncoderParams*>(this)->tensors();
        std::vector<std::pair<std::string, const Mat<Real>*>> out;
        out.reserve(mut.size());
        for (auto& [n, m] : mut) out.emplace_back(n, m);
        return out;
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& [name, m] : tensors()) n += m->size();
        return n;
    }

    static EncoderParams zeros(const EncoderConfig& cfg) {
        cfg.validate();
        EncoderParams p;
        p.cfg = cfg;
        const auto d = static_cast<std::size_t>(cfg.dim);
        const auto f = static_cast<std::size_t>(cfg.ffn_dim);
        p.tok_embed = Mat<Real>(static_cast<std::size_t>(cfg.vocab_size), d);
        p.pos_embed = Mat<Real>(static_cast<std::size_t>(cfg.max_len), d);
        p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
        for (auto& l : p.layers) {
            l.wq = Mat<Real>(d, d);
            l.wk = Mat<Real>(d, d);
            l.wv = Mat<Real>(d, d);
            l.wo = Mat<Real>(d, d);
            l.bq = Mat<Real>(1, d);
            l.bk = Mat<Real>(1, d);
            l.bv = Mat<Real>(1, d);
            l.bo = Mat<Real>(1, d);
            l.ln1_g = Mat<Real>(1, d);
            l.ln1_b = Mat<Real>(1, d);
            l.w1 = Mat<Real>(d, f);
            l.b1 = Mat<Real>(1, f);
            l.w2 = Mat<Real>(f, d);
            l.b2 = Mat<Real>(1, d);
            l.ln2_g = Mat<Real>(1, d);
            l.ln2_b = Mat<Real>(1, d);
        }
        p.fin_g = Mat<Real>(1, d);
        p.fin_b = Mat<Real>(1, d);
        return p;
    }

    static EncoderParams init(const EncoderConfig& cfg, rng_t& rng) {
        EncoderParams p = zeros(cfg);
        fill_normal(p.tok_embed.a, cfg.init_scale, rng);
        fill_normal(p.pos_embed.a, cfg.init_scale, rng);
        for (auto& l : p.layers) {
            fill_normal(l.wq.a, cfg.init_scale, rng);
            fill_normal(l.wk.a, cfg.init_scale, rng);
            fill_normal(l.wv.a, cfg.init_scale, rng);
            fill_normal(l.wo.a, cfg.init_scale, rng);
            fill_normal(l.w1.a, cfg.init_scale, rng);
            fill_normal(l.w2.a, cfg.init_scale, rng);
            std::fill(l.ln1_g.a.begin(), l.ln1_g.a.end(), Real(1));
            std::fill(l.ln2_g.a.begin(), l.ln2_g.a.end(), Real(1));
        }
        std::fill(p.fin_g.a.begin(), p.fin_g.a.end(), Real(1));
        return p;
    }
};

constexpr double kLnEps = 1e-5;

// 0.5 x (1 + erf(x / sqrt(2))), the exact form; smooth everywhere so finite
// differences agree with the analytic derivative.
template <typename Real>
inline Real gelu(Real x) {
    const double xd = static_cast<double>(x);
    return static_cast<Real>(0.5 * xd * (1.0 + std::erf(xd * 0.7071067811865476)));
}

template <typename Real>
inline Real gelu_grad(Real x) {
    const double xd = static_cast<double>(x);
    const double cdf = 0.5 * (1.0 + std::erf(xd * 0.7071067811865476));
    const double pdf = std::exp(-0.5 * xd * xd) * 0.3989422804014327;
    return static_cast<Real>(cdf + xd * pdf);
}

template <typename Real>
struct LnCache {
    Mat<Real> xhat;          // rows x dim
    std::vector<Real> rstd;  // per row
};

template <typename Real>
struct EncoderLayerCache {
    Mat<Real> xin;                 // layer input
    Mat<Real> q, k, v;             // L x dim
    std::vector<Mat<Real>> att;    // per head, L x L row-softmax weights
    Mat<Real> ctx;                 // L x dim, heads concatenated, before wo
    Mat<Real> res1;                // xin + attention output
    LnCache<Real> ln1;
    Mat<Real> ln1_out;
    Mat<Real> h1;                  // L x ffn, pre-activation
    Mat<Real> g1;                  // gelu(h1)
    Mat<Real> res2;                // ln1_out + ffn output
    LnCache<Real> ln2;
    Mat<Real> out;
};

template <typename Real>
struct EncoderCache {
    std::vector<int> ids;
    int readout = 0;
    Mat<Real> x0; // embeddings
    std::vector<EncoderLayerCache<Real>> layers;
    LnCache<Real> fin;
    Mat<Real> fin_out;
};

namespace detail {

// y = g * (x - mean) / sqrt(var + eps) + b, row-wise.
template <typename Real>
void layer_norm(const Mat<Real>& x, const Mat<Real>& g, const Mat<Real>& b, Mat<Real>& y,
                LnCache<Real>& cache) {
    const std::size_t rows = x.rows, d = x.cols;
    cache.xhat = Mat<Real>(rows, d);
    cache.rstd.assign(rows, Real(0));
    y = Mat<Real>(rows, d);
    for (std::size_t i = 0; i < rows; ++i) {
        const Real* xr = x.row(i);
        double mean = 0;
        for (std::size_t j = 0; j < d; ++j) mean += xr[j];
        mean /= static_cast<double>(d);
        double var = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = xr[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double rstd = 1.0 / std::sqrt(var + kLnEps);
        cache.rstd[i] = static_cast<Real>(rstd);
        Real* xh = cache.xhat.row(i);
        Real* yr = y.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            xh[j] = static_cast<Real>((xr[j] - mean) * rstd);
            yr[j] = g.a[j] * xh[j] + b.a[j];
        }
    }
}

template <typename Real>
void layer_norm_backward(const Mat<Real>& dy, const Mat<Real>& g, const LnCache<Real>& cache,
                         Mat<Real>& dx, Mat<Real>& dg, Mat<Real>& db) {
    const std::size_t rows = dy.rows, d = dy.cols;
    for (std::size_t i = 0; i < rows; ++i) {
        const Real* dyr = dy.row(i);
        const Real* xh = cache.xhat.row(i);
        Real* dxr = dx.row(i);
        double sum_dxhat = 0, sum_dxhat_xhat = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const double dxh = static_cast<double>(dyr[j]) * g.a[j];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xh[j];
            dg.a[j] += dyr[j] * xh[j];
            db.a[j] += dyr[j];
        }
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j) {
            const double dxh = static_cast<double>(dyr[j]) * g.a[j];
            dxr[j] += static_cast<Real>(cache.rstd[i] *
                                        (dxh - inv_d * sum_dxhat - xh[j] * inv_d * sum_dxhat_xhat));
        }
    }
}

template <typename Real>
void add_bias(Mat<Real>& x, const Mat<Real>& b) {
    for (std::size_t i = 0; i < x.rows; ++i) {
        Real* r = x.row(i);
        for (std::size_t j = 0; j < x.cols; ++j) r[j] += b.a[j];
    }
}

} // namespace detail

template <typename Real>
EncoderCache<Real> encode_forward(const EncoderParams<Real>& p, const ModelInput& in) {
    const EncoderConfig& cfg = p.cfg;
    const std::size_t L = in.token_ids.size();
    if (L == 0) throw std::invalid_argument("encode: empty input");
    if (L > static_cast<std::size_t>(cfg.max_len))
        throw std::invalid_argument("encode: input length " + std::to_string(L) +
                                    " exceeds max_len " + std::to_string(cfg.max_len));
    if (in.readout_pos < 0 || static_cast<std::size_t>(in.readout_pos) >= L)
        throw std::invalid_argument("encode: readout position out of range");

    EncoderCache<Real> cache;
    cache.ids = in.token_ids;
    cache.readout = in.readout_pos;

    const std::size_t d = static_cast<std::size_t>(cfg.dim);
    cache.x0 = Mat<Real>(L, d);
    for (std::size_t i = 0; i < L; ++i) {
        const int id = in.token_ids[i];
        if (id < 0 || id >= cfg.vocab_size)
            throw std::invalid_argument("encode: token id " + std::to_string(id) +
                                        " outside vocabulary");
        const Real* te = p.tok_embed.row(static_cast<std::size_t>(id));
        const Real* pe = p.pos_embed.row(i);
        Real* xr = cache.x0.row(i);
        for (std::size_t j = 0; j < d; ++j) xr[j] = te[j] + pe[j];
    }

    const Mat<Real>* x = &cache.x0;
    if (cfg.attention != AttentionKind::bag) {
        const int H = cfg.n_heads;
        const std::size_t hd = static_cast<std::size_t>(cfg.head_dim());
        const Real scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(hd)));
        cache.layers.resize(static_cast<std::size_t>(cfg.n_layers));
        for (std::size_t l = 0; l < cache.layers.size(); ++l) {
            const LayerParams<Real>& lp = p.layers[l];
            EncoderLayerCache<Real>& lc = cache.layers[l];
            lc.xin = *x;

            lc.q = Mat<Real>(L, d);
            lc.k = Mat<Real>(L, d);
            lc.v = Mat<Real>(L, d);
            matmul(lc.xin, lp.wq, lc.q);
            matmul(lc.xin, lp.wk, lc.k);
            matmul(lc.xin, lp.wv, lc.v);
            detail::add_bias(lc.q, lp.bq);
            detail::add_bias(lc.k, lp.bk);
            detail::add_bias(lc.v, lp.bv);

            lc.att.assign(static_cast<std::size_t>(H), Mat<Real>(L, L));
            lc.ctx = Mat<Real>(L, d);
            std::vector<double> scores(L);
            for (int h = 0; h < H; ++h) {
                const std::size_t off = static_cast<std::size_t>(h) * hd;
                Mat<Real>& A = lc.att[static_cast<std::size_t>(h)];
                for (std::size_t i = 0; i < L; ++i) {
                    const std::size_t span =
                        cfg.attention == AttentionKind::causal ? i + 1 : L;
                    const Real* qi = lc.q.row(i) + off;
                    double mx = -1e300;
                    for (std::size_t j = 0; j < span; ++j) {
                        const Real* kj = lc.k.row(j) + off;
                        double s = 0;
                        for (std::size_t t = 0; t < hd; ++t)
                            s += static_cast<double>(qi[t]) * kj[t];
                        s *= scale;
                        scores[j] = s;
                        mx = std::max(mx, s);
                    }
                    double z = 0;
                    for (std::size_t j = 0; j < span; ++j) {
                        scores[j] = std::exp(scores[j] - mx);
                        z += scores[j];
                    }
                    Real* ar = A.row(i);
                    for (std::size_t j = 0; j < span; ++j)
                        ar[j] = static_cast<Real>(scores[j] / z);
                    Real* ci = lc.ctx.row(i) + off;
                    for (std::size_t j = 0; j < span; ++j) {
                        const Real a = ar[j];
                        const Real* vj = lc.v.row(j) + off;
                        for (std::size_t t = 0; t < hd; ++t) ci[t] += a * vj[t];
                    }
                }
            }

            lc.res1 = Mat<Real>(L, d);
            matmul(lc.ctx, lp.wo, lc.res1);
            detail::add_bias(lc.res1, lp.bo);
            for (std::size_t i = 0; i < L * d; ++i) lc.res1.a[i] += lc.xin.a[i];
            detail::layer_norm(lc.res1, lp.ln1_g, lp.ln1_b, lc.ln1_out, lc.ln1);

            lc.h1 = Mat<Real>(L, static_cast<std::size_t>(cfg.ffn_dim));
            matmul(lc.ln1_out, lp.w1, lc.h1);
            detail::add_bias(lc.h1, lp.b1);
            lc.g1 = Mat<Real>(L, static_cast<std::size_t>(cfg.ffn_dim));
            for (std::size_t i = 0; i < lc.h1.size(); ++i) lc.g1.a[i] = gelu(lc.h1.a[i]);

            lc.res2 = Mat<Real>(L, d);
            matmul(lc.g1, lp.w2, lc.res2);
            detail::add_bias(lc.res2, lp.b2);
            for (std::size_t i = 0; i < L * d; ++i) lc.res2.a[i] += lc.ln1_out.a[i];
            detail::layer_norm(lc.res2, lp.ln2_g, lp.ln2_b, lc.out, lc.ln2);
            x = &lc.out;
        }
    }

    detail::layer_norm(*x, p.fin_g, p.fin_b, cache.fin_out, cache.fin);
    return cache;
}

template <typename Real>
std::vector<Real> readout_state(const EncoderCache<Real>& cache) {
    const Real* r = cache.fin_out.row(static_cast<std::size_t>(cache.readout));
    return std::vector<Real>(r, r + cache.fin_out.cols);
}

template <typename Real>
std::vector<Real> encode(const EncoderParams<Real>& p, const ModelInput& in) {
    return readout_state(encode_forward(p, in));
}

// Accumulates parameter gradients for d(loss)/d(readout state) = d_readout.
template <typename Real>
void encode_backward(const EncoderParams<Real>& p, const EncoderCache<Real>& cache,
                     const std::vector<Real>& d_readout, EncoderParams<Real>& grads) {
    const EncoderConfig& cfg = p.cfg;
    const std::size_t L = cache.ids.size();
    const std::size_t d = static_cast<std::size_t>(cfg.dim);
    if (d_readout.size() != d)
        throw std::invalid_argument("encode_backward: gradient dimension mismatch");

    Mat<Real> dout(L, d);
    Real* drow = dout.row(static_cast<std::size_t>(cache.readout));
    for (std::size_t j = 0; j < d; ++j) drow[j] = d_readout[j];

    Mat<Real> dx(L, d);
    detail::layer_norm_backward(dout, p.fin_g, cache.fin, dx, grads.fin_g, grads.fin_b);

    if (cfg.attention != AttentionKind::bag) {
        const int H = cfg.n_heads;
        const std::size_t hd = static_cast<std::size_t>(cfg.head_dim());
        const Real scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(hd)));
        for (std::size_t li = cache.layers.size(); li-- > 0;) {
            const LayerParams<Real>& lp = p.layers[li];
            LayerParams<Real>& lg = grads.layers[li];
            const EncoderLayerCache<Real>& lc = cache.layers[li];

            // dx holds d(loss)/d(layer output). LN2 first.
            Mat<Real> dres2(L, d);
            detail::layer_norm_backward(dx, lp.ln2_g, lc.ln2, dres2, lg.ln2_g, lg.ln2_b);

            // res2 = ln1_out + g1 w2 + b2
            Mat<Real> dln1_out = dres2; // residual branch
            matmul_at(lc.g1, dres2, lg.w2, true);
            for (std::size_t i = 0; i < L; ++i) {
                const Real* r = dres2.row(i);
                for (std::size_t j = 0; j < d; ++j) lg.b2.a[j] += r[j];
            }
            Mat<Real> dg1(L, static_cast<std::size_t>(cfg.ffn_dim));
            matmul_bt(dres2, lp.w2, dg1);
            for (std::size_t i = 0; i < dg1.size(); ++i)
                dg1.a[i] *= gelu_grad(lc.h1.a[i]); // now holds dh1
            matmul_at(lc.ln1_out, dg1, lg.w1, true);
            for (std::size_t i = 0; i < L; ++i) {
                const Real* r = dg1.row(i);
                for (std::size_t j = 0; j < static_cast<std::size_t>(cfg.ffn_dim); ++j)
                    lg.b1.a[j] += r[j];
            }
            matmul_bt(dg1, lp.w1, dln1_out, true);

            Mat<Real> dres1(L, d);
            detail::layer_norm_backward(dln1_out, lp.ln1_g, lc.ln1, dres1, lg.ln1_g, lg.ln1_b);

            // res1 = xin + ctx wo + bo
            Mat<Real> dxin = dres1; // residual branch
            matmul_at(lc.ctx, dres1, lg.wo, true);
            for (std::size_t i = 0; i < L; ++i) {
                const Real* r = dres1.row(i);
                for (std::size_t j = 0; j < d; ++j) lg.bo.a[j] += r[j];
            }
            Mat<Real> dctx(L, d);
            matmul_bt(dres1, lp.wo, dctx);

            Mat<Real> dq(L, d), dk(L, d), dv(L, d);
            std::vector<double> drow_buf(L);
            for (int h = 0; h < H; ++h) {
                const std::size_t off = static_cast<std::size_t>(h) * hd;
                const Mat<Real>& A = lc.att[static_cast<std::size_t>(h)];
                for (std::size_t i = 0; i < L; ++i) {
                    const std::size_t span =
                        cfg.attention == AttentionKind::causal ? i + 1 : L;
                    const Real* dci = dctx.row(i) + off;
                    const Real* ar = A.row(i);
                    // dA then softmax jacobian, fused row-wise.
                    double inner = 0;
                    for (std::size_t j = 0; j < span; ++j) {
                        const Real* vj = lc.v.row(j) + off;
                        double da = 0;
                        for (std::size_t t = 0; t < hd; ++t)
                            da += static_cast<double>(dci[t]) * vj[t];
                        drow_buf[j] = da;
                        inner += da * ar[j];
                        // dv_j += A_ij * dctx_i
                        Real* dvj = dv.row(j) + off;
                        for (std::size_t t = 0; t < hd; ++t) dvj[t] += ar[j] * dci[t];
                    }
                    const Real* qi = lc.q.row(i) + off;
                    Real* dqi = dq.row(i) + off;
                    for (std::size_t j = 0; j < span; ++j) {
                        const Real ds = static_cast<Real>(ar[j] * (drow_buf[j] - inner)) * scale;
                        const Real* kj = lc.k.row(j) + off;
                        Real* dkj = dk.row(j) + off;
                        for (std::size_t t = 0; t < hd; ++t) {
                            dqi[t] += ds * kj[t];
                            dkj[t] += ds * qi[t];
                        }
                    }
                }
            }

            matmul_at(lc.xin, dq, lg.wq, true);
            matmul_at(lc.xin, dk, lg.wk, true);
            matmul_at(lc.xin, dv, lg.wv, true);
            for (std::size_t i = 0; i < L; ++i) {
                const Real* rq = dq.row(i);
                const Real* rk = dk.row(i);
                const Real* rv = dv.row(i);
                for (std::size_t j = 0; j < d; ++j) {
                    lg.bq.a[j] += rq[j];
                    lg.bk.a[j] += rk[j];
                    lg.bv.a[j] += rv[j];
                }
            }
            matmul_bt(dq, lp.wq, dxin, true);
            matmul_bt(dk, lp.wk, dxin, true);
            matmul_bt(dv, lp.wv, dxin, true);
            dx = std::move(dxin);
        }
    }

    for (std::size_t i = 0; i < L; ++i) {
        const Real* r = dx.row(i);
        Real* gt = grads.tok_embed.row(static_cast<std::size_t>(cache.ids[i]));
        Real* gp = grads.pos_embed.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            gt[j] += r[j];
            gp[j] += r[j];
        }
    }
}

} // namespace hum
