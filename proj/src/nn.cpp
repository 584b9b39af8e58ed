#include "hllm/nn.hpp"

#include <cassert>
#include <cmath>

#include "hllm/error.hpp"

namespace hllm {

namespace {

constexpr double kRopeBase = 10000.0;
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

// Rotary rotation of one (seq x dim) matrix in place, pair (2t, 2t+1) per
// head rotated by pos * base^(-2t/head_dim). sign = -1 inverts (backward).
// The angle table is shared across heads.
void rope_apply(Mat& x, size_t heads, size_t head_dim, double sign) {
    const size_t half = head_dim / 2;
    std::vector<double> freq(half);
    for (size_t t = 0; t < half; ++t) {
        freq[t] = std::pow(kRopeBase,
                           -2.0 * static_cast<double>(t) / static_cast<double>(head_dim));
    }
    std::vector<double> cs(half), sn(half);
    for (size_t pos = 0; pos < x.rows; ++pos) {
        for (size_t t = 0; t < half; ++t) {
            const double theta = static_cast<double>(pos) * freq[t];
            cs[t] = std::cos(theta);
            sn[t] = std::sin(theta) * sign;
        }
        double* row = x.row(pos);
        for (size_t h = 0; h < heads; ++h) {
            double* hr = row + h * head_dim;
            for (size_t t = 0; t < half; ++t) {
                const double a = hr[2 * t];
                const double b = hr[2 * t + 1];
                hr[2 * t] = a * cs[t] - b * sn[t];
                hr[2 * t + 1] = a * sn[t] + b * cs[t];
            }
        }
    }
}

}  // namespace

void init_truncated_normal(Mat& m, Rng& rng, double sigma) {
    for (double& x : m.m) x = rng.truncated_normal(sigma);
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return cdf + x * pdf;
}

// ----------------------------- Linear -----------------------------
void Linear::init(size_t in, size_t out, bool bias, Rng& rng, double sigma) {
    w.init(out, in, true);
    init_truncated_normal(w.v, rng, sigma);
    has_bias = bias;
    if (bias) b.init(1, out, false);
}

Mat Linear::forward(const Mat& x, LinearCache* cache) const {
    Mat y;
    matmul_nt(x, w.v, y);
    if (has_bias) {
        for (size_t i = 0; i < y.rows; ++i) axpy(1.0, b.v.row(0), y.row(i), y.cols);
    }
    if (cache) cache->x = x;
    return y;
}

Mat Linear::backward(const Mat& dy, const LinearCache& cache) {
    accum_tn(dy, cache.x, w.g);
    if (has_bias) {
        for (size_t i = 0; i < dy.rows; ++i) axpy(1.0, dy.row(i), b.g.row(0), dy.cols);
    }
    Mat dx;
    matmul_nn(dy, w.v, dx);
    return dx;
}

void Linear::visit(const std::string& prefix, const ParamVisitor& fn) {
    fn(prefix + ".w", w);
    if (has_bias) fn(prefix + ".b", b);
}

// ----------------------------- RmsNorm -----------------------------
void RmsNorm::init(size_t dim) {
    gain.init(1, dim, false);
    for (double& x : gain.v.m) x = 1.0;
}

Mat RmsNorm::forward(const Mat& x, RmsNormCache* cache) const {
    Mat y(x.rows, x.cols);
    std::vector<double> inv(x.rows);
    const double* g = gain.v.row(0);
    for (size_t i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        const double ms = dot(xi, xi, x.cols) / static_cast<double>(x.cols);
        const double r = 1.0 / std::sqrt(ms + eps);
        inv[i] = r;
        double* yi = y.row(i);
        for (size_t j = 0; j < x.cols; ++j) yi[j] = xi[j] * r * g[j];
    }
    if (cache) {
        cache->x = x;
        cache->inv_rms = std::move(inv);
    }
    return y;
}

Mat RmsNorm::backward(const Mat& dy, const RmsNormCache& cache) {
    const Mat& x = cache.x;
    const size_t d = x.cols;
    Mat dx(x.rows, d);
    const double* g = gain.v.row(0);
    double* dg = gain.g.row(0);
    for (size_t i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        const double* di = dy.row(i);
        double* dxi = dx.row(i);
        const double r = cache.inv_rms[i];
        double inner = 0.0;  // sum_k dy_k * g_k * x_k
        for (size_t j = 0; j < d; ++j) {
            dg[j] += di[j] * xi[j] * r;
            inner += di[j] * g[j] * xi[j];
        }
        const double coef = r * r * r * inner / static_cast<double>(d);
        for (size_t j = 0; j < d; ++j) dxi[j] = r * di[j] * g[j] - coef * xi[j];
    }
    return dx;
}

void RmsNorm::visit(const std::string& prefix, const ParamVisitor& fn) {
    fn(prefix + ".gain", gain);
}

// ----------------------------- Attention -----------------------------
void CausalSelfAttention::init(size_t dim, size_t n_heads, Rng& rng, double sigma) {
    if (dim % n_heads != 0) throw ConfigError("model dim must be divisible by head count");
    heads = n_heads;
    head_dim = dim / n_heads;
    if (head_dim % 2 != 0) throw ConfigError("head_dim must be even for rotary encoding");
    wq.init(dim, dim, false, rng, sigma);
    wk.init(dim, dim, false, rng, sigma);
    wv.init(dim, dim, false, rng, sigma);
    wo.init(dim, dim, false, rng, sigma);
}

Mat CausalSelfAttention::forward(const Mat& x, AttnCache* cache) const {
    const size_t n = x.rows;
    const size_t d = x.cols;
    AttnCache local;
    AttnCache& c = cache ? *cache : local;

    c.q = wq.forward(x, cache ? &c.qc : nullptr);
    c.k = wk.forward(x, cache ? &c.kc : nullptr);
    c.v = wv.forward(x, cache ? &c.vc : nullptr);
    rope_apply(c.q, heads, head_dim, 1.0);
    rope_apply(c.k, heads, head_dim, 1.0);

    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    c.ctx = Mat(n, d);
    c.probs.assign(heads, {});
    std::vector<double> scores;
    for (size_t h = 0; h < heads; ++h) {
        auto& packed = c.probs[h];
        packed.resize(n * (n + 1) / 2);
        for (size_t i = 0; i < n; ++i) {
            const double* qi = c.q.row(i) + h * head_dim;
            scores.assign(i + 1, 0.0);
            double mx = -1e300;
            for (size_t j = 0; j <= i; ++j) {
                scores[j] = dot(qi, c.k.row(j) + h * head_dim, head_dim) * scale;
                if (scores[j] > mx) mx = scores[j];
            }
            double z = 0.0;
            for (size_t j = 0; j <= i; ++j) {
                scores[j] = std::exp(scores[j] - mx);
                z += scores[j];
            }
            double* pi = packed.data() + i * (i + 1) / 2;
            double* out = c.ctx.row(i) + h * head_dim;
            for (size_t j = 0; j <= i; ++j) {
                pi[j] = scores[j] / z;
                axpy(pi[j], c.v.row(j) + h * head_dim, out, head_dim);
            }
        }
    }
    return wo.forward(c.ctx, cache ? &c.oc : nullptr);
}

Mat CausalSelfAttention::backward(const Mat& dy, const AttnCache& c) {
    const size_t n = dy.rows;
    const size_t d = dy.cols;
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

    Mat dctx = wo.backward(dy, c.oc);
    Mat dq(n, d), dk(n, d), dv(n, d);
    std::vector<double> dp;
    for (size_t h = 0; h < heads; ++h) {
        const auto& packed = c.probs[h];
        for (size_t i = 0; i < n; ++i) {
            const double* pi = packed.data() + i * (i + 1) / 2;
            const double* doi = dctx.row(i) + h * head_dim;
            dp.assign(i + 1, 0.0);
            for (size_t j = 0; j <= i; ++j) {
                axpy(pi[j], doi, dv.row(j) + h * head_dim, head_dim);
                dp[j] = dot(doi, c.v.row(j) + h * head_dim, head_dim);
            }
            double inner = 0.0;
            for (size_t j = 0; j <= i; ++j) inner += pi[j] * dp[j];
            const double* qi = c.q.row(i) + h * head_dim;
            double* dqi = dq.row(i) + h * head_dim;
            for (size_t j = 0; j <= i; ++j) {
                const double ds = pi[j] * (dp[j] - inner) * scale;
                if (ds == 0.0) continue;
                axpy(ds, c.k.row(j) + h * head_dim, dqi, head_dim);
                axpy(ds, qi, dk.row(j) + h * head_dim, head_dim);
            }
        }
    }
    rope_apply(dq, heads, head_dim, -1.0);
    rope_apply(dk, heads, head_dim, -1.0);

    Mat dx = wq.backward(dq, c.qc);
    Mat dxk = wk.backward(dk, c.kc);
    Mat dxv = wv.backward(dv, c.vc);
    for (size_t i = 0; i < dx.size(); ++i) dx.m[i] += dxk.m[i] + dxv.m[i];
    return dx;
}

void CausalSelfAttention::visit(const std::string& prefix, const ParamVisitor& fn) {
    wq.visit(prefix + ".wq", fn);
    wk.visit(prefix + ".wk", fn);
    wv.visit(prefix + ".wv", fn);
    wo.visit(prefix + ".wo", fn);
}

// ----------------------------- FeedForward -----------------------------
void FeedForward::init(size_t dim, Rng& rng, double sigma) {
    w1.init(dim, 4 * dim, true, rng, sigma);
    w2.init(4 * dim, dim, true, rng, sigma);
}

Mat FeedForward::forward(const Mat& x, FfnCache* cache) const {
    Mat h = w1.forward(x, cache ? &cache->c1 : nullptr);
    if (cache) cache->pre_act = h;
    for (double& v : h.m) v = gelu(v);
    return w2.forward(h, cache ? &cache->c2 : nullptr);
}

Mat FeedForward::backward(const Mat& dy, const FfnCache& cache) {
    Mat dh = w2.backward(dy, cache.c2);
    for (size_t i = 0; i < dh.size(); ++i) dh.m[i] *= gelu_grad(cache.pre_act.m[i]);
    return w1.backward(dh, cache.c1);
}

void FeedForward::visit(const std::string& prefix, const ParamVisitor& fn) {
    w1.visit(prefix + ".w1", fn);
    w2.visit(prefix + ".w2", fn);
}

// ----------------------------- Block -----------------------------
void Block::init(size_t dim, size_t heads, Rng& rng, double sigma) {
    norm1.init(dim);
    attn.init(dim, heads, rng, sigma);
    norm2.init(dim);
    ffn.init(dim, rng, sigma);
}

Mat Block::forward(const Mat& x, BlockCache* cache) const {
    Mat n1 = norm1.forward(x, cache ? &cache->n1 : nullptr);
    Mat a = attn.forward(n1, cache ? &cache->att : nullptr);
    for (size_t i = 0; i < a.size(); ++i) a.m[i] += x.m[i];

    Mat n2 = norm2.forward(a, cache ? &cache->n2 : nullptr);
    Mat f = ffn.forward(n2, cache ? &cache->ffn : nullptr);
    for (size_t i = 0; i < f.size(); ++i) f.m[i] += a.m[i];
    return f;
}

Mat Block::backward(const Mat& dy, const BlockCache& cache) {
    Mat dn2 = ffn.backward(dy, cache.ffn);
    Mat da = norm2.backward(dn2, cache.n2);
    for (size_t i = 0; i < da.size(); ++i) da.m[i] += dy.m[i];

    Mat dn1 = attn.backward(da, cache.att);
    Mat dx = norm1.backward(dn1, cache.n1);
    for (size_t i = 0; i < dx.size(); ++i) dx.m[i] += da.m[i];
    return dx;
}

void Block::visit(const std::string& prefix, const ParamVisitor& fn) {
    norm1.visit(prefix + ".norm1", fn);
    attn.visit(prefix + ".attn", fn);
    norm2.visit(prefix + ".norm2", fn);
    ffn.visit(prefix + ".ffn", fn);
}

// ----------------------------- Transformer -----------------------------
void Transformer::init(const std::string& name, size_t d, size_t layers, size_t heads, Rng& rng,
                       double sigma) {
    label = name;
    dim = d;
    blocks.resize(layers);
    for (auto& b : blocks) b.init(d, heads, rng, sigma);
    final_norm.init(d);
}

Mat Transformer::forward(const Mat& x, TransformerCache* cache) const {
    if (cache) cache->blocks.resize(blocks.size());
    Mat h = x;
    for (size_t l = 0; l < blocks.size(); ++l) {
        h = blocks[l].forward(h, cache ? &cache->blocks[l] : nullptr);
        if (!all_finite(h)) {
            throw NumericError(label + ": non-finite activation after layer " + std::to_string(l));
        }
    }
    return final_norm.forward(h, cache ? &cache->final_norm : nullptr);
}

Mat Transformer::backward(const Mat& dy, const TransformerCache& cache) {
    Mat dh = final_norm.backward(dy, cache.final_norm);
    for (size_t l = blocks.size(); l-- > 0;) {
        dh = blocks[l].backward(dh, cache.blocks[l]);
    }
    return dh;
}

void Transformer::visit(const std::string& prefix, const ParamVisitor& fn) {
    for (size_t l = 0; l < blocks.size(); ++l) {
        blocks[l].visit(prefix + ".block" + std::to_string(l), fn);
    }
    final_norm.visit(prefix + ".final_norm", fn);
}

}  // namespace hllm
