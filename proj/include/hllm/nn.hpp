#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hllm/rng.hpp"
#include "hllm/tensor.hpp"

namespace hllm {

/// Trainable tensor: value + accumulated gradient. `decay` marks parameters
/// that receive decoupled weight decay (matrices and embedding tables; not
/// biases, norm scales or the temperature).
struct Param {
    Mat v;
    Mat g;
    bool decay{true};

    void init(size_t rows, size_t cols, bool apply_decay) {
        v = Mat(rows, cols);
        g = Mat(rows, cols);
        decay = apply_decay;
    }
    void zero_grad() { g.zero(); }
};

using ParamVisitor = std::function<void(const std::string&, Param&)>;

void init_truncated_normal(Mat& m, Rng& rng, double sigma);

double gelu(double x);
double gelu_grad(double x);

// ---------------------------------------------------------------------------
// Linear: y = x * W^T + b, W stored (out x in)
// ---------------------------------------------------------------------------
struct LinearCache {
    Mat x;
};

struct Linear {
    Param w;
    Param b;
    bool has_bias{false};

    void init(size_t in, size_t out, bool bias, Rng& rng, double sigma);
    Mat forward(const Mat& x, LinearCache* cache) const;
    Mat backward(const Mat& dy, const LinearCache& cache);
    void visit(const std::string& prefix, const ParamVisitor& fn);
    size_t in_dim() const { return w.v.cols; }
    size_t out_dim() const { return w.v.rows; }
};

// ---------------------------------------------------------------------------
// RMS normalization with learned scale
// ---------------------------------------------------------------------------
struct RmsNormCache {
    Mat x;
    std::vector<double> inv_rms;
};

struct RmsNorm {
    Param gain;
    static constexpr double eps = 1e-6;

    void init(size_t dim);
    Mat forward(const Mat& x, RmsNormCache* cache) const;
    Mat backward(const Mat& dy, const RmsNormCache& cache);
    void visit(const std::string& prefix, const ParamVisitor& fn);
};

// ---------------------------------------------------------------------------
// Causal multi-head self-attention with rotary position encoding
// ---------------------------------------------------------------------------
struct AttnCache {
    LinearCache qc, kc, vc, oc;
    Mat q, k, v;  // q,k already rotated
    // Per-head softmax probabilities, packed lower-triangular rows.
    std::vector<std::vector<double>> probs;
    Mat ctx;
};

struct CausalSelfAttention {
    Linear wq, wk, wv, wo;
    size_t heads{1};
    size_t head_dim{1};

    void init(size_t dim, size_t n_heads, Rng& rng, double sigma);
    Mat forward(const Mat& x, AttnCache* cache) const;
    Mat backward(const Mat& dy, const AttnCache& cache);
    void visit(const std::string& prefix, const ParamVisitor& fn);
};

// ---------------------------------------------------------------------------
// Feed-forward: Linear -> GELU -> Linear, expansion factor 4
// ---------------------------------------------------------------------------
struct FfnCache {
    LinearCache c1, c2;
    Mat pre_act;
};

struct FeedForward {
    Linear w1, w2;

    void init(size_t dim, Rng& rng, double sigma);
    Mat forward(const Mat& x, FfnCache* cache) const;
    Mat backward(const Mat& dy, const FfnCache& cache);
    void visit(const std::string& prefix, const ParamVisitor& fn);
};

// ---------------------------------------------------------------------------
// Pre-norm transformer block and the full stack
// ---------------------------------------------------------------------------
struct BlockCache {
    RmsNormCache n1;
    AttnCache att;
    RmsNormCache n2;
    FfnCache ffn;
};

struct Block {
    RmsNorm norm1;
    CausalSelfAttention attn;
    RmsNorm norm2;
    FeedForward ffn;

    void init(size_t dim, size_t heads, Rng& rng, double sigma);
    Mat forward(const Mat& x, BlockCache* cache) const;
    Mat backward(const Mat& dy, const BlockCache& cache);
    void visit(const std::string& prefix, const ParamVisitor& fn);
};

struct TransformerCache {
    std::vector<BlockCache> blocks;
    RmsNormCache final_norm;
};

/// Causal decoder stack over a (seq_len x dim) input matrix. The hidden state
/// is taken after the final normalization layer.
struct Transformer {
    std::vector<Block> blocks;
    RmsNorm final_norm;
    size_t dim{0};
    std::string label;  // used in numeric-failure messages

    void init(const std::string& name, size_t dim, size_t layers, size_t heads, Rng& rng,
              double sigma);
    Mat forward(const Mat& x, TransformerCache* cache) const;
    Mat backward(const Mat& dy, const TransformerCache& cache);
    void visit(const std::string& prefix, const ParamVisitor& fn);
};

}  // namespace hllm
