#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hllm/features.hpp"
#include "hllm/nn.hpp"

namespace hllm {

/// Batch of item-embedding sequences. Rows may be padded beyond their valid
/// length; padded positions never influence outputs at valid positions.
/// `extras` optionally carries per-position vectors added after the input
/// projection (e.g. timestamp features).
struct SequenceBatch {
    size_t batch{0};
    size_t seq_len{0};
    size_t dim{0};
    std::vector<double> emb;      // batch * seq_len * dim
    std::vector<size_t> lengths;  // valid length per row
    size_t extra_dim{0};
    std::vector<double> extras;  // batch * seq_len * extra_dim when extra_dim > 0

    static SequenceBatch zeros(size_t b, size_t s, size_t d) {
        SequenceBatch sb;
        sb.batch = b;
        sb.seq_len = s;
        sb.dim = d;
        sb.emb.assign(b * s * d, 0.0);
        sb.lengths.assign(b, s);
        return sb;
    }
    void alloc_extras(size_t d) {
        extra_dim = d;
        extras.assign(batch * seq_len * d, 0.0);
    }
    double* row(size_t b, size_t pos) { return emb.data() + (b * seq_len + pos) * dim; }
    const double* row(size_t b, size_t pos) const {
        return emb.data() + (b * seq_len + pos) * dim;
    }
    double* extra_row(size_t b, size_t pos) {
        return extras.data() + (b * seq_len + pos) * extra_dim;
    }
    const double* extra_row(size_t b, size_t pos) const {
        return extras.data() + (b * seq_len + pos) * extra_dim;
    }
};

/// Predicted next-item embeddings: entry at position i estimates the
/// embedding of item i+1. Padded positions hold zeros.
struct PredictionBatch {
    size_t batch{0};
    size_t seq_len{0};
    size_t dim{0};
    std::vector<double> data;
    std::vector<size_t> lengths;

    double* row(size_t b, size_t pos) { return data.data() + (b * seq_len + pos) * dim; }
    const double* row(size_t b, size_t pos) const {
        return data.data() + (b * seq_len + pos) * dim;
    }
};

struct RowCache {
    LinearCache proj;  // covers every projected row, appended target included
    TransformerCache tf;
    size_t base_len{0};
    bool appended_user{false};
    bool appended_target{false};
};

struct UserSeqCache {
    std::vector<RowCache> rows;
    bool has_extras{false};
};

struct HeadCache {
    LinearCache c1, c2;
    Mat pre_act;
};

/// Two-layer perceptron with GELU producing one logit.
struct PredHead {
    Linear l1, l2;

    void init(size_t in_dim, size_t hidden, Rng& rng, double sigma);
    double forward(const std::vector<double>& in, HeadCache* cache) const;
    std::vector<double> backward(double d_logit, const HeadCache& cache);
    void visit(const std::string& prefix, const ParamVisitor& fn);
};

/// Causal transformer over item embeddings, with no token-embedding table.
/// Supports generative next-embedding prediction, early fusion (target
/// appended to the sequence), late fusion (learned terminal input pooled as a
/// user embedding), and an ID-table input mode for the baseline.
struct UserModel {
    size_t d_item{0};
    size_t d_user{0};
    bool has_proj{false};
    Linear proj;       // present iff d_item != d_user
    Param user_token;  // learned terminal input, d_user space
    Transformer tf;
    bool has_head{false};
    PredHead head;
    bool has_id_input{false};
    IdFeatureTable id_input;  // baseline input table, d_item columns

    mutable size_t sequence_forwards{0};  // instrumentation

    void init(size_t item_dim, size_t user_dim, size_t layers, size_t heads, Rng& rng,
              double sigma = 0.02);
    void init_head(size_t in_dim, Rng& rng, double sigma = 0.02);
    void init_id_input(const std::vector<std::string>& known_ids, Rng& rng, double sigma = 0.02);

    /// Core per-row forward. `extras` (len x d_user, nullable) is added after
    /// the input projection; `target` (d_item, nullable) or the learned user
    /// token may be appended as one extra position.
    Mat run_row(const double* emb, size_t len, const double* extras, const double* target,
                bool append_user, RowCache* cache) const;

    /// Gradient of run_row. Writes d_emb (len x d_item); optionally d_extras
    /// (len x d_user) and d_target (d_item) when those inputs were given.
    void backward_row(const Mat& d_hidden, const RowCache& cache, double* d_emb, double* d_extras,
                      double* d_target);

    /// Batch forward: output position i depends only on inputs <= i. When the
    /// batch carries extras their dimension must equal d_user.
    PredictionBatch encode_user_sequence(const SequenceBatch& batch, UserSeqCache* cache) const;
    /// Returns input gradients; carries extras gradients when the forward did.
    SequenceBatch backward_sequence(const PredictionBatch& d_pred, const UserSeqCache& cache);

    /// Early fusion: appends the target embedding, feeds the last-position
    /// cross feature to the head. One full forward per candidate.
    double early_fusion_logit(const double* history, size_t len, const double* extras,
                              const double* target, RowCache* row_cache,
                              HeadCache* head_cache) const;

    /// Late fusion: appends the learned user token and returns the output at
    /// that position. Independent of any candidate.
    std::vector<double> late_fusion_user_embedding(const double* history, size_t len,
                                                   const double* extras, RowCache* cache) const;

    /// Head over the concatenation [user_emb; target].
    double late_fusion_logit(const std::vector<double>& user_emb,
                             const std::vector<double>& target, HeadCache* cache) const;

    /// Baseline input: per-id table lookup, unseen ids map to the OOV row.
    SequenceBatch id_baseline_embed(const std::vector<std::vector<std::string>>& item_ids) const;

    void visit(const std::string& prefix, const ParamVisitor& fn);
};

}  // namespace hllm
