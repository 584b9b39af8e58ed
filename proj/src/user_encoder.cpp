#include "hllm/user_encoder.hpp"

#include <cassert>
#include <cstring>

#include "hllm/error.hpp"

namespace hllm {

void PredHead::init(size_t in_dim, size_t hidden, Rng& rng, double sigma) {
    l1.init(in_dim, hidden, true, rng, sigma);
    l2.init(hidden, 1, true, rng, sigma);
}

double PredHead::forward(const std::vector<double>& in, HeadCache* cache) const {
    if (in.size() != l1.in_dim()) {
        throw DataError("prediction head: input dimension " + std::to_string(in.size()) +
                        " != " + std::to_string(l1.in_dim()));
    }
    Mat x(1, in.size());
    std::copy(in.begin(), in.end(), x.row(0));
    Mat h = l1.forward(x, cache ? &cache->c1 : nullptr);
    if (cache) cache->pre_act = h;
    for (double& v : h.m) v = gelu(v);
    Mat out = l2.forward(h, cache ? &cache->c2 : nullptr);
    return out.at(0, 0);
}

std::vector<double> PredHead::backward(double d_logit, const HeadCache& cache) {
    Mat dy(1, 1);
    dy.at(0, 0) = d_logit;
    Mat dh = l2.backward(dy, cache.c2);
    for (size_t i = 0; i < dh.size(); ++i) dh.m[i] *= gelu_grad(cache.pre_act.m[i]);
    Mat dx = l1.backward(dh, cache.c1);
    return std::vector<double>(dx.m.begin(), dx.m.end());
}

void PredHead::visit(const std::string& prefix, const ParamVisitor& fn) {
    l1.visit(prefix + ".l1", fn);
    l2.visit(prefix + ".l2", fn);
}

void UserModel::init(size_t item_dim, size_t user_dim, size_t layers, size_t heads, Rng& rng,
                     double sigma) {
    d_item = item_dim;
    d_user = user_dim;
    has_proj = item_dim != user_dim;
    if (has_proj) proj.init(item_dim, user_dim, true, rng, sigma);
    user_token.init(1, user_dim, false);
    init_truncated_normal(user_token.v, rng, sigma);
    tf.init("user_model", user_dim, layers, heads, rng, sigma);
}

void UserModel::init_head(size_t in_dim, Rng& rng, double sigma) {
    head.init(in_dim, d_user, rng, sigma);
    has_head = true;
}

void UserModel::init_id_input(const std::vector<std::string>& known_ids, Rng& rng, double sigma) {
    id_input.init(known_ids, d_item, rng, sigma);
    has_id_input = true;
}

Mat UserModel::run_row(const double* emb, size_t len, const double* extras, const double* target,
                       bool append_user, RowCache* cache) const {
    assert(!(target && append_user));
    if (len == 0 && !target && !append_user) throw DataError("empty user sequence");

    const size_t proj_rows = len + (target ? 1 : 0);
    Mat raw(proj_rows, d_item);
    if (len > 0) std::memcpy(raw.row(0), emb, len * d_item * sizeof(double));
    if (target) std::memcpy(raw.row(len), target, d_item * sizeof(double));

    const size_t eff_len = len + ((target || append_user) ? 1 : 0);
    Mat x(eff_len, d_user);
    if (has_proj) {
        Mat projected = proj.forward(raw, cache ? &cache->proj : nullptr);
        std::memcpy(x.row(0), projected.row(0), proj_rows * d_user * sizeof(double));
    } else {
        std::memcpy(x.row(0), raw.row(0), proj_rows * d_user * sizeof(double));
    }
    if (extras) {
        for (size_t i = 0; i < len; ++i) axpy(1.0, extras + i * d_user, x.row(i), d_user);
    }
    if (append_user) std::memcpy(x.row(len), user_token.v.row(0), d_user * sizeof(double));

    if (cache) {
        cache->base_len = len;
        cache->appended_user = append_user;
        cache->appended_target = target != nullptr;
    }
    ++sequence_forwards;
    return tf.forward(x, cache ? &cache->tf : nullptr);
}

void UserModel::backward_row(const Mat& d_hidden, const RowCache& cache, double* d_emb,
                             double* d_extras, double* d_target) {
    const size_t len = cache.base_len;
    Mat dx = tf.backward(d_hidden, cache.tf);

    if (cache.appended_user) {
        axpy(1.0, dx.row(len), user_token.g.row(0), d_user);
    }
    if (d_extras) {
        for (size_t i = 0; i < len; ++i) axpy(1.0, dx.row(i), d_extras + i * d_user, d_user);
    }

    const size_t proj_rows = len + (cache.appended_target ? 1 : 0);
    Mat d_proj_in(proj_rows, d_user);
    std::memcpy(d_proj_in.row(0), dx.row(0), proj_rows * d_user * sizeof(double));

    Mat d_raw;
    if (has_proj) {
        d_raw = proj.backward(d_proj_in, cache.proj);
    } else {
        d_raw = d_proj_in;
    }
    if (d_emb && len > 0) {
        for (size_t i = 0; i < len; ++i) axpy(1.0, d_raw.row(i), d_emb + i * d_item, d_item);
    }
    if (d_target && cache.appended_target) {
        axpy(1.0, d_raw.row(len), d_target, d_item);
    }
}

PredictionBatch UserModel::encode_user_sequence(const SequenceBatch& batch,
                                                UserSeqCache* cache) const {
    if (batch.dim != d_item) {
        throw DataError("sequence batch dim " + std::to_string(batch.dim) + " != d_item " +
                        std::to_string(d_item));
    }
    if (batch.extra_dim != 0 && batch.extra_dim != d_user) {
        throw DataError("sequence extras dim " + std::to_string(batch.extra_dim) +
                        " != d_user " + std::to_string(d_user));
    }
    PredictionBatch out;
    out.batch = batch.batch;
    out.seq_len = batch.seq_len;
    out.dim = d_user;
    out.lengths = batch.lengths;
    out.data.assign(batch.batch * batch.seq_len * d_user, 0.0);
    if (cache) {
        cache->rows.resize(batch.batch);
        cache->has_extras = batch.extra_dim != 0;
    }

    for (size_t b = 0; b < batch.batch; ++b) {
        const size_t len = batch.lengths[b];
        if (len == 0) continue;
        const double* extras = batch.extra_dim ? batch.extra_row(b, 0) : nullptr;
        Mat h = run_row(batch.row(b, 0), len, extras, nullptr, false,
                        cache ? &cache->rows[b] : nullptr);
        std::memcpy(out.row(b, 0), h.row(0), len * d_user * sizeof(double));
    }
    return out;
}

SequenceBatch UserModel::backward_sequence(const PredictionBatch& d_pred,
                                           const UserSeqCache& cache) {
    SequenceBatch d_emb = SequenceBatch::zeros(d_pred.batch, d_pred.seq_len, d_item);
    d_emb.lengths = d_pred.lengths;
    if (cache.has_extras) d_emb.alloc_extras(d_user);
    for (size_t b = 0; b < d_pred.batch; ++b) {
        const size_t len = d_pred.lengths[b];
        if (len == 0) continue;
        Mat dh(len, d_user);
        std::memcpy(dh.row(0), d_pred.row(b, 0), len * d_user * sizeof(double));
        backward_row(dh, cache.rows[b], d_emb.row(b, 0),
                     cache.has_extras ? d_emb.extra_row(b, 0) : nullptr, nullptr);
    }
    return d_emb;
}

double UserModel::early_fusion_logit(const double* history, size_t len, const double* extras,
                                     const double* target, RowCache* row_cache,
                                     HeadCache* head_cache) const {
    if (!has_head) throw ConfigError("early fusion requires an initialized prediction head");
    Mat h = run_row(history, len, extras, target, false, row_cache);
    std::vector<double> cross(h.row(len), h.row(len) + d_user);
    return head.forward(cross, head_cache);
}

std::vector<double> UserModel::late_fusion_user_embedding(const double* history, size_t len,
                                                          const double* extras,
                                                          RowCache* cache) const {
    if (len == 0) throw DataError("late fusion requires a non-empty history");
    Mat h = run_row(history, len, extras, nullptr, true, cache);
    return std::vector<double>(h.row(len), h.row(len) + d_user);
}

double UserModel::late_fusion_logit(const std::vector<double>& user_emb,
                                    const std::vector<double>& target, HeadCache* cache) const {
    if (!has_head) throw ConfigError("late fusion requires an initialized prediction head");
    std::vector<double> in;
    in.reserve(user_emb.size() + target.size());
    in.insert(in.end(), user_emb.begin(), user_emb.end());
    in.insert(in.end(), target.begin(), target.end());
    return head.forward(in, cache);
}

SequenceBatch UserModel::id_baseline_embed(
    const std::vector<std::vector<std::string>>& item_ids) const {
    if (!has_id_input) throw ConfigError("id baseline requires an initialized ID table");
    size_t max_len = 0;
    for (const auto& row : item_ids) max_len = std::max(max_len, row.size());
    SequenceBatch batch = SequenceBatch::zeros(item_ids.size(), max_len, d_item);
    for (size_t b = 0; b < item_ids.size(); ++b) {
        batch.lengths[b] = item_ids[b].size();
        for (size_t i = 0; i < item_ids[b].size(); ++i) {
            const auto v = id_input.lookup(item_ids[b][i]);
            std::copy(v.begin(), v.end(), batch.row(b, i));
        }
    }
    return batch;
}

void UserModel::visit(const std::string& prefix, const ParamVisitor& fn) {
    if (has_proj) proj.visit(prefix + ".proj", fn);
    fn(prefix + ".user_token", user_token);
    tf.visit(prefix + ".tf", fn);
    if (has_head) head.visit(prefix + ".head", fn);
    if (has_id_input) id_input.visit(prefix + ".id_input", fn);
}

}  // namespace hllm
