#include "hllm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <unordered_map>

#include "hllm/error.hpp"

namespace hllm {

AdamW::AdamW(double lr, double weight_decay) : lr_(lr), wd_(weight_decay) {}

void AdamW::attach(Recommender& model) {
    params_.clear();
    m_.clear();
    v_.clear();
    model.visit_trainable([this](const std::string&, Param& p) {
        params_.push_back(&p);
        m_.emplace_back(p.v.rows, p.v.cols);
        v_.emplace_back(p.v.rows, p.v.cols);
    });
}

void AdamW::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Param& p = *params_[i];
        double* m = m_[i].m.data();
        double* v = v_[i].m.data();
        double* w = p.v.m.data();
        const double* g = p.g.m.data();
        const double decay = p.decay ? wd_ : 0.0;
        const size_t n = p.v.size();
        for (size_t j = 0; j < n; ++j) {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= lr_ * (mhat / (std::sqrt(vhat) + eps) + decay * w[j]);
        }
    }
}

namespace {

// Unique items touched by one step: batch inputs, positives and negatives.
// Each gets one encode and one gradient accumulator.
struct ItemPool {
    std::vector<std::string> ids;  // first-seen order
    std::unordered_map<std::string, size_t> pos;
    std::vector<std::vector<double>> vec;
    std::vector<ItemEncoderCache> caches;  // live text encoding only
    std::vector<std::vector<double>> grad;

    size_t add(const std::string& id) {
        auto it = pos.find(id);
        if (it != pos.end()) return it->second;
        const size_t k = ids.size();
        pos.emplace(id, k);
        ids.push_back(id);
        return k;
    }
};

// Fused user-model inputs for one batch, plus bookkeeping to route input
// gradients back to the pool, the id-fusion table and the time embedding.
struct BatchInput {
    SequenceBatch seq;
    std::vector<std::vector<size_t>> item_at;               // pool index per (row, pos)
    std::vector<std::vector<TimeEmbeddingCache>> tcache;    // when time fusion is on
};

class Trainer {
public:
    Trainer(const SplitDataset& split, Recommender& model, const TrainConfig& cfg,
            const LossReporter& reporter)
        : split_(split),
          model_(model),
          cfg_(cfg),
          reporter_(reporter),
          rng_(cfg.seed),
          opt_(cfg.lr, cfg.weight_decay) {}

    TrainResult run();

private:
    double do_step(const std::vector<size_t>& rows);
    void encode_pool(ItemPool& pool);
    BatchInput build_inputs(const std::vector<size_t>& rows, ItemPool& pool);
    double generative_pass(const BatchInput& in, ItemPool& pool, const NegativeSet& negs,
                           double grad_scale, SequenceBatch& dg);
    double discriminative_pass(const BatchInput& in, ItemPool& pool, const NegativeSet& negs,
                               SequenceBatch& dg);
    void route_input_grads(const BatchInput& in, ItemPool& pool, const SequenceBatch& dg);
    void finalize_item_grads(ItemPool& pool);

    const SplitDataset& split_;
    Recommender& model_;
    const TrainConfig& cfg_;
    const LossReporter& reporter_;
    Rng rng_;
    AdamW opt_;
    bool live_text_{false};
};

TrainResult Trainer::run() {
    cfg_.validate();
    if (cfg_.mode != model_.mode) {
        throw ConfigError("training mode " + train_mode_to_string(cfg_.mode) +
                          " does not match the model objective " +
                          train_mode_to_string(model_.mode));
    }
    if (split_.train.empty()) throw DataError("split contains no training sequences");
    for (const auto& s : split_.train) {
        if (s.items.size() < 2) {
            throw DataError("training sequence for user '" + s.user_id +
                            "' is shorter than 2 items");
        }
    }

    if (model_.cfg.frozen_items && !model_.has_frozen_vectors) model_.freeze_items();
    live_text_ = model_.cfg.item_source == ItemSource::text && !model_.has_frozen_vectors;

    opt_.attach(model_);

    TrainResult res;
    std::vector<size_t> order(split_.train.size());
    std::iota(order.begin(), order.end(), 0);
    size_t step = 0;
    size_t bad_streak = 0;
    for (size_t epoch = 1; epoch <= cfg_.epochs; ++epoch) {
        for (size_t i = order.size() - 1; i > 0; --i) {
            const size_t j = static_cast<size_t>(rng_.uniform_below(i + 1));
            std::swap(order[i], order[j]);
        }
        for (size_t start = 0; start < order.size(); start += cfg_.batch_size) {
            if (cfg_.max_steps != 0 && step >= cfg_.max_steps) return res;
            const size_t end = std::min(order.size(), start + cfg_.batch_size);
            std::vector<size_t> rows(order.begin() + start, order.begin() + end);
            ++step;
            double loss = 0.0;
            try {
                loss = do_step(rows);
                bad_streak = 0;
            } catch (const NumericError& e) {
                ++bad_streak;
                model_.zero_grad();
                if (bad_streak >= 2) {
                    throw NumericError("training aborted at step " + std::to_string(step) +
                                       " after two consecutive non-finite losses: " + e.what());
                }
                continue;
            }
            LossRecord rec{step, epoch, loss, model_.sim.temperature()};
            res.history.push_back(rec);
            if (reporter_) reporter_(rec);
        }
    }
    return res;
}

double Trainer::do_step(const std::vector<size_t>& rows) {
    model_.zero_grad();

    ItemPool pool;
    std::vector<std::string> exclude;
    for (const size_t r : rows) {
        for (const auto& [id, ts] : split_.train[r].items) {
            pool.add(id);
            exclude.push_back(id);
        }
    }
    NegativeSet negs = sample_negatives(rng_, model_.catalog, exclude, cfg_.negatives);
    for (const auto& id : negs.ids) pool.add(id);

    encode_pool(pool);
    BatchInput in = build_inputs(rows, pool);

    SequenceBatch dg = SequenceBatch::zeros(in.seq.batch, in.seq.seq_len, in.seq.dim);
    dg.lengths = in.seq.lengths;
    if (in.seq.extra_dim != 0) dg.alloc_extras(in.seq.extra_dim);

    double gen = 0.0, cls = 0.0, loss = 0.0;
    if (cfg_.mode == TrainMode::generative) {
        gen = generative_pass(in, pool, negs, 1.0, dg);
        loss = gen;
    } else {
        if (cfg_.lambda > 0.0) gen = generative_pass(in, pool, negs, cfg_.lambda, dg);
        cls = discriminative_pass(in, pool, negs, dg);
        loss = combined_loss(gen, cls, cfg_.lambda);
    }
    if (!std::isfinite(loss)) throw NumericError("step loss is non-finite");

    route_input_grads(in, pool, dg);
    finalize_item_grads(pool);
    opt_.step();
    return loss;
}

void Trainer::encode_pool(ItemPool& pool) {
    const size_t n = pool.ids.size();
    pool.vec.resize(n);
    pool.grad.assign(n, std::vector<double>(model_.cfg.d_item, 0.0));
    if (live_text_) pool.caches.resize(n);
    for (size_t k = 0; k < n; ++k) {
        if (live_text_) {
            auto it = model_.catalog.index.find(pool.ids[k]);
            if (it == model_.catalog.index.end()) {
                throw DataError("unknown item '" + pool.ids[k] + "' in training batch");
            }
            pool.vec[k] = model_.item_enc.encode(model_.item_tokens[it->second],
                                                 &pool.caches[k]);
        } else {
            pool.vec[k] = model_.item_vector(pool.ids[k], nullptr);
        }
    }
}

BatchInput Trainer::build_inputs(const std::vector<size_t>& rows, ItemPool& pool) {
    size_t max_len = 0;
    for (const size_t r : rows) max_len = std::max(max_len, split_.train[r].items.size());

    BatchInput in;
    in.seq = SequenceBatch::zeros(rows.size(), max_len, model_.cfg.d_item);
    in.item_at.resize(rows.size());
    const bool with_time = model_.cfg.use_time;
    if (with_time) {
        in.seq.alloc_extras(model_.cfg.d_user);
        in.tcache.resize(rows.size());
    }

    for (size_t b = 0; b < rows.size(); ++b) {
        const auto& items = split_.train[rows[b]].items;
        in.seq.lengths[b] = items.size();
        in.item_at[b].resize(items.size());
        if (with_time) in.tcache[b].resize(items.size());
        for (size_t pos = 0; pos < items.size(); ++pos) {
            const auto& [id, ts] = items[pos];
            const size_t k = pool.pos.at(id);
            in.item_at[b][pos] = k;
            double* dst = in.seq.row(b, pos);
            std::memcpy(dst, pool.vec[k].data(), model_.cfg.d_item * sizeof(double));
            if (model_.cfg.use_id_feature) {
                const auto idv = model_.id_fusion.lookup(id);
                axpy(1.0, idv.data(), dst, model_.cfg.d_item);
            }
            if (with_time) {
                const auto tv = model_.time_emb.forward(ts, &in.tcache[b][pos]);
                std::memcpy(in.seq.extra_row(b, pos), tv.data(),
                            model_.cfg.d_user * sizeof(double));
            }
        }
    }
    return in;
}

double Trainer::generative_pass(const BatchInput& in, ItemPool& pool, const NegativeSet& negs,
                                double grad_scale, SequenceBatch& dg) {
    const size_t d_item = model_.cfg.d_item;
    const size_t d_user = model_.cfg.d_user;

    UserSeqCache cache;
    PredictionBatch pred = model_.user.encode_user_sequence(in.seq, &cache);

    std::vector<std::pair<size_t, size_t>> slots;  // (row, position)
    std::vector<size_t> pos_item;                  // pool index of the positive
    for (size_t b = 0; b < in.seq.batch; ++b) {
        const size_t len = in.seq.lengths[b];
        for (size_t i = 0; i + 1 < len; ++i) {
            slots.emplace_back(b, i);
            pos_item.push_back(in.item_at[b][i + 1]);
        }
    }
    if (slots.empty()) throw DataError("batch has no next-item targets");

    const size_t m = slots.size();
    Mat anchors(m, d_user);
    Mat pos_raw(m, d_item);
    for (size_t j = 0; j < m; ++j) {
        const auto [b, i] = slots[j];
        std::memcpy(anchors.row(j), pred.row(b, i), d_user * sizeof(double));
        std::memcpy(pos_raw.row(j), pool.vec[pos_item[j]].data(), d_item * sizeof(double));
    }
    Mat neg_raw(negs.ids.size(), d_item);
    for (size_t k = 0; k < negs.ids.size(); ++k) {
        std::memcpy(neg_raw.row(k), pool.vec[pool.pos.at(negs.ids[k])].data(),
                    d_item * sizeof(double));
    }

    // Targets live in the user model's space: map through the shared input
    // projection when the dimensions differ.
    const bool with_proj = model_.user.has_proj;
    LinearCache cpos, cneg;
    Mat positives = with_proj ? model_.user.proj.forward(pos_raw, &cpos) : pos_raw;
    Mat negatives = with_proj ? model_.user.proj.forward(neg_raw, &cneg) : neg_raw;

    InfoNceGrads g;
    const double loss = infonce_loss(anchors, positives, negatives, model_.sim, &g, grad_scale);

    PredictionBatch dpred;
    dpred.batch = pred.batch;
    dpred.seq_len = pred.seq_len;
    dpred.dim = pred.dim;
    dpred.lengths = pred.lengths;
    dpred.data.assign(pred.data.size(), 0.0);
    for (size_t j = 0; j < m; ++j) {
        const auto [b, i] = slots[j];
        std::memcpy(dpred.row(b, i), g.d_anchors.row(j), d_user * sizeof(double));
    }
    SequenceBatch din = model_.user.backward_sequence(dpred, cache);
    for (size_t b = 0; b < dg.batch; ++b) {
        const size_t len = dg.lengths[b];
        if (len == 0) continue;
        axpy(1.0, din.row(b, 0), dg.row(b, 0), len * d_item);
        if (dg.extra_dim != 0 && din.extra_dim != 0) {
            axpy(1.0, din.extra_row(b, 0), dg.extra_row(b, 0), len * dg.extra_dim);
        }
    }

    Mat dpos_raw = with_proj ? model_.user.proj.backward(g.d_positives, cpos)
                             : std::move(g.d_positives);
    Mat dneg_raw = with_proj ? model_.user.proj.backward(g.d_negatives, cneg)
                             : std::move(g.d_negatives);
    for (size_t j = 0; j < m; ++j) {
        axpy(1.0, dpos_raw.row(j), pool.grad[pos_item[j]].data(), d_item);
    }
    for (size_t k = 0; k < negs.ids.size(); ++k) {
        axpy(1.0, dneg_raw.row(k), pool.grad[pool.pos.at(negs.ids[k])].data(), d_item);
    }
    return loss;
}

double Trainer::discriminative_pass(const BatchInput& in, ItemPool& pool,
                                    const NegativeSet& negs, SequenceBatch& dg) {
    const size_t d_item = model_.cfg.d_item;
    const size_t d_user = model_.cfg.d_user;
    const bool with_time = in.seq.extra_dim != 0;

    size_t pairs = 0;
    for (size_t b = 0; b < in.seq.batch; ++b) pairs += in.seq.lengths[b] - 1;
    const size_t sample_count = pairs * (1 + negs.ids.size());
    const double inv_n = 1.0 / static_cast<double>(sample_count);

    // Candidate pool indices per sample: the true next item, then the shared
    // negatives.
    std::vector<size_t> neg_pool(negs.ids.size());
    for (size_t k = 0; k < negs.ids.size(); ++k) neg_pool[k] = pool.pos.at(negs.ids[k]);

    double total = 0.0;
    for (size_t b = 0; b < in.seq.batch; ++b) {
        const size_t len = in.seq.lengths[b];
        for (size_t i = 0; i + 1 < len; ++i) {
            const size_t hlen = i + 1;
            const double* hist = in.seq.row(b, 0);
            const double* extras = with_time ? in.seq.extra_row(b, 0) : nullptr;
            const size_t tgt = in.item_at[b][i + 1];

            if (cfg_.mode == TrainMode::disc_early) {
                auto one = [&](size_t cand, double label) {
                    RowCache rc;
                    HeadCache hc;
                    const double logit = model_.user.early_fusion_logit(
                        hist, hlen, extras, pool.vec[cand].data(), &rc, &hc);
                    double dlogit = 0.0;
                    total += bce_loss_from_logit(logit, label, &dlogit);
                    dlogit *= inv_n;
                    const auto dcross = model_.user.head.backward(dlogit, hc);
                    Mat dh(hlen + 1, d_user);
                    std::memcpy(dh.row(hlen), dcross.data(), d_user * sizeof(double));
                    std::vector<double> dtgt(d_item, 0.0);
                    model_.user.backward_row(dh, rc, dg.row(b, 0),
                                             with_time ? dg.extra_row(b, 0) : nullptr,
                                             dtgt.data());
                    axpy(1.0, dtgt.data(), pool.grad[cand].data(), d_item);
                };
                one(tgt, 1.0);
                for (const size_t k : neg_pool) one(k, 0.0);
            } else {
                RowCache rc;
                const auto uemb =
                    model_.user.late_fusion_user_embedding(hist, hlen, extras, &rc);
                std::vector<double> du(d_user, 0.0);
                auto one = [&](size_t cand, double label) {
                    HeadCache hc;
                    const double logit =
                        model_.user.late_fusion_logit(uemb, pool.vec[cand], &hc);
                    double dlogit = 0.0;
                    total += bce_loss_from_logit(logit, label, &dlogit);
                    dlogit *= inv_n;
                    const auto din = model_.user.head.backward(dlogit, hc);
                    for (size_t j = 0; j < d_user; ++j) du[j] += din[j];
                    axpy(1.0, din.data() + d_user, pool.grad[cand].data(), d_item);
                };
                one(tgt, 1.0);
                for (const size_t k : neg_pool) one(k, 0.0);
                Mat dh(hlen + 1, d_user);
                std::memcpy(dh.row(hlen), du.data(), d_user * sizeof(double));
                model_.user.backward_row(dh, rc, dg.row(b, 0),
                                         with_time ? dg.extra_row(b, 0) : nullptr, nullptr);
            }
        }
    }
    const double loss = total * inv_n;
    if (!std::isfinite(loss)) throw NumericError("classification loss is non-finite");
    return loss;
}

void Trainer::route_input_grads(const BatchInput& in, ItemPool& pool, const SequenceBatch& dg) {
    const size_t d_item = model_.cfg.d_item;
    for (size_t b = 0; b < dg.batch; ++b) {
        const size_t len = dg.lengths[b];
        for (size_t pos = 0; pos < len; ++pos) {
            const size_t k = in.item_at[b][pos];
            const double* row = dg.row(b, pos);
            axpy(1.0, row, pool.grad[k].data(), d_item);
            if (model_.cfg.use_id_feature) {
                model_.id_fusion.accumulate_grad(pool.ids[k], row);
            }
            if (dg.extra_dim != 0) {
                std::vector<double> dt(dg.extra_row(b, pos),
                                       dg.extra_row(b, pos) + dg.extra_dim);
                model_.time_emb.backward(dt, in.tcache[b][pos]);
            }
        }
    }
}

void Trainer::finalize_item_grads(ItemPool& pool) {
    if (live_text_) {
        for (size_t k = 0; k < pool.ids.size(); ++k) {
            model_.item_enc.backward(pool.grad[k], pool.caches[k]);
        }
    } else if (model_.cfg.item_source == ItemSource::id_table) {
        for (size_t k = 0; k < pool.ids.size(); ++k) {
            model_.user.id_input.accumulate_grad(pool.ids[k], pool.grad[k].data());
        }
    }
    // Frozen or store-injected vectors are fixed inputs: no gradient.
}

}  // namespace

TrainResult train(const SplitDataset& split, Recommender& model, const TrainConfig& cfg,
                  const LossReporter& reporter) {
    Trainer t(split, model, cfg, reporter);
    return t.run();
}

}  // namespace hllm
