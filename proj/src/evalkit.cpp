#include "hllm/evalkit.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <sstream>

#include "hllm/error.hpp"
#include "json.hpp"

namespace hllm {

namespace {

struct HistoryRows {
    Mat emb;     // len x d_item, fused
    Mat extras;  // len x d_user when time fusion is on, else empty
};

HistoryRows build_history(const std::vector<std::pair<std::string, int64_t>>& prefix,
                          const std::map<std::string, std::vector<double>>& vecs,
                          const Recommender& model) {
    if (prefix.empty()) throw DataError("evaluation prefix is empty");
    HistoryRows h;
    h.emb = Mat(prefix.size(), model.cfg.d_item);
    if (model.cfg.use_time) h.extras = Mat(prefix.size(), model.cfg.d_user);
    for (size_t i = 0; i < prefix.size(); ++i) {
        const auto& [id, ts] = prefix[i];
        auto it = vecs.find(id);
        if (it == vecs.end()) throw DataError("missing embedding for item '" + id + "'");
        if (it->second.size() != model.cfg.d_item) {
            throw DataError("embedding for item '" + id + "' has wrong dimension");
        }
        double* dst = h.emb.row(i);
        std::memcpy(dst, it->second.data(), model.cfg.d_item * sizeof(double));
        if (model.cfg.use_id_feature) {
            const auto idv = model.id_fusion.lookup(id);
            axpy(1.0, idv.data(), dst, model.cfg.d_item);
        }
        if (model.cfg.use_time) {
            const auto tv = model.time_emb.forward(ts, nullptr);
            std::memcpy(h.extras.row(i), tv.data(), model.cfg.d_user * sizeof(double));
        }
    }
    return h;
}

}  // namespace

std::map<std::string, double> score_all_items(
    const std::vector<std::pair<std::string, int64_t>>& prefix,
    const std::map<std::string, std::vector<double>>& item_vectors, const Recommender& model) {
    const HistoryRows h = build_history(prefix, item_vectors, model);
    const size_t len = prefix.size();
    const double* extras = model.cfg.use_time ? h.extras.row(0) : nullptr;
    const size_t d_item = model.cfg.d_item;
    const size_t d_user = model.cfg.d_user;

    std::map<std::string, double> scores;
    switch (model.mode) {
        case TrainMode::generative: {
            Mat out = model.user.run_row(h.emb.row(0), len, extras, nullptr, false, nullptr);
            const double* pred = out.row(len - 1);
            for (const auto& [id, v] : item_vectors) {
                if (model.user.has_proj) {
                    Mat c(1, d_item);
                    std::memcpy(c.row(0), v.data(), d_item * sizeof(double));
                    Mat cu = model.user.proj.forward(c, nullptr);
                    scores[id] = model.sim.forward(pred, cu.row(0), d_user);
                } else {
                    scores[id] = model.sim.forward(pred, v.data(), d_user);
                }
            }
            break;
        }
        case TrainMode::disc_late: {
            const auto uemb =
                model.user.late_fusion_user_embedding(h.emb.row(0), len, extras, nullptr);
            for (const auto& [id, v] : item_vectors) {
                scores[id] = model.user.late_fusion_logit(uemb, v, nullptr);
            }
            break;
        }
        case TrainMode::disc_early: {
            for (const auto& [id, v] : item_vectors) {
                scores[id] = model.user.early_fusion_logit(h.emb.row(0), len, extras, v.data(),
                                                           nullptr, nullptr);
            }
            break;
        }
    }
    return scores;
}

RankingResult rank_of_target(const std::map<std::string, double>& scores,
                             const std::string& target,
                             const std::unordered_set<std::string>& exclude) {
    if (exclude.count(target)) {
        throw DataError("target item '" + target + "' is excluded from the candidate set");
    }
    auto it = scores.find(target);
    if (it == scores.end()) {
        throw DataError("target item '" + target + "' has no score");
    }
    const double target_score = it->second;
    size_t greater = 0, tied_ahead = 0, candidates = 0;
    for (const auto& [id, s] : scores) {
        if (exclude.count(id)) continue;
        ++candidates;
        if (id == target) continue;
        if (s > target_score) {
            ++greater;
        } else if (s == target_score && id < target) {
            ++tied_ahead;
        }
    }
    RankingResult r;
    r.rank = 1 + greater + tied_ahead;
    r.candidate_count = candidates;
    return r;
}

double recall_at_k(const std::vector<RankingResult>& results, size_t k) {
    if (k == 0) throw ConfigError("K must be at least 1");
    if (results.empty()) throw DataError("no ranking results to aggregate");
    size_t hits = 0;
    for (const auto& r : results) {
        if (r.rank <= k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

double ndcg_at_k(const std::vector<RankingResult>& results, size_t k) {
    if (k == 0) throw ConfigError("K must be at least 1");
    if (results.empty()) throw DataError("no ranking results to aggregate");
    double total = 0.0;
    for (const auto& r : results) {
        if (r.rank <= k) {
            total += 1.0 / std::log2(static_cast<double>(r.rank) + 1.0);
        }
    }
    return total / static_cast<double>(results.size());
}

void EvalConfig::validate() const {
    if (ks.empty()) throw ConfigError("evaluation needs at least one K");
    for (const size_t k : ks) {
        if (k == 0) throw ConfigError("K must be at least 1");
    }
    if (split_part != "test" && split_part != "valid") {
        throw ConfigError("split part must be 'test' or 'valid', got '" + split_part + "'");
    }
}

MetricsReport evaluate(const SplitDataset& split, const Recommender& model,
                       const EvalConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const auto& pairs = cfg.split_part == "valid" ? split.valid : split.test;
    if (pairs.empty()) {
        throw DataError("split part '" + cfg.split_part + "' has no evaluation pairs");
    }
    const auto item_vectors = model.catalog_vectors();

    std::vector<RankingResult> results;
    results.reserve(pairs.size());
    for (const auto& p : pairs) {
        try {
            const auto scores = score_all_items(p.input, item_vectors, model);
            std::unordered_set<std::string> excl;
            if (cfg.exclude_history) {
                for (const auto& [id, ts] : p.input) excl.insert(id);
                excl.erase(p.target_item);  // a repeat consumption stays rankable
            }
            RankingResult rr = rank_of_target(scores, p.target_item, excl);
            rr.user_id = p.user_id;
            results.push_back(std::move(rr));
        } catch (const DataError& e) {
            throw DataError("evaluating user '" + p.user_id + "': " + e.what());
        } catch (const NumericError& e) {
            throw NumericError("evaluating user '" + p.user_id + "': " + e.what());
        }
    }

    MetricsReport rep;
    rep.ks = cfg.ks;
    for (const size_t k : cfg.ks) {
        rep.recall.push_back(recall_at_k(results, k));
        rep.ndcg.push_back(ndcg_at_k(results, k));
    }
    rep.user_count = results.size();
    rep.config_fingerprint = cfg.config_fingerprint;
    if (cfg.record_duration) {
        rep.duration_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return rep;
}

std::string MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["user_count"] = user_count;
    j["config_fingerprint"] = config_fingerprint;
    j["duration_seconds"] = duration_seconds;
    nlohmann::ordered_json rec, ndc;
    for (size_t i = 0; i < ks.size(); ++i) {
        const std::string key = std::to_string(ks[i]);
        rec[key] = recall[i];
        ndc[key] = ndcg[i];
    }
    j["recall"] = rec;
    j["ndcg"] = ndc;
    return j.dump(2) + "\n";
}

std::string rank_dump(const std::vector<RankingResult>& results) {
    std::ostringstream out;
    for (const auto& r : results) {
        out << r.user_id << '\t' << r.rank << '\t' << r.candidate_count << '\n';
    }
    return out.str();
}

}  // namespace hllm
