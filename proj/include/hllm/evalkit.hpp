#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "hllm/corpus.hpp"
#include "hllm/model.hpp"

namespace hllm {

struct RankingResult {
    std::string user_id;
    size_t rank{0};  // 1 = best
    size_t candidate_count{0};
};

struct MetricsReport {
    std::vector<size_t> ks;
    std::vector<double> recall;  // parallel to ks
    std::vector<double> ndcg;    // parallel to ks
    size_t user_count{0};
    std::string config_fingerprint;
    double duration_seconds{0.0};

    std::string to_json() const;
};

struct EvalConfig {
    std::vector<size_t> ks{5, 10, 50, 200};
    bool exclude_history{true};
    std::string split_part{"test"};  // "test" or "valid"
    std::string config_fingerprint;
    bool record_duration{true};  // off = report 0.0, for byte-stable output

    void validate() const;
};

/// Scores every item in `item_vectors` against one user prefix, using the
/// model's objective mode: generative ranks by similarity to the predicted
/// next embedding; disc_late runs the head over one pooled user embedding per
/// candidate; disc_early runs one full sequence forward per candidate.
std::map<std::string, double> score_all_items(
    const std::vector<std::pair<std::string, int64_t>>& prefix,
    const std::map<std::string, std::vector<double>>& item_vectors, const Recommender& model);

/// Rank of the target among non-excluded items: 1 + strictly-greater count;
/// score ties are lost to lexicographically smaller ids. The target must not
/// be excluded.
RankingResult rank_of_target(const std::map<std::string, double>& scores,
                             const std::string& target,
                             const std::unordered_set<std::string>& exclude);

double recall_at_k(const std::vector<RankingResult>& results, size_t k);
double ndcg_at_k(const std::vector<RankingResult>& results, size_t k);

/// Full-corpus ranking over the chosen split part.
MetricsReport evaluate(const SplitDataset& split, const Recommender& model,
                       const EvalConfig& cfg);

/// Tab-separated per-user rank dump for debugging.
std::string rank_dump(const std::vector<RankingResult>& results);

}  // namespace hllm
