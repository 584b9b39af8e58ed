#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "hllm/nn.hpp"

namespace hllm {

/// UTC calendar decomposition of a Unix timestamp.
struct TimeParts {
    int year{1970};
    int month{1};
    int day{1};
    int hour{0};
    int minute{0};
    int second{0};
};

/// Splits a timestamp (seconds since epoch) into UTC calendar components.
/// Valid for timestamp >= 0 and year < 2100.
TimeParts split_time(int64_t timestamp);

/// Inverse of split_time (UTC).
int64_t compose_time(const TimeParts& parts);

// Row counts of the six component tables: year, month, day, hour, minute,
// second. Month and day keep row 0 unused.
constexpr size_t kTimeTableRows[6] = {2100, 13, 32, 24, 60, 60};

struct TimeEmbeddingCache {
    std::vector<int> indices;  // one row index per selected component
    Mat concat;                // 1 x (time_num * time_dim)
    LinearCache c1, c2;
    Mat pre_act;
};

/// Six per-component embedding tables merged by a two-layer perceptron into a
/// d_user vector. time_num in [1,6] selects the leading components (year
/// first), controlling time precision.
struct TimeEmbedding {
    std::vector<Param> tables;  // always six, sized per kTimeTableRows
    Linear merge1, merge2;
    size_t time_num{6};
    size_t time_dim{8};
    size_t out_dim{0};

    void init(size_t n_components, size_t component_dim, size_t d_out, Rng& rng,
              double sigma = 0.02);
    std::vector<double> forward(int64_t timestamp, TimeEmbeddingCache* cache) const;
    void backward(const std::vector<double>& d_out, const TimeEmbeddingCache& cache);
    void visit(const std::string& prefix, const ParamVisitor& fn);
};

/// Plain id -> row lookup table with a final out-of-vocabulary row for ids
/// that were not present when the table was built.
struct IdFeatureTable {
    Param table;  // (known + 1) x dim, last row = OOV
    std::unordered_map<std::string, size_t> rows;
    size_t dim{0};

    void init(const std::vector<std::string>& known_ids, size_t d, Rng& rng, double sigma = 0.02);
    size_t row_of(const std::string& item_id) const;
    std::vector<double> lookup(const std::string& item_id) const;
    void accumulate_grad(const std::string& item_id, const double* grad);
    void visit(const std::string& prefix, const ParamVisitor& fn);
};

/// Elementwise sum of an item embedding with auxiliary feature vectors.
/// All vectors must share one dimension.
std::vector<double> fuse_features(const std::vector<double>& item_emb,
                                  const std::vector<std::vector<double>>& extras);

}  // namespace hllm
