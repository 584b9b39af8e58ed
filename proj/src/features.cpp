#include "hllm/features.hpp"

#include <cassert>

#include "hllm/error.hpp"

namespace hllm {

namespace {

// Days-from-civil and its inverse, Howard Hinnant's algorithms (public
// domain), restricted here to the Gregorian calendar and int64 seconds.
int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const int64_t yoe = y - era * 400;
    const int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

void civil_from_days(int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const int64_t doe = z - era * 146097;
    const int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const int64_t mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yoe + era * 400 + (m <= 2 ? 1 : 0));
}

}  // namespace

TimeParts split_time(int64_t timestamp) {
    if (timestamp < 0) throw DataError("timestamp must be >= 0");
    const int64_t days = timestamp / 86400;
    const int64_t secs = timestamp % 86400;
    TimeParts p;
    civil_from_days(days, p.year, p.month, p.day);
    if (p.year >= 2100) {
        throw DataError("timestamp " + std::to_string(timestamp) + " falls in year " +
                        std::to_string(p.year) + ", beyond the supported range");
    }
    p.hour = static_cast<int>(secs / 3600);
    p.minute = static_cast<int>((secs % 3600) / 60);
    p.second = static_cast<int>(secs % 60);
    return p;
}

int64_t compose_time(const TimeParts& p) {
    return days_from_civil(p.year, p.month, p.day) * 86400 + p.hour * 3600 + p.minute * 60 +
           p.second;
}

void TimeEmbedding::init(size_t n_components, size_t component_dim, size_t d_out, Rng& rng,
                         double sigma) {
    if (n_components < 1 || n_components > 6) throw ConfigError("time_num must be in [1,6]");
    time_num = n_components;
    time_dim = component_dim;
    out_dim = d_out;
    tables.resize(6);
    for (size_t i = 0; i < 6; ++i) {
        tables[i].init(kTimeTableRows[i], component_dim, true);
        init_truncated_normal(tables[i].v, rng, sigma);
    }
    merge1.init(time_num * time_dim, d_out, true, rng, sigma);
    merge2.init(d_out, d_out, true, rng, sigma);
}

std::vector<double> TimeEmbedding::forward(int64_t timestamp, TimeEmbeddingCache* cache) const {
    const TimeParts p = split_time(timestamp);
    const int comps[6] = {p.year, p.month, p.day, p.hour, p.minute, p.second};

    Mat concat(1, time_num * time_dim);
    std::vector<int> indices(time_num);
    for (size_t i = 0; i < time_num; ++i) {
        indices[i] = comps[i];
        const double* row = tables[i].v.row(static_cast<size_t>(comps[i]));
        std::copy(row, row + time_dim, concat.row(0) + i * time_dim);
    }

    TimeEmbeddingCache local;
    TimeEmbeddingCache& c = cache ? *cache : local;
    Mat h = merge1.forward(concat, cache ? &c.c1 : nullptr);
    if (cache) {
        c.indices = std::move(indices);
        c.concat = concat;
        c.pre_act = h;
    }
    for (double& v : h.m) v = gelu(v);
    Mat out = merge2.forward(h, cache ? &c.c2 : nullptr);
    return std::vector<double>(out.m.begin(), out.m.end());
}

void TimeEmbedding::backward(const std::vector<double>& d_out, const TimeEmbeddingCache& cache) {
    Mat dy(1, out_dim);
    std::copy(d_out.begin(), d_out.end(), dy.row(0));
    Mat dh = merge2.backward(dy, cache.c2);
    for (size_t i = 0; i < dh.size(); ++i) dh.m[i] *= gelu_grad(cache.pre_act.m[i]);
    Mat dconcat = merge1.backward(dh, cache.c1);
    for (size_t i = 0; i < time_num; ++i) {
        axpy(1.0, dconcat.row(0) + i * time_dim,
             tables[i].g.row(static_cast<size_t>(cache.indices[i])), time_dim);
    }
}

void TimeEmbedding::visit(const std::string& prefix, const ParamVisitor& fn) {
    static const char* names[6] = {"year", "month", "day", "hour", "minute", "second"};
    for (size_t i = 0; i < 6; ++i) fn(prefix + ".table_" + names[i], tables[i]);
    merge1.visit(prefix + ".merge1", fn);
    merge2.visit(prefix + ".merge2", fn);
}

void IdFeatureTable::init(const std::vector<std::string>& known_ids, size_t d, Rng& rng,
                          double sigma) {
    dim = d;
    rows.clear();
    for (const auto& id : known_ids) {
        if (rows.count(id) == 0) rows.emplace(id, rows.size());
    }
    table.init(rows.size() + 1, d, true);
    init_truncated_normal(table.v, rng, sigma);
}

size_t IdFeatureTable::row_of(const std::string& item_id) const {
    auto it = rows.find(item_id);
    return it == rows.end() ? table.v.rows - 1 : it->second;  // last row = OOV
}

std::vector<double> IdFeatureTable::lookup(const std::string& item_id) const {
    const double* row = table.v.row(row_of(item_id));
    return std::vector<double>(row, row + dim);
}

void IdFeatureTable::accumulate_grad(const std::string& item_id, const double* grad) {
    axpy(1.0, grad, table.g.row(row_of(item_id)), dim);
}

void IdFeatureTable::visit(const std::string& prefix, const ParamVisitor& fn) {
    fn(prefix + ".table", table);
}

std::vector<double> fuse_features(const std::vector<double>& item_emb,
                                  const std::vector<std::vector<double>>& extras) {
    std::vector<double> out = item_emb;
    for (const auto& e : extras) {
        if (e.size() != out.size()) {
            throw DataError("fuse_features: dimension mismatch (" + std::to_string(out.size()) +
                            " vs " + std::to_string(e.size()) + ")");
        }
        axpy(1.0, e.data(), out.data(), out.size());
    }
    return out;
}

}  // namespace hllm
