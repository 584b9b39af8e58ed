#include "support.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hllm/rng.hpp"

namespace testsup {

namespace {

std::string padded(size_t value, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*zu", width, value);
    return buf;
}

void index_catalog(hllm::Catalog& catalog) {
    catalog.index.clear();
    for (size_t i = 0; i < catalog.items.size(); ++i) {
        catalog.index.emplace(catalog.items[i].item_id, i);
    }
}

}  // namespace

CyclicCorpus make_cyclic_corpus(size_t item_count, size_t user_count, size_t seq_len,
                                uint64_t seed) {
    CyclicCorpus out;
    for (size_t k = 0; k < item_count; ++k) {
        hllm::ItemRecord rec;
        rec.item_id = "n" + padded(k, 2);
        rec.title = "track " + rec.item_id;
        out.catalog.items.push_back(rec);
    }
    index_catalog(out.catalog);

    hllm::Rng rng(seed);
    for (size_t u = 0; u < user_count; ++u) {
        const std::string user_id = "u" + padded(u, 4);
        const size_t offset = rng.uniform_below(item_count);
        for (size_t j = 0; j < seq_len; ++j) {
            hllm::Interaction row;
            row.user_id = user_id;
            row.item_id = out.catalog.items[(offset + j) % item_count].item_id;
            row.timestamp = 1000000 + static_cast<int64_t>(j) * 60;
            out.interactions.push_back(row);
        }
    }
    return out;
}

CategoryCorpus make_category_corpus(size_t categories, size_t per_category,
                                    size_t cold_per_category, size_t user_count,
                                    size_t hist_len, uint64_t seed, bool cold_targets) {
    if (cold_per_category >= per_category) {
        throw std::invalid_argument("cold_per_category must leave warm items");
    }
    const size_t warm = per_category - cold_per_category;
    if (hist_len > warm) {
        throw std::invalid_argument("hist_len exceeds warm items per category");
    }

    CategoryCorpus out;
    for (size_t c = 0; c < categories; ++c) {
        for (size_t i = 0; i < per_category; ++i) {
            hllm::ItemRecord rec;
            rec.item_id = "c" + padded(c, 2) + "i" + padded(i, 2);
            rec.tag = "g" + padded(c, 2);
            rec.title = "v" + padded(c * per_category + i, 3);
            out.catalog.items.push_back(rec);
            if (i >= warm) out.cold_items.push_back(rec.item_id);
        }
    }
    index_catalog(out.catalog);

    hllm::Rng rng(seed);
    std::vector<size_t> cold_cursor(categories, 0);
    for (size_t u = 0; u < user_count; ++u) {
        const std::string user_id = "u" + padded(u, 4);
        const size_t c = u % categories;

        std::vector<size_t> pool(warm);
        for (size_t i = 0; i < warm; ++i) pool[i] = i;
        for (size_t i = warm; i-- > 1;) {
            const size_t j = rng.uniform_below(i + 1);
            std::swap(pool[i], pool[j]);
        }

        int64_t t = 100000 + static_cast<int64_t>(u) * 10000;
        auto push = [&](size_t item_idx) {
            hllm::Interaction row;
            row.user_id = user_id;
            row.item_id = out.catalog.items[c * per_category + item_idx].item_id;
            row.timestamp = t;
            t += 10;
            out.interactions.push_back(row);
        };
        for (size_t j = 0; j < hist_len; ++j) push(pool[j]);
        if (cold_targets) {
            push(warm + cold_cursor[c]);
            cold_cursor[c] = (cold_cursor[c] + 1) % cold_per_category;
        }
    }
    return out;
}

void write_interactions_tsv(const std::vector<hllm::Interaction>& interactions,
                            const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& row : interactions) {
        out << row.user_id << '\t' << row.item_id << '\t' << row.timestamp << '\n';
    }
}

std::filesystem::path scratch_dir(const std::string& name) {
    const std::filesystem::path dir = std::filesystem::current_path() / "scratch" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace testsup
