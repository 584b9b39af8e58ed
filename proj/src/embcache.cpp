#include "hllm/embcache.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hllm/error.hpp"

namespace hllm {

namespace {

constexpr char kMagic[8] = {'H', 'L', 'L', 'M', 'E', 'M', 'B', '1'};

void put_u32_le(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64_le(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32_le(const unsigned char* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    return v;
}

uint64_t get_u64_le(const unsigned char* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    return v;
}

}  // namespace

std::optional<std::vector<double>> EmbeddingStore::lookup(const std::string& item_id) const {
    auto it = index.find(item_id);
    if (it == index.end()) return std::nullopt;
    const float* row = data.data() + it->second * dim;
    return std::vector<double>(row, row + dim);
}

std::map<std::string, std::vector<double>> EmbeddingStore::to_map() const {
    std::map<std::string, std::vector<double>> out;
    for (size_t r = 0; r < ids.size(); ++r) {
        const float* row = data.data() + r * dim;
        out.emplace(ids[r], std::vector<double>(row, row + dim));
    }
    return out;
}

void export_embeddings(const std::map<std::string, std::vector<double>>& embeddings,
                       const std::string& path) {
    if (embeddings.empty()) throw DataError("refusing to export an empty embedding set");
    const size_t dim = embeddings.begin()->second.size();
    if (dim == 0) throw DataError("refusing to export zero-dimensional embeddings");
    for (const auto& [id, v] : embeddings) {
        if (v.size() != dim) {
            throw DataError("mixed embedding dimensions: item '" + id + "' has " +
                            std::to_string(v.size()) + ", expected " + std::to_string(dim));
        }
        for (const double x : v) {
            if (!std::isfinite(x)) {
                throw NumericError("non-finite embedding value for item '" + id + "'");
            }
        }
    }

    std::string blob;
    blob.reserve(20 + embeddings.size() * dim * 4);
    blob.append(kMagic, sizeof(kMagic));
    put_u32_le(blob, static_cast<uint32_t>(dim));
    put_u64_le(blob, static_cast<uint64_t>(embeddings.size()));

    std::ostringstream idx;
    size_t row = 0;
    for (const auto& [id, v] : embeddings) {  // std::map iterates ids ascending
        for (const double x : v) {
            put_u32_le(blob, std::bit_cast<uint32_t>(static_cast<float>(x)));
        }
        idx << id << '\t' << row << '\n';
        ++row;
    }

    std::ofstream mat(path, std::ios::binary | std::ios::trunc);
    if (!mat || !(mat << blob) || !mat.flush()) {
        throw IoError("cannot write embedding matrix to '" + path + "'");
    }
    const std::string idx_path = path + ".idx";
    std::ofstream side(idx_path, std::ios::binary | std::ios::trunc);
    if (!side || !(side << idx.str()) || !side.flush()) {
        throw IoError("cannot write embedding index to '" + idx_path + "'");
    }
}

EmbeddingStore load_embeddings(const std::string& path) {
    std::ifstream mat(path, std::ios::binary);
    if (!mat) throw IoError("cannot open embedding matrix '" + path + "'");
    std::string blob((std::istreambuf_iterator<char>(mat)), std::istreambuf_iterator<char>());
    if (blob.size() < 20) throw DataError("embedding matrix '" + path + "' is too short");
    if (std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
        throw DataError("embedding matrix '" + path + "' has the wrong format tag");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
    EmbeddingStore store;
    store.dim = get_u32_le(p + 8);
    const uint64_t count = get_u64_le(p + 12);
    if (store.dim == 0) throw DataError("embedding matrix '" + path + "' declares dimension 0");
    const size_t expected = 20 + static_cast<size_t>(count) * store.dim * 4;
    if (blob.size() != expected) {
        throw DataError("embedding matrix '" + path + "' holds " + std::to_string(blob.size()) +
                        " bytes, expected " + std::to_string(expected));
    }
    store.data.resize(static_cast<size_t>(count) * store.dim);
    for (size_t i = 0; i < store.data.size(); ++i) {
        store.data[i] = std::bit_cast<float>(get_u32_le(p + 20 + i * 4));
    }
    for (const float x : store.data) {
        if (!std::isfinite(x)) {
            throw DataError("embedding matrix '" + path + "' contains a non-finite value");
        }
    }

    const std::string idx_path = path + ".idx";
    std::ifstream side(idx_path);
    if (!side) throw IoError("cannot open embedding index '" + idx_path + "'");
    store.ids.assign(static_cast<size_t>(count), std::string());
    std::vector<bool> seen(static_cast<size_t>(count), false);
    std::string line;
    size_t lines = 0;
    size_t line_no = 0;
    while (std::getline(side, line)) {
        ++line_no;
        if (line.empty()) continue;
        const size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError("embedding index line " + std::to_string(line_no) + ": no separator");
        }
        const std::string id = line.substr(0, tab);
        size_t row = 0;
        try {
            row = std::stoull(line.substr(tab + 1));
        } catch (const std::exception&) {
            throw DataError("embedding index line " + std::to_string(line_no) +
                            ": bad row number");
        }
        if (row >= count) {
            throw DataError("embedding index line " + std::to_string(line_no) +
                            ": row out of range");
        }
        if (seen[row]) {
            throw DataError("embedding index line " + std::to_string(line_no) +
                            ": duplicate row " + std::to_string(row));
        }
        if (store.index.count(id)) {
            throw DataError("embedding index line " + std::to_string(line_no) +
                            ": duplicate item '" + id + "'");
        }
        seen[row] = true;
        store.ids[row] = id;
        store.index.emplace(id, row);
        ++lines;
    }
    if (lines != count) {
        throw DataError("embedding index '" + idx_path + "' lists " + std::to_string(lines) +
                        " rows, matrix header says " + std::to_string(count));
    }
    return store;
}

}  // namespace hllm
