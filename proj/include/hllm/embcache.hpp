#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace hllm {

/// Immutable item-embedding matrix loaded from disk. Values are stored as
/// 32-bit floats; lookups widen to double.
struct EmbeddingStore {
    uint32_t dim{0};
    std::vector<float> data;       // count * dim, row-major
    std::vector<std::string> ids;  // row -> item id, ascending
    std::unordered_map<std::string, size_t> index;

    size_t count() const { return ids.size(); }
    std::optional<std::vector<double>> lookup(const std::string& item_id) const;
    /// Every row widened, keyed by item id.
    std::map<std::string, std::vector<double>> to_map() const;
};

/// Writes the binary matrix at `path` and the id index at `path`.idx.
/// Layout: 8-byte tag "HLLMEMB1", little-endian u32 dim, u64 count, then
/// count*dim little-endian f32 rows ordered by item id ascending. The index
/// is newline-delimited "item_id<TAB>row". Byte-identical across reruns.
void export_embeddings(const std::map<std::string, std::vector<double>>& embeddings,
                       const std::string& path);

EmbeddingStore load_embeddings(const std::string& path);

}  // namespace hllm
