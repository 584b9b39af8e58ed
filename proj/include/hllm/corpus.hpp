#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace hllm {

/// One catalog entry: an id plus free-text attributes. At least one of
/// tag/title/description must be non-empty.
struct ItemRecord {
    std::string item_id;
    std::string tag;
    std::string title;
    std::string description;
};

struct Catalog {
    std::vector<ItemRecord> items;                       // input order preserved
    std::unordered_map<std::string, size_t> index;       // item_id -> position

    bool contains(const std::string& id) const { return index.count(id) != 0; }
    const ItemRecord& get(const std::string& id) const { return items[index.at(id)]; }
    size_t size() const { return items.size(); }
};

struct Interaction {
    std::string user_id;
    std::string item_id;
    int64_t timestamp{0};
};

/// A user's interactions sorted by timestamp ascending, ties kept in input
/// order.
struct UserSequence {
    std::string user_id;
    std::vector<std::pair<std::string, int64_t>> items;  // (item_id, timestamp)
};

/// Leave-one-out evaluation pair: the model sees `input` and must rank
/// `target_item` among all candidates.
struct EvalPair {
    std::string user_id;
    std::vector<std::pair<std::string, int64_t>> input;
    std::string target_item;
    int64_t target_timestamp{0};
};

/// Per-user leave-one-out split. The train part is the sequence minus its
/// last element and is consumed with internal next-item targets.
struct SplitDataset {
    std::vector<UserSequence> train;
    std::vector<EvalPair> valid;
    std::vector<EvalPair> test;
    Catalog catalog;
};

enum class Attribute { tag, title, description };

struct AttributeSet {
    bool tag{true};
    bool title{true};
    bool description{true};

    bool any() const { return tag || title || description; }
};

/// Parses a newline-delimited JSON-object-per-line items file.
/// Throws DataError on malformed lines or duplicate ids, with line numbers.
Catalog load_items(const std::string& path);

/// Writes the catalog back in the same on-disk format (round-trip safe).
void save_items(const Catalog& catalog, const std::string& path);

/// Parses a tab-separated (user_id, item_id, timestamp) file with no header.
/// Every item_id must exist in the catalog.
std::vector<Interaction> load_interactions(const std::string& path, const Catalog& catalog);

struct SequenceBuildResult {
    std::vector<UserSequence> sequences;  // sorted by user_id
    size_t dropped_users{0};              // users with fewer than min_len interactions
};

/// Groups interactions per user, sorts chronologically (stable on ties),
/// keeps the most recent max_len entries, drops users shorter than min_len.
SequenceBuildResult build_sequences(const std::vector<Interaction>& interactions,
                                    size_t min_len, size_t max_len);

/// Flattens selected non-empty attributes as "name: value " in the fixed
/// order tag, title, description, prepended with `prompt`.
/// Throws DataError when every selected attribute is empty.
std::string flatten_item_text(const ItemRecord& item, const AttributeSet& attributes,
                              const std::string& prompt);

/// Last interaction becomes the test target, second-to-last the validation
/// target; the rest is the train prefix. Requires length >= 3.
SplitDataset leave_one_out_split(const std::vector<UserSequence>& sequences,
                                 const Catalog& catalog);

/// Audit manifest: per-user boundaries of the split, as a JSON document.
std::string split_manifest_json(const SplitDataset& split, size_t dropped_users);

}  // namespace hllm
