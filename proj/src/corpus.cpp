#include "hllm/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "hllm/error.hpp"
#include "json.hpp"

namespace hllm {

namespace {

std::string json_string_field(const nlohmann::json& obj, const char* key, size_t line_no,
                              bool required) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        if (required) {
            throw DataError("items line " + std::to_string(line_no) + ": missing key '" + key + "'");
        }
        return {};
    }
    if (!it->is_string()) {
        throw DataError("items line " + std::to_string(line_no) + ": key '" + key +
                        "' is not a string");
    }
    return it->get<std::string>();
}

}  // namespace

Catalog load_items(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open items file: " + path);

    Catalog catalog;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;

        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            throw DataError("items line " + std::to_string(line_no) + ": not a JSON object");
        }

        ItemRecord rec;
        rec.item_id = json_string_field(obj, "item_id", line_no, true);
        rec.tag = json_string_field(obj, "tag", line_no, false);
        rec.title = json_string_field(obj, "title", line_no, false);
        rec.description = json_string_field(obj, "description", line_no, false);

        if (rec.item_id.empty()) {
            throw DataError("items line " + std::to_string(line_no) + ": empty item_id");
        }
        if (rec.tag.empty() && rec.title.empty() && rec.description.empty()) {
            throw DataError("items line " + std::to_string(line_no) + ": item '" + rec.item_id +
                            "' has no non-empty text attribute");
        }
        if (catalog.contains(rec.item_id)) {
            throw DataError("items line " + std::to_string(line_no) + ": duplicate item_id '" +
                            rec.item_id + "'");
        }
        catalog.index.emplace(rec.item_id, catalog.items.size());
        catalog.items.push_back(std::move(rec));
    }
    return catalog;
}

void save_items(const Catalog& catalog, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write items file: " + path);
    for (const auto& rec : catalog.items) {
        nlohmann::ordered_json obj;
        obj["item_id"] = rec.item_id;
        obj["tag"] = rec.tag;
        obj["title"] = rec.title;
        obj["description"] = rec.description;
        out << obj.dump() << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

std::vector<Interaction> load_interactions(const std::string& path, const Catalog& catalog) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open interactions file: " + path);

    std::vector<Interaction> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;

        const size_t t1 = line.find('\t');
        const size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos) {
            throw DataError("interactions line " + std::to_string(line_no) +
                            ": expected 3 tab-separated columns");
        }
        Interaction it;
        it.user_id = line.substr(0, t1);
        it.item_id = line.substr(t1 + 1, t2 - t1 - 1);
        const std::string ts = line.substr(t2 + 1);

        if (it.user_id.empty() || it.item_id.empty()) {
            throw DataError("interactions line " + std::to_string(line_no) + ": empty field");
        }
        auto res = std::from_chars(ts.data(), ts.data() + ts.size(), it.timestamp);
        if (res.ec != std::errc{} || res.ptr != ts.data() + ts.size()) {
            throw DataError("interactions line " + std::to_string(line_no) +
                            ": timestamp '" + ts + "' is not an integer");
        }
        if (it.timestamp < 0) {
            throw DataError("interactions line " + std::to_string(line_no) +
                            ": negative timestamp");
        }
        if (!catalog.contains(it.item_id)) {
            throw DataError("interactions line " + std::to_string(line_no) +
                            ": unknown item_id '" + it.item_id + "'");
        }
        out.push_back(std::move(it));
    }
    return out;
}

SequenceBuildResult build_sequences(const std::vector<Interaction>& interactions,
                                    size_t min_len, size_t max_len) {
    if (min_len < 3) throw ConfigError("min_len must be >= 3");
    if (max_len < min_len) throw ConfigError("max_len must be >= min_len");

    // Group preserving input order so the stable sort's tie rule is the file order.
    std::map<std::string, std::vector<std::pair<std::string, int64_t>>> per_user;
    for (const auto& it : interactions) {
        per_user[it.user_id].emplace_back(it.item_id, it.timestamp);
    }

    SequenceBuildResult result;
    for (auto& [user_id, items] : per_user) {
        std::stable_sort(items.begin(), items.end(),
                         [](const auto& a, const auto& b) { return a.second < b.second; });
        if (items.size() < min_len) {
            ++result.dropped_users;
            continue;
        }
        if (items.size() > max_len) {
            items.erase(items.begin(), items.end() - static_cast<ptrdiff_t>(max_len));
        }
        result.sequences.push_back(UserSequence{user_id, std::move(items)});
    }
    return result;
}

std::string flatten_item_text(const ItemRecord& item, const AttributeSet& attributes,
                              const std::string& prompt) {
    if (!attributes.any()) throw ConfigError("attribute subset is empty");

    std::string out = prompt;
    bool wrote = false;
    if (attributes.tag && !item.tag.empty()) {
        out += "tag: " + item.tag + " ";
        wrote = true;
    }
    if (attributes.title && !item.title.empty()) {
        out += "title: " + item.title + " ";
        wrote = true;
    }
    if (attributes.description && !item.description.empty()) {
        out += "description: " + item.description + " ";
        wrote = true;
    }
    if (!wrote) {
        throw DataError("item '" + item.item_id + "': all selected attributes are empty");
    }
    return out;
}

SplitDataset leave_one_out_split(const std::vector<UserSequence>& sequences,
                                 const Catalog& catalog) {
    SplitDataset split;
    split.catalog = catalog;
    for (const auto& seq : sequences) {
        const size_t n = seq.items.size();
        if (n < 3) {
            throw DataError("user '" + seq.user_id + "': sequence length " + std::to_string(n) +
                            " < 3, cannot split");
        }
        UserSequence train;
        train.user_id = seq.user_id;
        train.items.assign(seq.items.begin(), seq.items.end() - 1);

        EvalPair valid;
        valid.user_id = seq.user_id;
        valid.input.assign(seq.items.begin(), seq.items.end() - 2);
        valid.target_item = seq.items[n - 2].first;
        valid.target_timestamp = seq.items[n - 2].second;

        EvalPair test;
        test.user_id = seq.user_id;
        test.input.assign(seq.items.begin(), seq.items.end() - 1);
        test.target_item = seq.items[n - 1].first;
        test.target_timestamp = seq.items[n - 1].second;

        split.train.push_back(std::move(train));
        split.valid.push_back(std::move(valid));
        split.test.push_back(std::move(test));
    }
    return split;
}

std::string split_manifest_json(const SplitDataset& split, size_t dropped_users) {
    nlohmann::ordered_json doc;
    doc["user_count"] = split.train.size();
    doc["item_count"] = split.catalog.size();
    doc["dropped_users"] = dropped_users;
    auto users = nlohmann::ordered_json::array();
    for (size_t i = 0; i < split.train.size(); ++i) {
        nlohmann::ordered_json u;
        u["user_id"] = split.train[i].user_id;
        u["train_len"] = split.train[i].items.size();
        u["valid_target"] = split.valid[i].target_item;
        u["test_target"] = split.test[i].target_item;
        users.push_back(std::move(u));
    }
    doc["users"] = std::move(users);
    return doc.dump(2) + "\n";
}

}  // namespace hllm
