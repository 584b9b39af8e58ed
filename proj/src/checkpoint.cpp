#include "hllm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "hllm/error.hpp"
#include "json.hpp"

namespace hllm {

namespace {

constexpr char kMagic[8] = {'H', 'L', 'L', 'M', 'C', 'K', 'P', '1'};

void put_u64_le(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t get_u64_le(const unsigned char* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

nlohmann::ordered_json parse_header(const std::string& blob, const std::string& path,
                                    size_t* data_offset) {
    if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
        throw DataError("'" + path + "' is not a checkpoint file");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
    const uint64_t header_len = get_u64_le(p + 8);
    if (blob.size() < 16 + header_len) {
        throw DataError("checkpoint '" + path + "' has a truncated header");
    }
    nlohmann::ordered_json header;
    try {
        header = nlohmann::ordered_json::parse(blob.substr(16, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint '" + path + "' header is not valid JSON: " + e.what());
    }
    if (data_offset) *data_offset = 16 + static_cast<size_t>(header_len);
    return header;
}

}  // namespace

void save_checkpoint(Recommender& model, const RunConfig& cfg, const std::string& path) {
    std::vector<std::pair<std::string, Param*>> entries;
    model.visit([&entries](const std::string& name, Param& p) { entries.emplace_back(name, &p); });

    nlohmann::ordered_json header;
    header["config"] = nlohmann::ordered_json::parse(cfg.to_json());
    header["fingerprint"] = cfg.fingerprint();
    nlohmann::ordered_json params = nlohmann::ordered_json::array();
    for (const auto& [name, p] : entries) {
        nlohmann::ordered_json e;
        e["name"] = name;
        e["rows"] = p->v.rows;
        e["cols"] = p->v.cols;
        params.push_back(e);
    }
    header["params"] = params;
    const std::string header_text = header.dump();

    std::string blob;
    blob.append(kMagic, sizeof(kMagic));
    put_u64_le(blob, header_text.size());
    blob += header_text;
    for (const auto& [name, p] : entries) {
        for (const double x : p->v.m) put_u64_le(blob, std::bit_cast<uint64_t>(x));
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << blob) || !out.flush()) {
        throw IoError("cannot write checkpoint to '" + path + "'");
    }
}

RunConfig load_checkpoint_config(const std::string& path) {
    const std::string blob = read_file(path);
    const auto header = parse_header(blob, path, nullptr);
    if (!header.contains("config") || !header.contains("fingerprint")) {
        throw DataError("checkpoint '" + path + "' header is missing fields");
    }
    RunConfig cfg = RunConfig::from_json_text(header["config"].dump());
    if (cfg.fingerprint() != header["fingerprint"].get<std::string>()) {
        throw DataError("checkpoint '" + path + "' fingerprint does not match its config");
    }
    return cfg;
}

void load_checkpoint_params(Recommender& model, const std::string& path) {
    const std::string blob = read_file(path);
    size_t offset = 0;
    const auto header = parse_header(blob, path, &offset);
    if (!header.contains("params") || !header["params"].is_array()) {
        throw DataError("checkpoint '" + path + "' header lists no parameters");
    }

    struct Entry {
        size_t rows, cols, offset;
    };
    std::unordered_map<std::string, Entry> stored;
    size_t cursor = offset;
    for (const auto& e : header["params"]) {
        const std::string name = e.at("name").get<std::string>();
        const size_t rows = e.at("rows").get<size_t>();
        const size_t cols = e.at("cols").get<size_t>();
        stored[name] = Entry{rows, cols, cursor};
        cursor += rows * cols * 8;
    }
    if (cursor != blob.size()) {
        throw DataError("checkpoint '" + path + "' data size does not match its header");
    }

    size_t matched = 0;
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
    model.visit([&](const std::string& name, Param& prm) {
        auto it = stored.find(name);
        if (it == stored.end()) {
            throw DataError("checkpoint '" + path + "' is missing parameter '" + name + "'");
        }
        const Entry& e = it->second;
        if (e.rows != prm.v.rows || e.cols != prm.v.cols) {
            throw DataError("checkpoint '" + path + "' parameter '" + name +
                            "' has shape " + std::to_string(e.rows) + "x" +
                            std::to_string(e.cols) + ", model expects " +
                            std::to_string(prm.v.rows) + "x" + std::to_string(prm.v.cols));
        }
        for (size_t i = 0; i < prm.v.size(); ++i) {
            prm.v.m[i] = std::bit_cast<double>(get_u64_le(p + e.offset + i * 8));
        }
        ++matched;
    });
    if (matched != stored.size()) {
        throw DataError("checkpoint '" + path + "' holds " + std::to_string(stored.size()) +
                        " parameters, model has " + std::to_string(matched));
    }
}

}  // namespace hllm
