#include "hllm/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hllm/error.hpp"
#include "json.hpp"

namespace hllm {

namespace {

using njson = nlohmann::json;

uint64_t as_uint(const njson& v, const std::string& key) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<int64_t>() >= 0)) {
        throw ConfigError("config key '" + key + "' must be a non-negative integer");
    }
    return v.get<uint64_t>();
}

double as_double(const njson& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    return v.get<double>();
}

bool as_bool(const njson& v, const std::string& key) {
    if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be true or false");
    return v.get<bool>();
}

std::string as_string(const njson& v, const std::string& key) {
    if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
    return v.get<std::string>();
}

void set_key(RunConfig& c, const std::string& key, const njson& v) {
    if (key == "items_path") c.items_path = as_string(v, key);
    else if (key == "interactions_path") c.interactions_path = as_string(v, key);
    else if (key == "output_dir") c.output_dir = as_string(v, key);
    else if (key == "min_seq_len") c.min_seq_len = as_uint(v, key);
    else if (key == "max_seq_len") c.max_seq_len = as_uint(v, key);
    else if (key == "d_item") c.model.d_item = as_uint(v, key);
    else if (key == "d_user") c.model.d_user = as_uint(v, key);
    else if (key == "item_layers") c.model.item_layers = as_uint(v, key);
    else if (key == "user_layers") c.model.user_layers = as_uint(v, key);
    else if (key == "item_heads") c.model.item_heads = as_uint(v, key);
    else if (key == "user_heads") c.model.user_heads = as_uint(v, key);
    else if (key == "max_text_len") c.model.max_text_len = as_uint(v, key);
    else if (key == "pooling") c.model.pooling = pooling_from_string(as_string(v, key));
    else if (key == "attributes") {
        if (!v.is_array()) throw ConfigError("config key 'attributes' must be an array");
        AttributeSet a{false, false, false};
        for (const auto& e : v) {
            const std::string name = as_string(e, key);
            if (name == "tag") a.tag = true;
            else if (name == "title") a.title = true;
            else if (name == "description") a.description = true;
            else throw ConfigError("unknown attribute '" + name + "'");
        }
        c.model.attributes = a;
    }
    else if (key == "prompt") c.model.prompt = as_string(v, key);
    else if (key == "item_source") c.model.item_source = item_source_from_string(as_string(v, key));
    else if (key == "frozen_items") c.model.frozen_items = as_bool(v, key);
    else if (key == "use_time") c.model.use_time = as_bool(v, key);
    else if (key == "time_num") c.model.time_num = as_uint(v, key);
    else if (key == "time_dim") c.model.time_dim = as_uint(v, key);
    else if (key == "use_id_feature") c.model.use_id_feature = as_bool(v, key);
    else if (key == "normalize_sim") c.model.normalize_sim = as_bool(v, key);
    else if (key == "temperature_init") c.model.temperature_init = as_double(v, key);
    else if (key == "sigma") c.model.sigma = as_double(v, key);
    else if (key == "lr") c.trainer.lr = as_double(v, key);
    else if (key == "batch_size") c.trainer.batch_size = as_uint(v, key);
    else if (key == "epochs") c.trainer.epochs = as_uint(v, key);
    else if (key == "max_steps") c.trainer.max_steps = as_uint(v, key);
    else if (key == "negatives") c.trainer.negatives = as_uint(v, key);
    else if (key == "lambda") c.trainer.lambda = as_double(v, key);
    else if (key == "mode") c.trainer.mode = train_mode_from_string(as_string(v, key));
    else if (key == "seed") c.trainer.seed = as_uint(v, key);
    else if (key == "weight_decay") c.trainer.weight_decay = as_double(v, key);
    else if (key == "eval_ks") {
        if (!v.is_array() || v.empty()) {
            throw ConfigError("config key 'eval_ks' must be a non-empty array");
        }
        std::vector<size_t> ks;
        for (const auto& e : v) {
            const uint64_t k = as_uint(e, key);
            if (k == 0) throw ConfigError("eval_ks entries must be at least 1");
            ks.push_back(static_cast<size_t>(k));
        }
        c.eval_ks = ks;
    }
    else if (key == "exclude_history") c.exclude_history = as_bool(v, key);
    else if (key == "eval_split") c.eval_split = as_string(v, key);
    else if (key == "checkpoint_path") c.checkpoint_path = as_string(v, key);
    else if (key == "init_checkpoint") c.init_checkpoint = as_string(v, key);
    else if (key == "embeddings_path") c.embeddings_path = as_string(v, key);
    else if (key == "eval_from_store") c.eval_from_store = as_bool(v, key);
    else if (key == "deterministic") c.deterministic = as_bool(v, key);
    else throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    njson j;
    try {
        j = njson::parse(text);
    } catch (const njson::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c;
    for (const auto& [key, value] : j.items()) set_key(c, key, value);
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

void RunConfig::apply_override(const std::string& key, const std::string& value) {
    njson v;
    try {
        v = njson::parse(value);
    } catch (const njson::exception&) {
        v = value;  // bare words are strings
    }
    set_key(*this, key, v);
}

std::string RunConfig::to_json() const {
    nlohmann::ordered_json j;
    j["items_path"] = items_path;
    j["interactions_path"] = interactions_path;
    j["output_dir"] = output_dir;
    j["min_seq_len"] = min_seq_len;
    j["max_seq_len"] = max_seq_len;
    j["d_item"] = model.d_item;
    j["d_user"] = model.d_user;
    j["item_layers"] = model.item_layers;
    j["user_layers"] = model.user_layers;
    j["item_heads"] = model.item_heads;
    j["user_heads"] = model.user_heads;
    j["max_text_len"] = model.max_text_len;
    j["pooling"] = pooling_to_string(model.pooling);
    {
        nlohmann::ordered_json attrs = nlohmann::ordered_json::array();
        if (model.attributes.tag) attrs.push_back("tag");
        if (model.attributes.title) attrs.push_back("title");
        if (model.attributes.description) attrs.push_back("description");
        j["attributes"] = attrs;
    }
    j["prompt"] = model.prompt;
    j["item_source"] = item_source_to_string(model.item_source);
    j["frozen_items"] = model.frozen_items;
    j["use_time"] = model.use_time;
    j["time_num"] = model.time_num;
    j["time_dim"] = model.time_dim;
    j["use_id_feature"] = model.use_id_feature;
    j["normalize_sim"] = model.normalize_sim;
    j["temperature_init"] = model.temperature_init;
    j["sigma"] = model.sigma;
    j["lr"] = trainer.lr;
    j["batch_size"] = trainer.batch_size;
    j["epochs"] = trainer.epochs;
    j["max_steps"] = trainer.max_steps;
    j["negatives"] = trainer.negatives;
    j["lambda"] = trainer.lambda;
    j["mode"] = train_mode_to_string(trainer.mode);
    j["seed"] = trainer.seed;
    j["weight_decay"] = trainer.weight_decay;
    j["eval_ks"] = eval_ks;
    j["exclude_history"] = exclude_history;
    j["eval_split"] = eval_split;
    j["checkpoint_path"] = checkpoint_path;
    j["init_checkpoint"] = init_checkpoint;
    j["embeddings_path"] = embeddings_path;
    j["eval_from_store"] = eval_from_store;
    j["deterministic"] = deterministic;
    return j.dump(2) + "\n";
}

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string RunConfig::fingerprint() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(to_json())));
    return std::string(buf);
}

void RunConfig::validate() const {
    model.validate();
    trainer.validate();
    if (eval_ks.empty()) throw ConfigError("eval_ks must not be empty");
    for (const size_t k : eval_ks) {
        if (k == 0) throw ConfigError("eval_ks entries must be at least 1");
    }
    if (eval_split != "test" && eval_split != "valid") {
        throw ConfigError("eval_split must be 'test' or 'valid', got '" + eval_split + "'");
    }
    if (min_seq_len < 3) throw ConfigError("min_seq_len must be at least 3");
    if (max_seq_len < min_seq_len) throw ConfigError("max_seq_len must be >= min_seq_len");
}

}  // namespace hllm
