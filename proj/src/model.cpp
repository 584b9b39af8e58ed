#include "hllm/model.hpp"

#include "hllm/error.hpp"

namespace hllm {

ItemSource item_source_from_string(const std::string& s) {
    if (s == "text") return ItemSource::text;
    if (s == "id_table") return ItemSource::id_table;
    if (s == "store") return ItemSource::store;
    throw ConfigError("unknown item source '" + s + "' (expected text, id_table or store)");
}

std::string item_source_to_string(ItemSource s) {
    switch (s) {
        case ItemSource::text: return "text";
        case ItemSource::id_table: return "id_table";
        case ItemSource::store: return "store";
    }
    throw ConfigError("invalid item source value");
}

void ModelConfig::validate() const {
    if (d_item == 0 || d_user == 0) throw ConfigError("model dimensions must be positive");
    if (item_layers == 0 || user_layers == 0) throw ConfigError("layer counts must be positive");
    if (item_heads == 0 || user_heads == 0) throw ConfigError("head counts must be positive");
    if (d_item % item_heads != 0 || d_user % user_heads != 0) {
        throw ConfigError("model dimension must divide evenly into heads");
    }
    if ((d_item / item_heads) % 2 != 0 || (d_user / user_heads) % 2 != 0) {
        throw ConfigError("head dimension must be even for rotary position pairs");
    }
    if (max_text_len == 0) throw ConfigError("max_text_len must be positive");
    if (item_source == ItemSource::text && !attributes.any()) {
        throw ConfigError("text item source needs at least one attribute enabled");
    }
    if (time_num < 1 || time_num > 6) throw ConfigError("time_num must be in [1, 6]");
    if (use_time && time_dim == 0) throw ConfigError("time_dim must be positive");
    if (!(temperature_init > 0.0)) throw ConfigError("initial temperature must be positive");
    if (!(sigma > 0.0)) throw ConfigError("init scale sigma must be positive");
    if (frozen_items && item_source != ItemSource::text) {
        throw ConfigError("frozen_items only applies to the text item source");
    }
}

void Recommender::init(const Catalog& cat, TrainMode objective, uint64_t seed) {
    cfg.validate();
    mode = objective;
    catalog = cat;

    Rng root(seed);
    Rng r_item = root.fork();
    Rng r_user = root.fork();
    Rng r_head = root.fork();
    Rng r_time = root.fork();
    Rng r_idfuse = root.fork();
    Rng r_idtab = root.fork();

    if (cfg.item_source == ItemSource::text) {
        item_enc.init(cfg.d_item, cfg.item_layers, cfg.item_heads, cfg.pooling, r_item,
                      cfg.sigma);
        item_tokens.clear();
        item_tokens.reserve(catalog.size());
        for (const auto& item : catalog.items) {
            const std::string text = flatten_item_text(item, cfg.attributes, cfg.prompt);
            item_tokens.push_back(tokenize(text, cfg.max_text_len, cfg.pooling));
        }
    }

    user.init(cfg.d_item, cfg.d_user, cfg.user_layers, cfg.user_heads, r_user, cfg.sigma);
    if (mode == TrainMode::disc_early) {
        user.init_head(cfg.d_user, r_head, cfg.sigma);
    } else if (mode == TrainMode::disc_late) {
        user.init_head(cfg.d_user + cfg.d_item, r_head, cfg.sigma);
    }

    sim.init(cfg.temperature_init, cfg.normalize_sim);
    if (cfg.use_time) time_emb.init(cfg.time_num, cfg.time_dim, cfg.d_user, r_time, cfg.sigma);
    if (cfg.use_id_feature) {
        std::vector<std::string> ids;
        ids.reserve(catalog.size());
        for (const auto& item : catalog.items) ids.push_back(item.item_id);
        id_fusion.init(ids, cfg.d_item, r_idfuse, cfg.sigma);
    }
    if (cfg.item_source == ItemSource::id_table) {
        std::vector<std::string> ids;
        ids.reserve(catalog.size());
        for (const auto& item : catalog.items) ids.push_back(item.item_id);
        user.init_id_input(ids, r_idtab, cfg.sigma);
    }

    frozen_vectors.clear();
    has_frozen_vectors = false;
}

std::vector<double> Recommender::item_vector(const std::string& item_id,
                                             ItemEncoderCache* cache) const {
    if (has_frozen_vectors) {
        auto it = frozen_vectors.find(item_id);
        if (it == frozen_vectors.end()) {
            throw DataError("no stored vector for item '" + item_id + "'");
        }
        return it->second;
    }
    switch (cfg.item_source) {
        case ItemSource::text: {
            auto it = catalog.index.find(item_id);
            if (it == catalog.index.end()) {
                throw DataError("unknown item '" + item_id + "'");
            }
            return item_enc.encode(item_tokens[it->second], cache);
        }
        case ItemSource::id_table:
            return user.id_input.lookup(item_id);
        case ItemSource::store:
            throw ConfigError("store item source requires loaded vectors");
    }
    throw ConfigError("invalid item source value");
}

std::map<std::string, std::vector<double>> Recommender::catalog_vectors() const {
    std::map<std::string, std::vector<double>> out;
    for (const auto& item : catalog.items) {
        out[item.item_id] = item_vector(item.item_id, nullptr);
    }
    return out;
}

void Recommender::freeze_items() {
    if (cfg.item_source != ItemSource::text) {
        throw ConfigError("freeze_items only applies to the text item source");
    }
    auto vectors = catalog_vectors();
    frozen_vectors = std::move(vectors);
    has_frozen_vectors = true;
}

void Recommender::set_frozen_vectors(std::map<std::string, std::vector<double>> vectors) {
    if (vectors.empty()) throw DataError("refusing to inject an empty item-vector set");
    const size_t d = vectors.begin()->second.size();
    for (const auto& [id, v] : vectors) {
        if (v.size() != d) {
            throw DataError("injected vectors have mixed dimensions (item '" + id + "')");
        }
    }
    if (d != cfg.d_item) {
        throw ConfigError("injected vector dimension " + std::to_string(d) +
                          " != configured d_item " + std::to_string(cfg.d_item));
    }
    frozen_vectors = std::move(vectors);
    has_frozen_vectors = true;
}

void Recommender::visit(const ParamVisitor& fn) {
    if (cfg.item_source == ItemSource::text) item_enc.visit("item", fn);
    user.visit("user", fn);
    sim.visit("sim", fn);
    if (cfg.use_time) time_emb.visit("time", fn);
    if (cfg.use_id_feature) id_fusion.visit("id_fusion", fn);
}

void Recommender::visit_trainable(const ParamVisitor& fn) {
    if (cfg.item_source == ItemSource::text && !cfg.frozen_items) item_enc.visit("item", fn);
    user.visit("user", fn);
    sim.visit("sim", fn);
    if (cfg.use_time) time_emb.visit("time", fn);
    if (cfg.use_id_feature) id_fusion.visit("id_fusion", fn);
}

void Recommender::zero_grad() {
    visit([](const std::string&, Param& p) { p.zero_grad(); });
}

size_t Recommender::parameter_count() {
    size_t n = 0;
    visit([&n](const std::string&, Param& p) { n += p.v.size(); });
    return n;
}

}  // namespace hllm
