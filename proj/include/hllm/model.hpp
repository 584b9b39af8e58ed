#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "hllm/corpus.hpp"
#include "hllm/features.hpp"
#include "hllm/item_encoder.hpp"
#include "hllm/objectives.hpp"
#include "hllm/user_encoder.hpp"

namespace hllm {

/// Where item vectors come from.
///   text:     live byte-level text encoder (optionally frozen)
///   id_table: learned per-id rows, no text (the ID baseline)
///   store:    externally injected vectors, e.g. a loaded embedding file
enum class ItemSource { text, id_table, store };

ItemSource item_source_from_string(const std::string& s);
std::string item_source_to_string(ItemSource s);

/// Architecture and feature knobs shared by training and evaluation.
struct ModelConfig {
    size_t d_item{32};
    size_t d_user{32};
    size_t item_layers{2};
    size_t user_layers{2};
    size_t item_heads{2};
    size_t user_heads{2};
    size_t max_text_len{256};
    Pooling pooling{Pooling::special_token};
    AttributeSet attributes{};
    std::string prompt{};
    ItemSource item_source{ItemSource::text};
    bool frozen_items{false};  // keep item-side parameters fixed during training
    bool use_time{false};
    size_t time_num{6};
    size_t time_dim{8};
    bool use_id_feature{false};  // add a learned id row to each input item vector
    bool normalize_sim{true};
    double temperature_init{0.05};
    double sigma{0.02};

    void validate() const;  // throws ConfigError
};

/// The full two-model recommender: an item-vector source, the user sequence
/// model, the similarity temperature and optional timestamp / id fusion.
struct Recommender {
    ModelConfig cfg;
    TrainMode mode{TrainMode::generative};

    Catalog catalog;
    std::vector<std::vector<int>> item_tokens;  // catalog order, text source only

    ItemEncoder item_enc;
    UserModel user;
    Similarity sim;
    TimeEmbedding time_emb;     // when use_time
    IdFeatureTable id_fusion;   // when use_id_feature, d_item rows

    // Fixed item vectors: filled by freeze_items() or injected from a store.
    std::map<std::string, std::vector<double>> frozen_vectors;
    bool has_frozen_vectors{false};

    void init(const Catalog& cat, TrainMode objective, uint64_t seed);

    /// Raw (pre-fusion) item vector per the configured source. `cache` is
    /// honored only for live text encoding.
    std::vector<double> item_vector(const std::string& item_id, ItemEncoderCache* cache) const;

    /// One vector per catalog item, per the configured source.
    std::map<std::string, std::vector<double>> catalog_vectors() const;

    /// Encodes the whole catalog once and serves item_vector from the result.
    void freeze_items();
    void set_frozen_vectors(std::map<std::string, std::vector<double>> vectors);

    void visit(const ParamVisitor& fn);            // every parameter
    void visit_trainable(const ParamVisitor& fn);  // excludes frozen item side
    void zero_grad();
    size_t parameter_count();
};

}  // namespace hllm
