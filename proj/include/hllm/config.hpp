#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hllm/model.hpp"
#include "hllm/objectives.hpp"

namespace hllm {

/// Flat experiment configuration. Every JSON key maps one-to-one onto a field
/// here; command-line "--set key=value" pairs override file values. Unknown
/// keys are rejected.
struct RunConfig {
    // data
    std::string items_path;
    std::string interactions_path;
    std::string output_dir{"."};
    size_t min_seq_len{3};
    size_t max_seq_len{50};

    ModelConfig model;
    TrainConfig trainer;

    // evaluation
    std::vector<size_t> eval_ks{5, 10, 50, 200};
    bool exclude_history{true};
    std::string eval_split{"test"};

    // artifacts
    std::string checkpoint_path;  // written by train, read by eval/export
    std::string init_checkpoint;  // optional warm start for train
    std::string embeddings_path;  // export target / store-mode eval source
    bool eval_from_store{false};

    bool deterministic{false};

    static RunConfig from_json_text(const std::string& text);
    static RunConfig from_file(const std::string& path);

    /// Sets one key from its string form; JSON literals (numbers, bools,
    /// arrays) are parsed, anything else is taken as a plain string.
    void apply_override(const std::string& key, const std::string& value);

    /// Canonical serialization: fixed key order, every field present.
    std::string to_json() const;

    /// FNV-1a 64 hash of the canonical serialization, 16 hex digits.
    std::string fingerprint() const;

    void validate() const;  // ConfigError on any bad field combination
};

uint64_t fnv1a64(const std::string& s);

}  // namespace hllm
