#pragma once

#include <string>

#include "hllm/config.hpp"
#include "hllm/model.hpp"

namespace hllm {

/// Writes an 8-byte tag "HLLMCKP1", a length-prefixed JSON header (the full
/// config, its fingerprint, parameter names and shapes) and every parameter
/// as little-endian f64 in visit order.
void save_checkpoint(Recommender& model, const RunConfig& cfg, const std::string& path);

/// Reads only the embedded config; validates the stored fingerprint against
/// a recomputation over the embedded config.
RunConfig load_checkpoint_config(const std::string& path);

/// Fills the model's parameters from the file. The stored parameter set must
/// match the model's exactly, names and shapes both.
void load_checkpoint_params(Recommender& model, const std::string& path);

}  // namespace hllm
