#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hllm/corpus.hpp"
#include "hllm/nn.hpp"

namespace hllm {

// Byte-level vocabulary: ids 0..255 are raw bytes, then the special ids.
constexpr int kItemTokenId = 256;
constexpr int kUserTokenId = 257;
constexpr int kPadTokenId = 258;
constexpr size_t kVocabSize = 259;

enum class Pooling { special_token, mean };

Pooling pooling_from_string(const std::string& s);
std::string pooling_to_string(Pooling p);

/// Byte-level tokenization: one byte -> one id, truncated to max_text_len,
/// then the terminal item token when pooling by special token.
std::vector<int> tokenize(const std::string& text, size_t max_text_len, Pooling pooling);

struct ItemEncoderCache {
    std::vector<int> tokens;
    Mat input;
    TransformerCache tf;
    Mat hidden;  // post-final-norm states, kept for mean pooling backward
};

/// Small causal transformer that compresses one token sequence into a single
/// embedding: either the last-layer state at the terminal item token or the
/// mean of all last-layer states.
struct ItemEncoder {
    Param tok_emb;  // vocab x dim
    Transformer tf;
    size_t dim{0};
    Pooling pooling{Pooling::special_token};

    void init(size_t d, size_t layers, size_t heads, Pooling pool, Rng& rng, double sigma = 0.02);

    /// Forward over one token sequence; returns the item embedding.
    std::vector<double> encode(const std::vector<int>& tokens, ItemEncoderCache* cache) const;

    /// Accumulates parameter gradients for the embedding gradient `d_emb`.
    void backward(const std::vector<double>& d_emb, const ItemEncoderCache& cache);

    void visit(const std::string& prefix, const ParamVisitor& fn);
};

/// Embeds every catalog item. `batch_size` only controls grouping; per-item
/// arithmetic is identical across batch sizes.
std::map<std::string, std::vector<double>> encode_catalog(const Catalog& catalog,
                                                          const ItemEncoder& encoder,
                                                          const AttributeSet& attributes,
                                                          const std::string& prompt,
                                                          size_t max_text_len, size_t batch_size);

}  // namespace hllm
