#include "hllm/item_encoder.hpp"

#include <cassert>

#include "hllm/error.hpp"

namespace hllm {

Pooling pooling_from_string(const std::string& s) {
    if (s == "special_token") return Pooling::special_token;
    if (s == "mean") return Pooling::mean;
    throw ConfigError("unknown pooling mode '" + s + "' (expected special_token or mean)");
}

std::string pooling_to_string(Pooling p) {
    return p == Pooling::special_token ? "special_token" : "mean";
}

std::vector<int> tokenize(const std::string& text, size_t max_text_len, Pooling pooling) {
    if (text.empty()) throw DataError("cannot tokenize empty text");
    std::vector<int> ids;
    const size_t n = std::min(text.size(), max_text_len);
    ids.reserve(n + 1);
    for (size_t i = 0; i < n; ++i) {
        ids.push_back(static_cast<int>(static_cast<unsigned char>(text[i])));
    }
    if (pooling == Pooling::special_token) ids.push_back(kItemTokenId);
    return ids;
}

void ItemEncoder::init(size_t d, size_t layers, size_t heads, Pooling pool, Rng& rng,
                       double sigma) {
    dim = d;
    pooling = pool;
    tok_emb.init(kVocabSize, d, true);
    init_truncated_normal(tok_emb.v, rng, sigma);
    tf.init("item_encoder", d, layers, heads, rng, sigma);
}

std::vector<double> ItemEncoder::encode(const std::vector<int>& tokens,
                                        ItemEncoderCache* cache) const {
    if (tokens.empty()) throw DataError("empty token sequence");
    const size_t n = tokens.size();
    Mat input(n, dim);
    for (size_t i = 0; i < n; ++i) {
        assert(tokens[i] >= 0 && static_cast<size_t>(tokens[i]) < kVocabSize);
        const double* row = tok_emb.v.row(static_cast<size_t>(tokens[i]));
        std::copy(row, row + dim, input.row(i));
    }

    ItemEncoderCache local;
    ItemEncoderCache& c = cache ? *cache : local;
    Mat hidden = tf.forward(input, cache ? &c.tf : nullptr);
    if (cache) {
        c.tokens = tokens;
        c.input = input;
        c.hidden = hidden;
    }

    std::vector<double> emb(dim, 0.0);
    if (pooling == Pooling::special_token) {
        const double* last = hidden.row(n - 1);
        std::copy(last, last + dim, emb.begin());
    } else {
        for (size_t i = 0; i < n; ++i) axpy(1.0, hidden.row(i), emb.data(), dim);
        scale_inplace(1.0 / static_cast<double>(n), emb.data(), dim);
    }
    if (!all_finite(emb.data(), dim)) throw NumericError("item_encoder: non-finite embedding");
    return emb;
}

void ItemEncoder::backward(const std::vector<double>& d_emb, const ItemEncoderCache& cache) {
    const size_t n = cache.tokens.size();
    Mat dh(n, dim);
    if (pooling == Pooling::special_token) {
        std::copy(d_emb.begin(), d_emb.end(), dh.row(n - 1));
    } else {
        const double inv = 1.0 / static_cast<double>(n);
        for (size_t i = 0; i < n; ++i) axpy(inv, d_emb.data(), dh.row(i), dim);
    }
    Mat dinput = tf.backward(dh, cache.tf);
    for (size_t i = 0; i < n; ++i) {
        axpy(1.0, dinput.row(i), tok_emb.g.row(static_cast<size_t>(cache.tokens[i])), dim);
    }
}

void ItemEncoder::visit(const std::string& prefix, const ParamVisitor& fn) {
    fn(prefix + ".tok_emb", tok_emb);
    tf.visit(prefix + ".tf", fn);
}

std::map<std::string, std::vector<double>> encode_catalog(const Catalog& catalog,
                                                          const ItemEncoder& encoder,
                                                          const AttributeSet& attributes,
                                                          const std::string& prompt,
                                                          size_t max_text_len, size_t batch_size) {
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    std::map<std::string, std::vector<double>> out;
    const size_t n = catalog.items.size();
    for (size_t start = 0; start < n; start += batch_size) {
        const size_t end = std::min(n, start + batch_size);
        for (size_t i = start; i < end; ++i) {
            const ItemRecord& rec = catalog.items[i];
            try {
                const std::string text = flatten_item_text(rec, attributes, prompt);
                const auto tokens = tokenize(text, max_text_len, encoder.pooling);
                out[rec.item_id] = encoder.encode(tokens, nullptr);
            } catch (const NumericError& e) {
                throw NumericError("item '" + rec.item_id + "': " + e.what());
            }
        }
    }
    return out;
}

}  // namespace hllm
