#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hllm/corpus.hpp"

namespace testsup {

// Deterministic successor-structured corpus: items n00..n<count-1>, every
// user walks the cycle k, k+1, k+2 ... (mod count) from a seeded offset, so
// the next item is a function of the previous one alone.
struct CyclicCorpus {
    hllm::Catalog catalog;
    std::vector<hllm::Interaction> interactions;
};

CyclicCorpus make_cyclic_corpus(size_t item_count, size_t user_count, size_t seq_len,
                                uint64_t seed);

// Category-clustered corpus: `categories` groups of `per_category` items that
// share a tag token; each user consumes distinct items from one category.
// The last `cold_per_category` items of each group are held out of every
// history. With `cold_targets` every user's final interaction (the test
// target under a leave-one-out split) is one of those held-out items.
struct CategoryCorpus {
    hllm::Catalog catalog;
    std::vector<hllm::Interaction> interactions;
    std::vector<std::string> cold_items;
};

CategoryCorpus make_category_corpus(size_t categories, size_t per_category,
                                    size_t cold_per_category, size_t user_count,
                                    size_t hist_len, uint64_t seed, bool cold_targets);

void write_interactions_tsv(const std::vector<hllm::Interaction>& interactions,
                            const std::string& path);

// Fresh empty directory under the working directory; wiped if it exists.
std::filesystem::path scratch_dir(const std::string& name);

std::string read_file(const std::string& path);

}  // namespace testsup
