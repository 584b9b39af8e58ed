#include "doctest.h"

#include <cmath>
#include <fstream>
#include <limits>

#include "hllm/embcache.hpp"
#include "hllm/error.hpp"
#include "support.hpp"

using namespace hllm;

namespace {

std::map<std::string, std::vector<double>> sample_embeddings() {
    return {
        {"m2", {0.1, -2.5, 3.0}},
        {"m10", {1.0 / 3.0, 1e-20, -7.25}},
        {"a", {0.0, 42.0, -0.125}},
    };
}

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << bytes;
}

}  // namespace

TEST_SUITE("embcache") {

TEST_CASE("embeddings round-trip at single precision") {
    const auto dir = testsup::scratch_dir("emb_roundtrip");
    const std::string path = (dir / "items.emb").string();
    const auto emb = sample_embeddings();
    export_embeddings(emb, path);

    const EmbeddingStore store = load_embeddings(path);
    CHECK(store.dim == 3);
    CHECK(store.count() == 3);

    for (const auto& [id, vec] : emb) {
        const auto got = store.lookup(id);
        REQUIRE(got.has_value());
        REQUIRE(got->size() == 3);
        for (size_t j = 0; j < 3; ++j) {
            // values pass through float exactly once
            CHECK((*got)[j] == static_cast<double>(static_cast<float>(vec[j])));
        }
    }
    CHECK_FALSE(store.lookup("missing").has_value());

    const auto map = store.to_map();
    CHECK(map.size() == 3);
    CHECK(map.at("a")[1] == 42.0);
}

TEST_CASE("rows are laid out by ascending item id") {
    const auto dir = testsup::scratch_dir("emb_order");
    const std::string path = (dir / "items.emb").string();
    export_embeddings(sample_embeddings(), path);

    const EmbeddingStore store = load_embeddings(path);
    REQUIRE(store.ids.size() == 3);
    CHECK(store.ids[0] == "a");
    CHECK(store.ids[1] == "m10");  // lexicographic, not numeric
    CHECK(store.ids[2] == "m2");
    CHECK(store.index.at("m2") == 2);

    const std::string sidecar = testsup::read_file(path + ".idx");
    CHECK(sidecar == "a\t0\nm10\t1\nm2\t2\n");
}

TEST_CASE("export is byte-identical across runs") {
    const auto dir = testsup::scratch_dir("emb_stable");
    const std::string p1 = (dir / "one.emb").string();
    const std::string p2 = (dir / "two.emb").string();
    export_embeddings(sample_embeddings(), p1);
    export_embeddings(sample_embeddings(), p2);
    CHECK(testsup::read_file(p1) == testsup::read_file(p2));
    CHECK(testsup::read_file(p1 + ".idx") == testsup::read_file(p2 + ".idx"));
}

TEST_CASE("export rejects degenerate inputs") {
    const auto dir = testsup::scratch_dir("emb_badexport");
    const std::string path = (dir / "items.emb").string();

    CHECK_THROWS_AS(export_embeddings({}, path), DataError);
    CHECK_THROWS_AS(export_embeddings({{"a", {}}}, path), DataError);
    CHECK_THROWS_AS(export_embeddings({{"a", {1.0}}, {"b", {1.0, 2.0}}}, path), DataError);
    CHECK_THROWS_AS(
        export_embeddings({{"a", {std::numeric_limits<double>::infinity()}}}, path),
        NumericError);
}

TEST_CASE("loading rejects corrupted stores") {
    const auto dir = testsup::scratch_dir("emb_corrupt");
    const std::string path = (dir / "items.emb").string();
    export_embeddings(sample_embeddings(), path);
    const std::string good = testsup::read_file(path);

    SUBCASE("missing matrix file") {
        CHECK_THROWS_AS((void)load_embeddings((dir / "nope.emb").string()), IoError);
    }
    SUBCASE("wrong format tag") {
        std::string bad = good;
        bad[0] = 'X';
        write_bytes(path, bad);
        CHECK_THROWS_AS((void)load_embeddings(path), DataError);
    }
    SUBCASE("truncated payload") {
        write_bytes(path, good.substr(0, good.size() - 5));
        CHECK_THROWS_AS((void)load_embeddings(path), DataError);
    }
    SUBCASE("tiny file") {
        write_bytes(path, "HLLM");
        CHECK_THROWS_AS((void)load_embeddings(path), DataError);
    }
    SUBCASE("missing index sidecar") {
        std::filesystem::remove(path + ".idx");
        CHECK_THROWS_AS((void)load_embeddings(path), IoError);
    }
    SUBCASE("index with a duplicate row") {
        write_bytes(path + ".idx", "a\t0\nm10\t0\nm2\t2\n");
        CHECK_THROWS_AS((void)load_embeddings(path), DataError);
    }
    SUBCASE("index with an out-of-range row") {
        write_bytes(path + ".idx", "a\t0\nm10\t1\nm2\t9\n");
        CHECK_THROWS_AS((void)load_embeddings(path), DataError);
    }
    SUBCASE("index with the wrong line count") {
        write_bytes(path + ".idx", "a\t0\nm10\t1\n");
        CHECK_THROWS_AS((void)load_embeddings(path), DataError);
    }
}

TEST_CASE("the binary layout starts with the format tag and dimensions") {
    const auto dir = testsup::scratch_dir("emb_layout");
    const std::string path = (dir / "items.emb").string();
    export_embeddings({{"only", {1.5, -2.0}}}, path);

    const std::string bytes = testsup::read_file(path);
    REQUIRE(bytes.size() == 8 + 4 + 8 + 2 * 4);
    CHECK(bytes.substr(0, 8) == "HLLMEMB1");
    // dim = 2, little endian
    CHECK(static_cast<unsigned char>(bytes[8]) == 2);
    CHECK(static_cast<unsigned char>(bytes[9]) == 0);
    // count = 1, little endian
    CHECK(static_cast<unsigned char>(bytes[12]) == 1);
}

}
