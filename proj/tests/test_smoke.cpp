#include "doctest.h"

#include "hllm/model.hpp"
#include "support.hpp"

TEST_SUITE("smoke") {

TEST_CASE("model initializes over a tiny corpus") {
    auto corpus = testsup::make_cyclic_corpus(8, 4, 5, 1);
    hllm::Recommender model;
    model.cfg.d_item = 16;
    model.cfg.d_user = 16;
    model.cfg.item_layers = 1;
    model.cfg.user_layers = 1;
    model.init(corpus.catalog, hllm::TrainMode::generative, 7);
    CHECK(model.parameter_count() > 0);
}

}
