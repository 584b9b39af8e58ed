#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "hllm/nn.hpp"
#include "hllm/error.hpp"

using namespace hllm;

namespace {

Mat random_mat(size_t r, size_t c, Rng& rng, double scale = 1.0) {
    Mat m(r, c);
    for (double& v : m.m) v = (rng.uniform01() * 2.0 - 1.0) * scale;
    return m;
}

double weighted(const Mat& y, const Mat& w) {
    REQUIRE(y.size() == w.size());
    return dot(y.m.data(), w.m.data(), y.size());
}

// Central-difference check of analytic gradients `g` over every entry of `v`.
void check_fd(Mat& v, const Mat& g, const std::function<double()>& loss, double tol = 2e-5) {
    REQUIRE(v.size() == g.size());
    const double h = 1e-5;
    for (size_t i = 0; i < v.size(); ++i) {
        const double keep = v.m[i];
        v.m[i] = keep + h;
        const double up = loss();
        v.m[i] = keep - h;
        const double dn = loss();
        v.m[i] = keep;
        const double num = (up - dn) / (2.0 * h);
        const double ana = g.m[i];
        const double err =
            std::fabs(num - ana) / std::max({1.0, std::fabs(num), std::fabs(ana)});
        CAPTURE(i);
        CAPTURE(num);
        CAPTURE(ana);
        REQUIRE(err < tol);
    }
}

void set_identity(Mat& m) {
    m.zero();
    for (size_t i = 0; i < m.rows && i < m.cols; ++i) m.at(i, i) = 1.0;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("truncated normal init stays inside two sigma and keeps spread") {
    Rng rng(11);
    Mat m(60, 40);
    init_truncated_normal(m, rng, 0.02);
    double sum = 0.0, sq = 0.0;
    for (double v : m.m) {
        CHECK(std::fabs(v) <= 0.04 + 1e-15);
        sum += v;
        sq += v * v;
    }
    const double n = static_cast<double>(m.size());
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.002);
    CHECK(var > 0.5 * 0.02 * 0.02);
    CHECK(var < 1.5 * 0.02 * 0.02);

    Rng rng2(11);
    Mat m2(60, 40);
    init_truncated_normal(m2, rng2, 0.02);
    CHECK(m.m == m2.m);
}

TEST_CASE("gelu matches normal-CDF table values") {
    // x * Phi(x) with Phi from standard normal tables.
    CHECK(gelu(0.0) == 0.0);
    CHECK(gelu(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-12));
    CHECK(gelu(-1.0) == doctest::Approx(-0.15865525393145705).epsilon(1e-12));
    CHECK(gelu(3.0) == doctest::Approx(3.0 * 0.9986501019683699).epsilon(1e-12));

    for (double x : {-2.3, -0.7, 0.0, 0.4, 1.9}) {
        const double h = 1e-6;
        const double num = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
        CHECK(gelu_grad(x) == doctest::Approx(num).epsilon(1e-7));
    }
}

TEST_CASE("linear layer computes x W^T + b and exact gradients") {
    Rng rng(3);
    Linear lin;
    lin.init(2, 2, true, rng, 0.02);
    lin.w.v.m = {1.0, 2.0, 3.0, 4.0};
    lin.b.v.m = {0.5, -0.5};
    Mat x(1, 2);
    x.m = {1.0, 1.0};
    const Mat y = lin.forward(x, nullptr);
    CHECK(y.at(0, 0) == doctest::Approx(3.5));
    CHECK(y.at(0, 1) == doctest::Approx(6.5));

    Mat x2 = random_mat(3, 4, rng);
    Linear lin2;
    lin2.init(4, 5, true, rng, 0.05);
    const Mat wl = random_mat(3, 5, rng);
    LinearCache cache;
    (void)lin2.forward(x2, &cache);
    const Mat dx = lin2.backward(wl, cache);

    auto loss = [&] { return weighted(lin2.forward(x2, nullptr), wl); };
    check_fd(lin2.w.v, lin2.w.g, loss);
    check_fd(lin2.b.v, lin2.b.g, loss);
    check_fd(x2, dx, loss);
}

TEST_CASE("rms normalization scales constant rows to the gain") {
    RmsNorm norm;
    norm.init(4);
    Mat x(1, 4);
    x.m = {2.0, 2.0, 2.0, 2.0};
    const Mat y = norm.forward(x, nullptr);
    const double expect = 2.0 / std::sqrt(4.0 + 1e-6);
    for (size_t j = 0; j < 4; ++j) CHECK(y.at(0, j) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("rms normalization gradients match finite differences") {
    Rng rng(5);
    RmsNorm norm;
    norm.init(5);
    for (double& v : norm.gain.v.m) v = 0.8 + 0.4 * rng.uniform01();
    Mat x = random_mat(3, 5, rng);
    const Mat wl = random_mat(3, 5, rng);

    RmsNormCache cache;
    (void)norm.forward(x, &cache);
    const Mat dx = norm.backward(wl, cache);

    auto loss = [&] { return weighted(norm.forward(x, nullptr), wl); };
    check_fd(norm.gain.v, norm.gain.g, loss);
    check_fd(x, dx, loss);
}

TEST_CASE("attention follows the rotary similarity oracle") {
    Rng rng(7);
    CausalSelfAttention attn;
    attn.init(2, 1, rng, 0.02);
    set_identity(attn.wq.w.v);
    set_identity(attn.wk.w.v);
    set_identity(attn.wv.w.v);
    set_identity(attn.wo.w.v);

    Mat x(2, 2);
    x.at(0, 0) = 1.0;  // e1 at position 0
    x.at(1, 1) = 1.0;  // e2 at position 1
    const Mat y = attn.forward(x, nullptr);

    // Position 0 attends only to itself.
    CHECK(y.at(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(y.at(0, 1) == doctest::Approx(0.0).epsilon(1e-14));

    // Position 1: q1 = rot(1) e2, k0 = e1, k1 = rot(1) e2, scores scaled by
    // 1/sqrt(head_dim). Derived by hand from the rotation convention.
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const double s10 = -std::sin(1.0) * inv_sqrt2;
    const double s11 = 1.0 * inv_sqrt2;
    const double e0 = std::exp(s10), e1 = std::exp(s11);
    const double p0 = e0 / (e0 + e1);
    CHECK(y.at(1, 0) == doctest::Approx(p0).epsilon(1e-12));
    CHECK(y.at(1, 1) == doctest::Approx(1.0 - p0).epsilon(1e-12));
}

TEST_CASE("attention is causal and its gradients match finite differences") {
    Rng rng(9);
    CausalSelfAttention attn;
    attn.init(4, 2, rng, 0.3);
    Mat x = random_mat(3, 4, rng);

    const Mat base = attn.forward(x, nullptr);
    Mat bumped = x;
    bumped.at(2, 1) += 0.5;
    const Mat after = attn.forward(bumped, nullptr);
    for (size_t j = 0; j < 4; ++j) {
        CHECK(after.at(0, j) == base.at(0, j));
        CHECK(after.at(1, j) == base.at(1, j));
    }
    CHECK(after.at(2, 0) != base.at(2, 0));

    const Mat wl = random_mat(3, 4, rng);
    AttnCache cache;
    (void)attn.forward(x, &cache);
    const Mat dx = attn.backward(wl, cache);

    auto loss = [&] { return weighted(attn.forward(x, nullptr), wl); };
    check_fd(attn.wq.w.v, attn.wq.w.g, loss);
    check_fd(attn.wk.w.v, attn.wk.w.g, loss);
    check_fd(attn.wv.w.v, attn.wv.w.g, loss);
    check_fd(attn.wo.w.v, attn.wo.w.g, loss);
    check_fd(x, dx, loss);
}

TEST_CASE("feed-forward gradients match finite differences") {
    Rng rng(13);
    FeedForward ffn;
    ffn.init(3, rng, 0.3);
    Mat x = random_mat(2, 3, rng);
    const Mat wl = random_mat(2, 3, rng);

    FfnCache cache;
    (void)ffn.forward(x, &cache);
    const Mat dx = ffn.backward(wl, cache);

    auto loss = [&] { return weighted(ffn.forward(x, nullptr), wl); };
    check_fd(ffn.w1.w.v, ffn.w1.w.g, loss);
    check_fd(ffn.w1.b.v, ffn.w1.b.g, loss);
    check_fd(ffn.w2.w.v, ffn.w2.w.g, loss);
    check_fd(ffn.w2.b.v, ffn.w2.b.g, loss);
    check_fd(x, dx, loss);
}

TEST_CASE("transformer stack is causal end to end") {
    Rng rng(17);
    Transformer tf;
    tf.init("t", 4, 2, 2, rng, 0.05);
    Mat x = random_mat(5, 4, rng);
    const Mat base = tf.forward(x, nullptr);

    Mat bumped = x;
    bumped.at(3, 2) += 1.0;
    const Mat after = tf.forward(bumped, nullptr);
    for (size_t i = 0; i < 3; ++i) {
        for (size_t j = 0; j < 4; ++j) CHECK(after.at(i, j) == base.at(i, j));
    }
    bool moved = false;
    for (size_t j = 0; j < 4; ++j) moved = moved || after.at(3, j) != base.at(3, j);
    CHECK(moved);
}

TEST_CASE("transformer gradients match finite differences") {
    Rng rng(19);
    Transformer tf;
    tf.init("t", 4, 2, 2, rng, 0.08);
    Mat x = random_mat(3, 4, rng);
    const Mat wl = random_mat(3, 4, rng);

    TransformerCache cache;
    (void)tf.forward(x, &cache);
    const Mat dx = tf.backward(wl, cache);

    auto loss = [&] { return weighted(tf.forward(x, nullptr), wl); };
    check_fd(x, dx, loss);
    tf.visit("tf", [&](const std::string& name, Param& p) {
        CAPTURE(name);
        check_fd(p.v, p.g, loss);
    });
}

TEST_CASE("transformer rejects non-finite activations with its label") {
    Rng rng(23);
    Transformer tf;
    tf.init("item_model", 4, 1, 2, rng, 0.02);
    Mat x(2, 4);
    x.at(1, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS((void)tf.forward(x, nullptr), NumericError);
}

TEST_CASE("parameter visitation reaches every tensor exactly once") {
    Rng rng(29);
    Transformer tf;
    tf.init("t", 4, 2, 2, rng, 0.02);
    std::vector<std::string> names;
    tf.visit("tf", [&](const std::string& name, Param&) { names.push_back(name); });
    // 2 blocks x (2 norms + 4 attn mats + ffn w1/b1/w2/b2) + final norm
    CHECK(names.size() == 2 * (2 + 4 + 4) + 1);
    std::sort(names.begin(), names.end());
    CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
}

}
