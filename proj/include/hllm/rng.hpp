#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hllm {

// mt19937_64 with hand-rolled draw functions. The std:: distributions are
// implementation-defined, which would break run-to-run reproducibility across
// toolchains, so we only use the raw engine output here.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, n) by rejection; exact and unbiased.
    uint64_t uniform_below(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = eng_();
        while (v >= limit) v = eng_();
        return v % n;
    }

    // Uniform double in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller (no cached spare; keeps state minimal).
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Zero-mean normal with stddev sigma, redrawn until within +/- 2 sigma.
    double truncated_normal(double sigma) {
        double z = normal();
        while (z < -2.0 || z > 2.0) z = normal();
        return z * sigma;
    }

    // Derive an independent stream, e.g. one per model component.
    Rng fork() { return Rng(eng_() ^ 0x9e3779b97f4a7c15ULL); }

private:
    std::mt19937_64 eng_;
};

}  // namespace hllm
