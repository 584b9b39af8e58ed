#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace hllm {

// Dense row-major matrix of doubles. All model math runs in double so the
// finite-difference gradient checks have headroom.
struct Mat {
    size_t rows{0};
    size_t cols{0};
    std::vector<double> m;

    Mat() = default;
    Mat(size_t r, size_t c) : rows(r), cols(c), m(r * c, 0.0) {}

    double* row(size_t r) { return m.data() + r * cols; }
    const double* row(size_t r) const { return m.data() + r * cols; }

    double& at(size_t r, size_t c) { return m[r * cols + c]; }
    double at(size_t r, size_t c) const { return m[r * cols + c]; }

    size_t size() const { return m.size(); }
    void zero() { std::fill(m.begin(), m.end(), 0.0); }
};

inline double dot(const double* __restrict__ a, const double* __restrict__ b, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

// y += alpha * x
inline void axpy(double alpha, const double* __restrict__ x, double* __restrict__ y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline void scale_inplace(double alpha, double* x, size_t n) {
    for (size_t i = 0; i < n; ++i) x[i] *= alpha;
}

// y = x * w^T, with w stored (out x in). Row-contiguous dots vectorize well.
void matmul_nt(const Mat& x, const Mat& w, Mat& y);

// dx = dy * w, with w stored (out x in).
void matmul_nn(const Mat& dy, const Mat& w, Mat& dx);

// dw += dy^T * x  (dy: n x out, x: n x in, dw: out x in)
void accum_tn(const Mat& dy, const Mat& x, Mat& dw);

double l2_norm(const double* x, size_t n);

bool all_finite(const double* x, size_t n);
inline bool all_finite(const Mat& a) { return all_finite(a.m.data(), a.size()); }

}  // namespace hllm
