#include "hllm/tensor.hpp"

#include <cassert>

namespace hllm {

void matmul_nt(const Mat& x, const Mat& w, Mat& y) {
    assert(x.cols == w.cols);
    y.rows = x.rows;
    y.cols = w.rows;
    y.m.assign(y.rows * y.cols, 0.0);
    const size_t in = x.cols;
    for (size_t i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        double* yi = y.row(i);
        for (size_t o = 0; o < w.rows; ++o) {
            yi[o] = dot(xi, w.row(o), in);
        }
    }
}

void matmul_nn(const Mat& dy, const Mat& w, Mat& dx) {
    assert(dy.cols == w.rows);
    dx.rows = dy.rows;
    dx.cols = w.cols;
    dx.m.assign(dx.rows * dx.cols, 0.0);
    for (size_t i = 0; i < dy.rows; ++i) {
        const double* di = dy.row(i);
        double* xi = dx.row(i);
        for (size_t o = 0; o < w.rows; ++o) {
            if (di[o] != 0.0) axpy(di[o], w.row(o), xi, w.cols);
        }
    }
}

void accum_tn(const Mat& dy, const Mat& x, Mat& dw) {
    assert(dy.rows == x.rows);
    assert(dw.rows == dy.cols && dw.cols == x.cols);
    for (size_t i = 0; i < dy.rows; ++i) {
        const double* di = dy.row(i);
        const double* xi = x.row(i);
        for (size_t o = 0; o < dy.cols; ++o) {
            if (di[o] != 0.0) axpy(di[o], xi, dw.row(o), x.cols);
        }
    }
}

double l2_norm(const double* x, size_t n) {
    return std::sqrt(dot(x, x, n));
}

bool all_finite(const double* x, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i])) return false;
    }
    return true;
}

}  // namespace hllm
