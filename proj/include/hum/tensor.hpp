#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "hum/common.hpp"

// Minimal dense row-major matrix and the handful of kernels the encoder
// needs. Loops are written so the compiler can vectorize the inner j-loop.

namespace hum {

template <typename Real>
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Real> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, Real(0)) {}

    Real* row(std::size_t i) { return a.data() + i * cols; }
    const Real* row(std::size_t i) const { return a.data() + i * cols; }
    Real& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    Real at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
    std::size_t size() const { return a.size(); }
    void zero() { std::fill(a.begin(), a.end(), Real(0)); }
};

// C(+)= A * B,  A: m x k, B: k x n, C: m x n
template <typename Real>
void matmul(const Mat<Real>& A, const Mat<Real>& B, Mat<Real>& C, bool accumulate = false) {
    if (A.cols != B.rows || C.rows != A.rows || C.cols != B.cols)
        throw std::invalid_argument("matmul: shape mismatch");
    if (!accumulate) C.zero();
    for (std::size_t i = 0; i < A.rows; ++i) {
        const Real* arow = A.row(i);
        Real* crow = C.row(i);
        for (std::size_t k = 0; k < A.cols; ++k) {
            const Real aik = arow[k];
            const Real* brow = B.row(k);
            for (std::size_t j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
        }
    }
}

// C(+)= A * B^T,  A: m x k, B: n x k, C: m x n
template <typename Real>
void matmul_bt(const Mat<Real>& A, const Mat<Real>& B, Mat<Real>& C, bool accumulate = false) {
    if (A.cols != B.cols || C.rows != A.rows || C.cols != B.rows)
        throw std::invalid_argument("matmul_bt: shape mismatch");
    if (!accumulate) C.zero();
    for (std::size_t i = 0; i < A.rows; ++i) {
        const Real* arow = A.row(i);
        Real* crow = C.row(i);
        for (std::size_t j = 0; j < B.rows; ++j) {
            const Real* brow = B.row(j);
            Real s = 0;
            for (std::size_t k = 0; k < A.cols; ++k) s += arow[k] * brow[k];
            crow[j] += s;
        }
    }
}

// C(+)= A^T * B,  A: k x m, B: k x n, C: m x n
template <typename Real>
void matmul_at(const Mat<Real>& A, const Mat<Real>& B, Mat<Real>& C, bool accumulate = false) {
    if (A.rows != B.rows || C.rows != A.cols || C.cols != B.cols)
        throw std::invalid_argument("matmul_at: shape mismatch");
    if (!accumulate) C.zero();
    for (std::size_t k = 0; k < A.rows; ++k) {
        const Real* arow = A.row(k);
        const Real* brow = B.row(k);
        for (std::size_t i = 0; i < A.cols; ++i) {
            const Real aki = arow[i];
            Real* crow = C.row(i);
            for (std::size_t j = 0; j < B.cols; ++j) crow[j] += aki * brow[j];
        }
    }
}

template <typename Real>
double dot(const std::vector<Real>& x, const std::vector<Real>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        s += static_cast<double>(x[i]) * static_cast<double>(y[i]);
    return s;
}

template <typename Real>
void fill_normal(std::vector<Real>& v, double scale, rng_t& rng) {
    for (auto& x : v) x = static_cast<Real>(scale * normal01(rng));
}

} // namespace hum
