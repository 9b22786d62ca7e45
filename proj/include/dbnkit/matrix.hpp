#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dbnkit/kernels.hpp"

namespace dbnkit {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// out = bias + m * x
inline void affine(const Matrix& m, std::span<const double> x, std::span<const double> bias,
                   std::span<double> out) {
    for (std::size_t r = 0; r < m.rows(); ++r)
        out[r] = bias[r] + kernels::dot(m.row(r).data(), x.data(), m.cols());
}

// out = bias + m^T * y
inline void affine_transposed(const Matrix& m, std::span<const double> y, std::span<const double> bias,
                              std::span<double> out) {
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] = bias[c];
    for (std::size_t r = 0; r < m.rows(); ++r)
        if (y[r] != 0.0) kernels::axpy(out.data(), y[r], m.row(r).data(), m.cols());
}

// m += alpha * u * v^T
inline void rank1_update(Matrix& m, double alpha, std::span<const double> u, std::span<const double> v) {
    for (std::size_t r = 0; r < m.rows(); ++r)
        if (u[r] != 0.0) kernels::axpy(m.row(r).data(), alpha * u[r], v.data(), m.cols());
}

}  // namespace dbnkit
