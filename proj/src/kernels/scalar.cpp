#include "dbnkit/kernels.hpp"

namespace dbnkit::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(double* y, double alpha, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void scale_add_scalar(double* y, double alpha, double beta, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = alpha * y[i] + beta * x[i];
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{dot_scalar, axpy_scalar, squared_distance_scalar, scale_add_scalar};
    return table;
}

}  // namespace dbnkit::kernels
