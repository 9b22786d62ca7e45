#pragma once

// Data-parallel inner loops behind every model and clustering routine.
//
// Each kernel has a scalar reference implementation and, where the target
// supports it, an AVX2+FMA or NEON variant. The variant is chosen once at
// startup from CPU features; setting DBNKIT_KERNELS=scalar in the environment
// (or calling select_backend) forces the reference path. Variants agree with
// the reference to rounding; a given backend is bit-reproducible.

#include <cstddef>
#include <string_view>
#include <vector>

namespace dbnkit::kernels {

enum class Backend { scalar, avx2, neon };

struct KernelTable {
    // Returns sum_i a[i] * b[i].
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y[i] += alpha * x[i].
    void (*axpy)(double* y, double alpha, const double* x, std::size_t n);
    // Returns sum_i (a[i] - b[i])^2.
    double (*squared_distance)(const double* a, const double* b, std::size_t n);
    // y[i] = alpha * y[i] + beta * x[i].
    void (*scale_add)(double* y, double alpha, double beta, const double* x, std::size_t n);
};

const KernelTable& scalar_table();
// nullptr when the variant was not compiled in.
const KernelTable* avx2_table();
const KernelTable* neon_table();

// True when the variant is compiled in and the running CPU supports it.
bool backend_available(Backend b);

Backend active_backend();

// Switches the process-wide backend. Throws InvalidInput if unavailable.
void select_backend(Backend b);

std::string_view backend_name(Backend b);

const KernelTable& active();

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(double* y, double alpha, const double* x, std::size_t n) {
    active().axpy(y, alpha, x, n);
}
inline double squared_distance(const double* a, const double* b, std::size_t n) {
    return active().squared_distance(a, b, n);
}
inline void scale_add(double* y, double alpha, double beta, const double* x, std::size_t n) {
    active().scale_add(y, alpha, beta, x, n);
}

}  // namespace dbnkit::kernels
