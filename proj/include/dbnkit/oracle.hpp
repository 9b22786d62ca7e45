#pragma once

#include <span>

#include "dbnkit/rbm.hpp"

namespace dbnkit::oracle {

// Largest n_visible + n_hidden the enumerators accept (2^20 joint states).
inline constexpr std::size_t kMaxUnits = 20;

// A binary-binary RBM small enough for exact enumeration.
class TinyRbm {
public:
    // Throws InvalidInput when n_visible + n_hidden exceeds kMaxUnits.
    explicit TinyRbm(RbmLayer layer);

    const RbmLayer& layer() const noexcept { return layer_; }
    std::size_t n_visible() const noexcept { return layer_.n_visible(); }
    std::size_t n_hidden() const noexcept { return layer_.n_hidden(); }

private:
    RbmLayer layer_;
};

// Energy E(v,h) = -v.b - h.c - h^T W v.
double energy(const RbmLayer& layer, std::span<const double> v, std::span<const double> h);

// -F(v) = log sum_h exp(-E(v,h)) = v.b + sum_j softplus(c_j + W_j.v)
double negative_free_energy(const RbmLayer& layer, std::span<const double> v);

// log Z over all 2^(nv+nh) joint states, log-sum-exp stabilized.
double exact_log_partition(const TinyRbm& m);

// Mean over data of log p(v).
double exact_log_likelihood(const TinyRbm& m, std::span<const Vector> data);

// Gradient of exact_log_likelihood w.r.t. weights and both biases:
// data expectation minus model expectation, both by enumeration.
RbmDelta exact_gradient(const TinyRbm& m, std::span<const Vector> data);

}  // namespace dbnkit::oracle
