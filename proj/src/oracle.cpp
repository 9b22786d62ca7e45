#include "dbnkit/oracle.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "dbnkit/error.hpp"

namespace dbnkit::oracle {
namespace {

void check_binary_data(const TinyRbm& m, std::span<const Vector> data) {
    if (data.empty()) throw InvalidInput("oracle: empty data");
    for (const Vector& v : data) {
        if (v.size() != m.n_visible()) throw InvalidInput("oracle: data vector length mismatch");
        for (double x : v)
            if (x != 0.0 && x != 1.0) throw InvalidInput("oracle: data must be binary");
    }
}

void bits_to_vector(std::uint64_t bits, Vector& out) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>((bits >> i) & 1u);
}

// Accumulates E_{h|v}[h v^T], v, E[h|v] into g scaled by `weight`.
void accumulate_conditional(const RbmLayer& layer, std::span<const double> v, double weight, RbmDelta& g,
                            Vector& ph) {
    for (std::size_t j = 0; j < layer.n_hidden(); ++j)
        ph[j] = logistic(layer.hidden_bias()[j] + kernels::dot(layer.weights().row(j).data(), v.data(), v.size()));
    rank1_update(g.weights, weight, ph, v);
    kernels::axpy(g.visible_bias.data(), weight, v.data(), v.size());
    kernels::axpy(g.hidden_bias.data(), weight, ph.data(), ph.size());
}

}  // namespace

TinyRbm::TinyRbm(RbmLayer layer) : layer_(std::move(layer)) {
    if (layer_.n_visible() + layer_.n_hidden() > kMaxUnits)
        throw InvalidInput("tiny rbm: n_visible + n_hidden = " +
                           std::to_string(layer_.n_visible() + layer_.n_hidden()) + " exceeds " +
                           std::to_string(kMaxUnits));
}

double energy(const RbmLayer& layer, std::span<const double> v, std::span<const double> h) {
    double e = -kernels::dot(v.data(), layer.visible_bias().data(), v.size()) -
               kernels::dot(h.data(), layer.hidden_bias().data(), h.size());
    for (std::size_t j = 0; j < layer.n_hidden(); ++j)
        e -= h[j] * kernels::dot(layer.weights().row(j).data(), v.data(), v.size());
    return e;
}

double negative_free_energy(const RbmLayer& layer, std::span<const double> v) {
    double s = kernels::dot(v.data(), layer.visible_bias().data(), v.size());
    for (std::size_t j = 0; j < layer.n_hidden(); ++j)
        s += softplus(layer.hidden_bias()[j] + kernels::dot(layer.weights().row(j).data(), v.data(), v.size()));
    return s;
}

// Hidden units are summed out analytically; only visible states are enumerated.
double exact_log_partition(const TinyRbm& m) {
    const RbmLayer& layer = m.layer();
    const std::uint64_t n_states = std::uint64_t{1} << m.n_visible();
    std::vector<double> terms(n_states);
    Vector v(m.n_visible());
    for (std::uint64_t s = 0; s < n_states; ++s) {
        bits_to_vector(s, v);
        terms[s] = negative_free_energy(layer, v);
    }
    const double top = *std::max_element(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - top);
    return top + std::log(acc);
}

double exact_log_likelihood(const TinyRbm& m, std::span<const Vector> data) {
    check_binary_data(m, data);
    const double log_z = exact_log_partition(m);
    double total = 0.0;
    for (const Vector& v : data) total += negative_free_energy(m.layer(), v) - log_z;
    return total / static_cast<double>(data.size());
}

RbmDelta exact_gradient(const TinyRbm& m, std::span<const Vector> data) {
    check_binary_data(m, data);
    const RbmLayer& layer = m.layer();
    RbmDelta grad = RbmDelta::zeros_like(layer);
    Vector ph(m.n_hidden());

    const double w_data = 1.0 / static_cast<double>(data.size());
    for (const Vector& v : data) accumulate_conditional(layer, v, w_data, grad, ph);

    const double log_z = exact_log_partition(m);
    const std::uint64_t n_states = std::uint64_t{1} << m.n_visible();
    Vector v(m.n_visible());
    for (std::uint64_t s = 0; s < n_states; ++s) {
        bits_to_vector(s, v);
        const double p = std::exp(negative_free_energy(layer, v) - log_z);
        accumulate_conditional(layer, v, -p, grad, ph);
    }
    return grad;
}

}  // namespace dbnkit::oracle
