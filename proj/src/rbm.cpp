#include "dbnkit/rbm.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "dbnkit/error.hpp"

namespace dbnkit {
namespace {

void check_unit_interval(std::span<const double> v, std::size_t expected, const char* what) {
    if (v.size() != expected) {
        throw InvalidInput(std::string(what) + ": expected length " + std::to_string(expected) + ", got " +
                           std::to_string(v.size()));
    }
    for (double x : v) {
        if (!std::isfinite(x)) throw InvalidInput(std::string(what) + ": non-finite entry");
        if (x < 0.0 || x > 1.0) throw InvalidInput(std::string(what) + ": entry outside [0,1]");
    }
}

void hidden_probs_into(const RbmLayer& layer, std::span<const double> v, std::span<double> out) {
    affine(layer.weights(), v, layer.hidden_bias(), out);
    for (double& x : out) x = logistic(x);
}

void visible_probs_into(const RbmLayer& layer, std::span<const double> h, std::span<double> out) {
    affine_transposed(layer.weights(), h, layer.visible_bias(), out);
    for (double& x : out) x = logistic(x);
}

void sample_into(std::span<const double> p, Rng& rng, std::span<double> out) {
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = rng.uniform() < p[i] ? 1.0 : 0.0;
}

}  // namespace

RbmLayer::RbmLayer(std::size_t n_visible, std::size_t n_hidden)
    : weights_(n_hidden, n_visible), visible_bias_(n_visible, 0.0), hidden_bias_(n_hidden, 0.0) {
    if (n_visible == 0 || n_hidden == 0) throw InvalidInput("rbm layer: unit counts must be positive");
}

RbmLayer::RbmLayer(Matrix weights, Vector visible_bias, Vector hidden_bias)
    : weights_(std::move(weights)), visible_bias_(std::move(visible_bias)), hidden_bias_(std::move(hidden_bias)) {
    if (weights_.rows() != hidden_bias_.size() || weights_.cols() != visible_bias_.size())
        throw InvalidInput("rbm layer: weight shape does not match bias lengths");
    if (visible_bias_.empty() || hidden_bias_.empty()) throw InvalidInput("rbm layer: unit counts must be positive");
    if (!is_finite()) throw InvalidInput("rbm layer: non-finite parameter");
}

RbmLayer RbmLayer::random(std::size_t n_visible, std::size_t n_hidden, double stddev, Rng& rng) {
    RbmLayer layer(n_visible, n_hidden);
    for (double& w : layer.weights_.data()) w = rng.normal(0.0, stddev);
    return layer;
}

bool RbmLayer::is_finite() const {
    return all_finite(weights_.data()) && all_finite(visible_bias_) && all_finite(hidden_bias_);
}

RbmDelta RbmDelta::zeros_like(const RbmLayer& layer) {
    return {Matrix(layer.n_hidden(), layer.n_visible()), Vector(layer.n_visible(), 0.0),
            Vector(layer.n_hidden(), 0.0)};
}

Vector RbmDelta::flatten() const {
    Vector out(weights.data());
    out.insert(out.end(), visible_bias.begin(), visible_bias.end());
    out.insert(out.end(), hidden_bias.begin(), hidden_bias.end());
    return out;
}

void CdConfig::validate() const {
    if (k < 1) throw InvalidInput("cd config: k must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw InvalidInput("cd config: learning_rate must be finite and non-negative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidInput("cd config: momentum must be in [0,1)");
    if (!(final_momentum >= 0.0 && final_momentum < 1.0))
        throw InvalidInput("cd config: final_momentum must be in [0,1)");
    if (momentum_switch_epoch < 0) throw InvalidInput("cd config: momentum_switch_epoch must be >= 0");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
        throw InvalidInput("cd config: weight_decay must be >= 0");
    if (batch_size < 1) throw InvalidInput("cd config: batch_size must be positive");
}

Vector hidden_probs(const RbmLayer& layer, std::span<const double> v) {
    check_unit_interval(v, layer.n_visible(), "hidden_probs");
    Vector out(layer.n_hidden());
    hidden_probs_into(layer, v, out);
    return out;
}

Vector visible_probs(const RbmLayer& layer, std::span<const double> h) {
    check_unit_interval(h, layer.n_hidden(), "visible_probs");
    Vector out(layer.n_visible());
    visible_probs_into(layer, h, out);
    return out;
}

Vector sample_bernoulli(std::span<const double> p, Rng& rng) {
    check_unit_interval(p, p.size(), "sample_bernoulli");
    Vector out(p.size());
    sample_into(p, rng, out);
    return out;
}

CdStepResult cd_step(const RbmLayer& layer, std::span<const Vector> batch, const CdConfig& cfg,
                     const RbmDelta& prev_delta, Rng& rng) {
    cfg.validate();
    if (batch.empty()) throw InvalidInput("cd_step: empty batch");
    for (const Vector& v : batch) check_unit_interval(v, layer.n_visible(), "cd_step");
    if (prev_delta.weights.rows() != layer.n_hidden() || prev_delta.weights.cols() != layer.n_visible() ||
        prev_delta.visible_bias.size() != layer.n_visible() || prev_delta.hidden_bias.size() != layer.n_hidden())
        throw InvalidInput("cd_step: previous delta shape does not match layer");

    const std::size_t nv = layer.n_visible();
    const std::size_t nh = layer.n_hidden();
    RbmDelta grad = RbmDelta::zeros_like(layer);
    Vector h0(nh), h(nh), v(nv), hk(nh);

    for (const Vector& v0 : batch) {
        hidden_probs_into(layer, v0, h0);
        rank1_update(grad.weights, 1.0, h0, v0);
        kernels::axpy(grad.visible_bias.data(), 1.0, v0.data(), nv);
        kernels::axpy(grad.hidden_bias.data(), 1.0, h0.data(), nh);

        sample_into(h0, rng, h);
        for (int step = 0; step < cfg.k; ++step) {
            visible_probs_into(layer, h, v);
            if (cfg.visible_mode == VisibleMode::sampled) sample_into(v, rng, v);
            hidden_probs_into(layer, v, hk);
            if (step + 1 < cfg.k) sample_into(hk, rng, h);
        }
        rank1_update(grad.weights, -1.0, hk, v);
        kernels::axpy(grad.visible_bias.data(), -1.0, v.data(), nv);
        kernels::axpy(grad.hidden_bias.data(), -1.0, hk.data(), nh);
    }

    const double scale = cfg.learning_rate / static_cast<double>(batch.size());
    RbmDelta delta = prev_delta;
    auto& dw = delta.weights.data();
    kernels::scale_add(dw.data(), cfg.momentum, scale, grad.weights.data().data(), dw.size());
    if (cfg.weight_decay != 0.0)
        kernels::axpy(dw.data(), -cfg.learning_rate * cfg.weight_decay, layer.weights().data().data(), dw.size());
    kernels::scale_add(delta.visible_bias.data(), cfg.momentum, scale, grad.visible_bias.data(), nv);
    kernels::scale_add(delta.hidden_bias.data(), cfg.momentum, scale, grad.hidden_bias.data(), nh);

    RbmLayer next = layer;
    auto& w = next.mutable_weights().data();
    kernels::axpy(w.data(), 1.0, dw.data(), w.size());
    kernels::axpy(next.mutable_visible_bias().data(), 1.0, delta.visible_bias.data(), nv);
    kernels::axpy(next.mutable_hidden_bias().data(), 1.0, delta.hidden_bias.data(), nh);
    if (!next.is_finite()) throw NumericOverflow("cd_step: parameters became non-finite");
    return {std::move(next), std::move(delta)};
}

double reconstruction_error(const RbmLayer& layer, std::span<const Vector> data) {
    if (data.empty()) throw InvalidInput("reconstruction_error: empty data");
    Vector h(layer.n_hidden()), r(layer.n_visible());
    double total = 0.0;
    for (const Vector& v : data) {
        check_unit_interval(v, layer.n_visible(), "reconstruction_error");
        hidden_probs_into(layer, v, h);
        visible_probs_into(layer, h, r);
        total += kernels::squared_distance(v.data(), r.data(), v.size());
    }
    return total / static_cast<double>(data.size());
}

std::vector<double> train_cd(RbmLayer& layer, std::span<const Vector> data, int epochs, const CdConfig& cfg,
                             bool monitor) {
    cfg.validate();
    if (epochs < 0) throw InvalidInput("train_cd: negative epoch count");
    std::vector<double> trace;
    if (epochs == 0) return trace;
    if (data.empty()) throw InvalidInput("train_cd: empty data");
    if (monitor) trace.push_back(reconstruction_error(layer, data));

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    RbmDelta delta = RbmDelta::zeros_like(layer);
    std::vector<Vector> batch;
    const auto bs = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        CdConfig step_cfg = cfg;
        if (epoch >= cfg.momentum_switch_epoch) step_cfg.momentum = cfg.final_momentum;
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t end = std::min(order.size(), start + bs);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
            auto result = cd_step(layer, batch, step_cfg, delta, rng);
            layer = std::move(result.layer);
            delta = std::move(result.delta);
        }
        if (monitor) trace.push_back(reconstruction_error(layer, data));
    }
    return trace;
}

}  // namespace dbnkit
