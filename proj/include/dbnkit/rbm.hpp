#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dbnkit/matrix.hpp"
#include "dbnkit/random.hpp"

namespace dbnkit {

// One restricted Boltzmann machine layer. Visible units take real values in
// [0,1] (treated as probabilities); hidden units are stochastic binary.
class RbmLayer {
public:
    RbmLayer() = default;
    RbmLayer(std::size_t n_visible, std::size_t n_hidden);
    // Throws InvalidInput on inconsistent shapes or non-finite values.
    RbmLayer(Matrix weights, Vector visible_bias, Vector hidden_bias);

    // Gaussian(0, stddev^2) weights, zero biases.
    static RbmLayer random(std::size_t n_visible, std::size_t n_hidden, double stddev, Rng& rng);

    std::size_t n_visible() const noexcept { return visible_bias_.size(); }
    std::size_t n_hidden() const noexcept { return hidden_bias_.size(); }

    // weights(j, i) couples hidden unit j with visible unit i.
    const Matrix& weights() const noexcept { return weights_; }
    const Vector& visible_bias() const noexcept { return visible_bias_; }
    const Vector& hidden_bias() const noexcept { return hidden_bias_; }

    Matrix& mutable_weights() noexcept { return weights_; }
    Vector& mutable_visible_bias() noexcept { return visible_bias_; }
    Vector& mutable_hidden_bias() noexcept { return hidden_bias_; }

    bool is_finite() const;

    bool operator==(const RbmLayer&) const = default;

private:
    Matrix weights_;
    Vector visible_bias_;
    Vector hidden_bias_;
};

// Parameter-shaped quantity: a CD update, a momentum buffer or a gradient.
struct RbmDelta {
    Matrix weights;
    Vector visible_bias;
    Vector hidden_bias;

    static RbmDelta zeros_like(const RbmLayer& layer);
    // Weights then visible bias then hidden bias, flattened.
    Vector flatten() const;
};

enum class VisibleMode {
    mean_field,  // reconstructions are visible probabilities (default)
    sampled,     // reconstructions are Bernoulli samples; for binary data
};

struct CdConfig {
    int k = 1;
    double learning_rate = 0.01;
    double momentum = 0.5;
    // Momentum used from `momentum_switch_epoch` on by train_cd.
    double final_momentum = 0.9;
    int momentum_switch_epoch = 5;
    double weight_decay = 0.0002;
    int batch_size = 100;
    std::uint64_t seed = 0;
    VisibleMode visible_mode = VisibleMode::mean_field;

    // Throws InvalidInput when a field is out of range.
    void validate() const;
};

// logistic(hidden_bias + W v)
Vector hidden_probs(const RbmLayer& layer, std::span<const double> v);
// logistic(visible_bias + W^T h)
Vector visible_probs(const RbmLayer& layer, std::span<const double> h);

// Entry i is 1 with probability p[i].
Vector sample_bernoulli(std::span<const double> p, Rng& rng);

struct CdStepResult {
    RbmLayer layer;
    RbmDelta delta;
};

// One contrastive-divergence update on a mini-batch:
//   delta = momentum * prev_delta + lr * ((pos - neg) / |batch| - decay * W)
// Positive statistics use the data-clamped hidden probabilities; the k Gibbs
// steps sample hidden states and reconstruct visibles per cfg.visible_mode.
CdStepResult cd_step(const RbmLayer& layer, std::span<const Vector> batch, const CdConfig& cfg,
                     const RbmDelta& prev_delta, Rng& rng);

// Mean squared distance between v and its deterministic reconstruction.
double reconstruction_error(const RbmLayer& layer, std::span<const Vector> data);

// Trains for `epochs` sweeps of `data` with mini-batches of cfg.batch_size,
// shuffling once per epoch with a generator seeded from cfg.seed. When
// `monitor` is set, returns the reconstruction error before training followed
// by the error after each epoch; otherwise returns an empty vector.
std::vector<double> train_cd(RbmLayer& layer, std::span<const Vector> data, int epochs, const CdConfig& cfg,
                             bool monitor = false);

}  // namespace dbnkit
