#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "dbnkit/error.hpp"
#include "dbnkit/oracle.hpp"
#include "dbnkit/random.hpp"
#include "dbnkit/rbm.hpp"

using namespace dbnkit;

namespace {

CdConfig plain(int k = 1) {
    CdConfig c;
    c.k = k;
    c.learning_rate = 1.0;
    c.momentum = 0.0;
    c.weight_decay = 0.0;
    return c;
}

std::vector<Vector> uniform_rows(std::size_t n, std::size_t dim, Rng& rng) {
    std::vector<Vector> out(n, Vector(dim));
    for (auto& v : out)
        for (auto& x : v) x = rng.uniform();
    return out;
}

double cosine(const Vector& a, const Vector& b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i], aa += a[i] * a[i], bb += b[i] * b[i];
    return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("layer construction validates shapes") {
    CHECK_THROWS_AS(RbmLayer(0, 3), InvalidInput);
    CHECK_THROWS_AS(RbmLayer(Matrix(2, 3), Vector(2), Vector(2)), InvalidInput);
    RbmLayer l(3, 2);
    CHECK(l.n_visible() == 3);
    CHECK(l.n_hidden() == 2);
    CHECK(l.weights().rows() == 2);
}

TEST_CASE("sample_bernoulli") {
    Rng rng(1);
    CHECK(sample_bernoulli(Vector(5, 0.0), rng) == Vector(5, 0.0));
    CHECK(sample_bernoulli(Vector(5, 1.0), rng) == Vector(5, 1.0));
    CHECK_THROWS_AS(sample_bernoulli(Vector{0.5, 1.5}, rng), InvalidInput);

    Vector mean(4, 0.0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const auto s = sample_bernoulli(Vector(4, 0.5), rng);
        for (std::size_t j = 0; j < 4; ++j) mean[j] += s[j] / n;
    }
    for (double m : mean) CHECK((m >= 0.49 && m <= 0.51));
}

TEST_CASE("conditional probabilities stay inside (0,1)") {
    Rng rng(2);
    auto layer = RbmLayer::random(6, 4, 3.0, rng);
    for (int t = 0; t < 20; ++t) {
        const auto v = uniform_rows(1, 6, rng)[0];
        for (double p : hidden_probs(layer, v)) CHECK((p > 0.0 && p < 1.0));
        for (double p : visible_probs(layer, Vector{1, 0, 1, 1})) CHECK((p > 0.0 && p < 1.0));
    }
    CHECK_THROWS_AS(hidden_probs(layer, Vector(5, 0.5)), InvalidInput);
    CHECK_THROWS_AS(hidden_probs(layer, Vector(6, 2.0)), InvalidInput);
}

TEST_CASE("cd_step with zero learning rate is the identity") {
    Rng rng(3);
    const auto layer = RbmLayer::random(5, 3, 0.1, rng);
    CdConfig cfg;
    cfg.learning_rate = 0.0;
    const auto r = cd_step(layer, uniform_rows(7, 5, rng), cfg, RbmDelta::zeros_like(layer), rng);
    CHECK(r.layer == layer);
}

TEST_CASE("cd_step applies momentum to the previous delta") {
    Rng rng(4);
    const auto layer = RbmLayer::random(3, 2, 0.1, rng);
    auto prev = RbmDelta::zeros_like(layer);
    prev.weights(1, 2) = 0.4;
    prev.visible_bias[0] = -0.2;
    CdConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.momentum = 0.5;
    const auto r = cd_step(layer, uniform_rows(2, 3, rng), cfg, prev, rng);
    CHECK(r.delta.weights(1, 2) == 0.2);
    CHECK(r.delta.visible_bias[0] == -0.1);
    CHECK(r.layer.weights()(1, 2) == layer.weights()(1, 2) + 0.2);
    CHECK(r.layer.weights()(0, 0) == layer.weights()(0, 0));
}

TEST_CASE("symmetric data at zero weights leaves weights at zero") {
    RbmLayer layer(4, 3);
    CdConfig cfg;
    cfg.weight_decay = 0.01;
    Rng rng(5);
    const std::vector<Vector> batch(6, Vector(4, 0.5));
    const auto r = cd_step(layer, batch, cfg, RbmDelta::zeros_like(layer), rng);
    for (double w : r.layer.weights().data()) CHECK(w == 0.0);

    // Averaged update over many repetitions is zero as well.
    double sum = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto step = cd_step(layer, batch, plain(), RbmDelta::zeros_like(layer), rng);
        for (double w : step.delta.weights.data()) sum += w;
    }
    CHECK(std::abs(sum) < 1e-12);
}

TEST_CASE("cd_step is deterministic per seed") {
    Rng init(6);
    const auto layer = RbmLayer::random(6, 4, 0.5, init);
    const auto data = uniform_rows(8, 6, init);
    Rng a(77), b(77);
    CdConfig cfg;
    cfg.k = 3;
    const auto ra = cd_step(layer, data, cfg, RbmDelta::zeros_like(layer), a);
    const auto rb = cd_step(layer, data, cfg, RbmDelta::zeros_like(layer), b);
    CHECK(ra.layer == rb.layer);
    CHECK(ra.delta.flatten() == rb.delta.flatten());
}

TEST_CASE("cd_step errors") {
    RbmLayer layer(3, 2);
    Rng rng(0);
    CHECK_THROWS_AS(cd_step(layer, std::vector<Vector>{}, CdConfig{}, RbmDelta::zeros_like(layer), rng), InvalidInput);
    CHECK_THROWS_AS(cd_step(layer, std::vector<Vector>{Vector(4, 0.5)}, CdConfig{}, RbmDelta::zeros_like(layer), rng),
                    InvalidInput);
    CdConfig bad;
    bad.k = 0;
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
    bad = CdConfig{};
    bad.momentum = 1.0;
    CHECK_THROWS_AS(bad.validate(), InvalidInput);

    Matrix w(2, 3);
    for (auto& x : w.data()) x = 1e308;
    RbmLayer huge(w, Vector(3, 0.0), Vector(2, 0.0));
    CdConfig blow;
    blow.learning_rate = 1e308;
    blow.weight_decay = 1.0;
    CHECK_THROWS_AS(cd_step(huge, std::vector<Vector>{Vector(3, 1.0)}, blow, RbmDelta::zeros_like(huge), rng),
                    NumericOverflow);
}

TEST_CASE("mean CD-1 update points along the exact gradient") {
    Rng rng(0);
    auto layer = RbmLayer::random(2, 2, 1.0, rng);
    layer.mutable_visible_bias() = {0.3, -0.4};
    layer.mutable_hidden_bias() = {-0.2, 0.5};
    const std::vector<Vector> data{{1, 0}, {1, 1}, {0, 1}, {1, 1}};
    const auto exact = oracle::exact_gradient(oracle::TinyRbm(layer), data).weights.data();

    auto cfg = plain(1);
    cfg.visible_mode = VisibleMode::sampled;
    Vector mean(4, 0.0);
    const int reps = 20000;
    for (int r = 0; r < reps; ++r) {
        const auto d = cd_step(layer, data, cfg, RbmDelta::zeros_like(layer), rng).delta.weights.data();
        for (std::size_t i = 0; i < 4; ++i) mean[i] += d[i] / reps;
    }
    CHECK(cosine(mean, exact) > 0.9);
}

TEST_CASE("reconstruction_error") {
    RbmLayer zero(3, 2);
    CHECK(reconstruction_error(zero, std::vector<Vector>{Vector(3, 0.5), Vector(3, 0.5)}) == 0.0);
    CHECK_THROWS_AS(reconstruction_error(zero, std::vector<Vector>{}), InvalidInput);

    RbmLayer sat(Matrix(2, 3), Vector(3, 50.0), Vector(2, 0.0));
    CHECK(reconstruction_error(sat, std::vector<Vector>{Vector(3, 1.0)}) < 1e-3);

    Rng rng(3);
    const auto layer = RbmLayer::random(4, 3, 1.0, rng);
    const auto data = uniform_rows(5, 4, rng);
    double expect = 0;
    for (const auto& v : data) {
        const auto r = visible_probs(layer, hidden_probs(layer, v));
        for (std::size_t i = 0; i < v.size(); ++i) expect += (v[i] - r[i]) * (v[i] - r[i]);
    }
    expect /= data.size();
    CHECK(reconstruction_error(layer, data) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("training lowers reconstruction error") {
    Rng rng(8);
    auto layer = RbmLayer::random(6, 4, 0.01, rng);
    std::vector<Vector> data;
    for (int i = 0; i < 20; ++i) {
        // Two prototypes with noise.
        Vector v = i % 2 ? Vector{0.9, 0.9, 0.9, 0.1, 0.1, 0.1} : Vector{0.1, 0.1, 0.1, 0.9, 0.9, 0.9};
        for (auto& x : v) x = std::clamp(x + 0.05 * rng.normal(), 0.0, 1.0);
        data.push_back(v);
    }
    CdConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.batch_size = 5;
    cfg.seed = 1;
    const auto trace = train_cd(layer, data, 100, cfg, true);
    REQUIRE(trace.size() == 101);
    CHECK(trace.back() < trace.front());
    CHECK(reconstruction_error(layer, data) == trace.back());
}
