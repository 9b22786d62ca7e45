#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dbnkit/error.hpp"
#include "dbnkit/features.hpp"
#include "dbnkit/random.hpp"

using namespace dbnkit;
using namespace dbnkit::features;

namespace {

GrayImage noise_image(std::size_t w, std::size_t h, Rng& rng) {
    std::vector<double> px(w * h);
    for (auto& p : px) p = rng.uniform();
    return GrayImage(w, h, std::move(px));
}

Descriptor blob_point(const Vector& center, Rng& rng) {
    Descriptor d;
    d.values = center;
    for (auto& x : d.values) x += 0.01 * rng.normal();
    return d;
}

double objective(std::span<const Descriptor> pts, const Codebook& cb) {
    double s = 0;
    for (const auto& p : pts) {
        double best = 1e300;
        for (const auto& c : cb.centroids()) {
            double d = 0;
            for (std::size_t i = 0; i < c.size(); ++i) d += (p.values[i] - c[i]) * (p.values[i] - c[i]);
            best = std::min(best, d);
        }
        s += best;
    }
    return s;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("image validation and downsampling") {
    CHECK_THROWS_AS(GrayImage(2, 2, {0, 0, 0}), InvalidInput);
    CHECK_THROWS_AS(GrayImage(1, 1, {1.5}), InvalidInput);
    const GrayImage img(4, 2, {0, 1, 0.5, 0.5, 1, 0, 0.5, 0.5});
    const auto half = img.downsample();
    CHECK(half.width() == 2);
    CHECK(half.height() == 1);
    CHECK(half.at(0, 0) == 0.5);
    CHECK(half.at(1, 0) == 0.5);
}

TEST_CASE("pgm") {
    const std::string text = "P5\n# comment\n3 2\n255\n";
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    for (std::uint8_t v : {0, 51, 255, 102, 204, 153}) bytes.push_back(v);
    const auto img = decode_pgm(bytes);
    CHECK(img.width() == 3);
    CHECK(img.height() == 2);
    CHECK(img.at(1, 0) == 51.0 / 255.0);
    CHECK(img.at(2, 1) == 153.0 / 255.0);
    CHECK(decode_pgm(encode_pgm(img)).pixels() == img.pixels());

    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(decode_pgm(truncated), FormatError);
    auto p2 = bytes;
    p2[1] = '2';
    CHECK_THROWS_AS(decode_pgm(p2), FormatError);
    const std::string deep = "P5 3 2 65535\n";
    CHECK_THROWS_AS(decode_pgm(std::vector<std::uint8_t>(deep.begin(), deep.end())), FormatError);
}

TEST_CASE("patch pyramid counts") {
    PatchConfig cfg;
    const GrayImage small(16, 16, std::vector<double>(256, 0.3));
    const auto one = extract_patch_pyramid(small, cfg);
    REQUIRE(one.size() == 1);
    CHECK(one[0].level == 0);
    CHECK(one[0].center_x == 8.0);

    cfg.grid_spacing = 16;
    const GrayImage big(64, 64, std::vector<double>(64 * 64, 0.3));
    CHECK(extract_patch_pyramid(big, cfg).size() == 21);

    cfg = PatchConfig{};
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        const std::size_t w = 16 + rng.index(120), h = 16 + rng.index(120);
        std::size_t expected = 0;
        for (std::size_t lw = w, lh = h; lw >= 16 && lh >= 16; lw /= 2, lh /= 2)
            expected += ((lw - 16) / 8 + 1) * ((lh - 16) / 8 + 1);
        CHECK(extract_patch_pyramid(GrayImage(w, h, std::vector<double>(w * h, 0.1)), cfg).size() == expected);
    }

    CHECK_THROWS_AS(extract_patch_pyramid(GrayImage(15, 40, std::vector<double>(600, 0.1)), cfg), InvalidInput);
    cfg.patch_size = 3;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

TEST_CASE("constant image gives constant patches at every level") {
    const GrayImage img(70, 50, std::vector<double>(70 * 50, 0.625));
    const auto patches = extract_patch_pyramid(img, PatchConfig{});
    CHECK(patches.back().level == 1);
    for (const auto& p : patches)
        for (double v : p.pixels) CHECK(v == 0.625);
}

TEST_CASE("patch centres are in original coordinates") {
    const GrayImage img(64, 64, std::vector<double>(64 * 64, 0.5));
    PatchConfig cfg;
    cfg.grid_spacing = 16;
    const auto patches = extract_patch_pyramid(img, cfg);
    const auto& last = patches.back();
    CHECK(last.level == 2);
    CHECK(last.center_x == 32.0);
    CHECK(last.center_y == 32.0);
}

TEST_CASE("descriptor") {
    const auto flat = describe_patch(std::vector<double>(64, 0.4), 8, 1e-4);
    CHECK(flat.low_variance);
    CHECK(sum(flat.values) == 0.0);
    CHECK_THROWS_AS(describe_patch(std::vector<double>(60, 0.4), 8, 1e-4), InvalidInput);

    std::vector<double> ramp(16 * 16);
    for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x) ramp[y * 16 + x] = x / 16.0;
    const auto d = describe_patch(ramp, 16, 1e-4);
    CHECK(!d.low_variance);
    for (std::size_t i = 0; i < kDescriptorSize; ++i)
        if (i % kOrientationBins != 0) CHECK(d.values[i] == 0.0);
    double n2 = 0;
    for (double v : d.values) n2 += v * v;
    CHECK(std::abs(std::sqrt(n2) - 1) < 1e-6);

    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> px(16 * 16);
        for (auto& p : px) p = rng.uniform();
        // A strong edge makes the clamp bite.
        for (std::size_t y = 0; y < 16; ++y) px[y * 16 + 7] = 1.0;
        const auto r = describe_patch(px, 16, 1e-4);
        double s2 = 0;
        for (double v : r.values) {
            CHECK(v >= 0.0);
            s2 += v * v;
        }
        CHECK(std::abs(std::sqrt(s2) - 1) < 1e-6);
    }
}

TEST_CASE("descriptor clamp") {
    // Left part rises three times faster than the right part, all along x.
    std::vector<double> px(16 * 16);
    for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x)
            px[y * 16 + x] = x <= 8 ? 0.03 * x : 0.24 + 0.01 * (x - 8.0);
    const auto d = describe_patch(px, 16, 1e-6);

    // Per-row gradient mass of each cell column, with half steps at the borders:
    // 0.015+3*0.03, 4*0.03, 0.02+3*0.01, 3*0.01+0.005.
    const double col[4] = {0.105, 0.12, 0.05, 0.035};
    double n = 0;
    for (double c : col) n += 4 * c * c;
    double clamped[4], m = 0;
    for (int i = 0; i < 4; ++i) {
        clamped[i] = std::min(col[i] / std::sqrt(n), kDescriptorClamp);
        m += 4 * clamped[i] * clamped[i];
    }
    for (std::size_t row = 0; row < 4; ++row)
        for (std::size_t c = 0; c < 4; ++c)
            CHECK(d.values[(row * 4 + c) * kOrientationBins] == doctest::Approx(clamped[c] / std::sqrt(m)).epsilon(1e-9));
}

TEST_CASE("kmeans on separated blobs") {
    Rng rng(3);
    Vector a(kDescriptorSize, 0.0), b(kDescriptorSize, 0.0);
    a[0] = 1.0;
    b[5] = 1.0;
    std::vector<Descriptor> pts;
    std::vector<int> truth;
    for (int i = 0; i < 60; ++i) {
        pts.push_back(blob_point(i % 2 ? a : b, rng));
        truth.push_back(i % 2);
    }
    const auto r = kmeans(pts, 2, 7, 50);
    const int flip = r.assignments[0] == static_cast<std::size_t>(truth[0]) ? 0 : 1;
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(static_cast<int>(r.assignments[i]) == (truth[i] ^ flip));

    double best = 1e300;
    for (std::uint64_t s = 100; s < 150; ++s) best = std::min(best, objective(pts, kmeans_codebook(pts, 2, s, 50)));
    CHECK(objective(pts, r.codebook) <= 1.01 * best);

    for (std::size_t i = 1; i < r.objective.size(); ++i) CHECK(r.objective[i] <= r.objective[i - 1] + 1e-12);
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(quantize(pts[i], r.codebook) == r.assignments[i]);
}

TEST_CASE("kmeans with K equal to the number of points") {
    Rng rng(4);
    std::vector<Descriptor> pts(6);
    for (auto& p : pts) {
        p.values.resize(8);
        for (auto& x : p.values) x = rng.uniform();
    }
    const auto r = kmeans(pts, 6, 1, 20);
    CHECK(r.objective.back() == 0.0);
    for (const auto& p : pts)
        CHECK(std::count(r.codebook.centroids().begin(), r.codebook.centroids().end(), p.values) == 1);
    CHECK_THROWS_AS(kmeans(pts, 7, 1, 20), InvalidInput);
}

TEST_CASE("kmeans is deterministic and skips low-variance descriptors") {
    Rng rng(5);
    std::vector<Descriptor> pts(30);
    for (auto& p : pts) {
        p.values.resize(4);
        for (auto& x : p.values) x = rng.uniform();
    }
    pts[3].low_variance = true;
    const auto a = kmeans(pts, 4, 9, 30);
    const auto b = kmeans(pts, 4, 9, 30);
    CHECK(a.codebook == b.codebook);
    CHECK(a.assignments.size() == 29);
}

TEST_CASE("quantize") {
    Rng rng(6);
    std::vector<Vector> cents(10, Vector(5));
    for (auto& c : cents)
        for (auto& x : c) x = rng.uniform();
    const Codebook cb(cents);
    Descriptor d{cents[7], false};
    CHECK(quantize(d, cb) == 7);
    d.low_variance = true;
    CHECK(quantize(d, cb) == 10);
    for (int t = 0; t < 100; ++t) {
        Descriptor q{Vector(5), false};
        for (auto& x : q.values) x = rng.uniform();
        std::size_t arg = 0;
        double best = 1e300;
        for (std::size_t c = 0; c < cents.size(); ++c) {
            double dist = 0;
            for (std::size_t i = 0; i < 5; ++i) dist += (q.values[i] - cents[c][i]) * (q.values[i] - cents[c][i]);
            if (dist < best) best = dist, arg = c;
        }
        CHECK(quantize(q, cb) == arg);
    }
    CHECK_THROWS_AS(quantize(Descriptor{Vector(4), false}, cb), InvalidInput);
    const Codebook tie({Vector{0.0}, Vector{2.0}});
    CHECK(quantize(Descriptor{Vector{1.0}, false}, tie) == 0);
}

TEST_CASE("codebook serialization") {
    const Codebook cb({Vector{0.1, -2.5}, Vector{1e-300, 3.0}, Vector{7.0, 0.0}});
    const auto bytes = serialize_codebook(cb);
    CHECK(bytes.size() == 4 + 4 + 4 + 8 * 6);
    CHECK(deserialize_codebook(bytes) == cb);
    auto bad = bytes;
    bad[3] = '2';
    CHECK_THROWS_AS(deserialize_codebook(bad), FormatError);
    bad = bytes;
    bad.resize(20);
    CHECK_THROWS_AS(deserialize_codebook(bad), FormatError);
}

TEST_CASE("histograms") {
    const std::vector<WordOccurrence> words{{3, 10, 10}, {1, 90, 10}, {3, 50, 90}, {5, 40, 40}};
    const auto g1 = build_histogram(words, 100, 100, 5, 1, 0.25);
    CHECK(g1.values.size() == 6);
    CHECK(g1.values[3] == 0.5);
    CHECK(g1.values[5] == 0.25);
    CHECK(std::abs(sum(g1.values) - 1) < 1e-12);

    const std::vector<WordOccurrence> corner{{3, 5, 5}};
    const auto hard = build_histogram(corner, 100, 100, 10, 2, 0.0);
    CHECK(hard.values.size() == 41);
    CHECK(hard.values[3] == 1.0);

    CHECK(build_histogram(corner, 100, 100, 200, 2, 0.25).values.size() == 801);
    const auto g4 = build_histogram(words, 100, 100, 200, 4, 0.25);
    CHECK(g4.values.size() == 3201);
    CHECK(std::abs(sum(g4.values) - 1) < 1e-9);
    CHECK(*std::min_element(g4.values.begin(), g4.values.end()) >= 0.0);

    const std::vector<WordOccurrence> pair{{0, 10, 50}, {1, 90, 50}};
    const std::vector<WordOccurrence> swapped{{0, 90, 50}, {1, 10, 50}};
    CHECK(build_histogram(pair, 100, 100, 2, 1, 0.25).values == build_histogram(swapped, 100, 100, 2, 1, 0.25).values);
    CHECK(build_histogram(pair, 100, 100, 2, 2, 0.25).values != build_histogram(swapped, 100, 100, 2, 2, 0.25).values);

    CHECK_THROWS_AS(build_histogram({}, 100, 100, 5, 1, 0.25), InvalidInput);
    CHECK_THROWS_AS(build_histogram(words, 100, 100, 5, 3, 0.25), InvalidInput);
    CHECK_THROWS_AS(build_histogram(words, 100, 100, 4, 1, 0.25), InvalidInput);
}

TEST_CASE("pipeline") {
    Rng rng(7);
    std::vector<GrayImage> images;
    std::vector<std::optional<int>> labels;
    for (int i = 0; i < 4; ++i) {
        images.push_back(noise_image(40 + 8 * i, 48, rng));
        labels.push_back(i % 2);
    }
    images.push_back(GrayImage(32, 32, std::vector<double>(32 * 32, 0.2)));
    labels.push_back(std::nullopt);
    PipelineConfig cfg;
    cfg.vocabulary = 10;
    cfg.grid = 2;
    cfg.seed = 3;
    const auto a = run_pipeline(images, labels, cfg);
    const auto b = run_pipeline(images, labels, cfg);
    REQUIRE(a.histograms.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(a.histograms[i].values == b.histograms[i].values);
        CHECK(std::abs(sum(a.histograms[i].values) - 1) < 1e-9);
        CHECK(a.histograms[i].values.size() == 41);
        CHECK(a.histograms[i].label == labels[i]);
    }
    CHECK(a.histograms[4].values[40] == 1.0);

    const auto reuse = run_pipeline(images, labels, cfg, &a.codebook);
    CHECK(reuse.histograms[2].values == a.histograms[2].values);
    cfg.vocabulary = 11;
    CHECK_THROWS_AS(run_pipeline(images, labels, cfg, &a.codebook), InvalidInput);
}
