#include "dbnkit/features.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <numbers>

#include "dbnkit/error.hpp"
#include "dbnkit/io.hpp"
#include "dbnkit/random.hpp"

namespace dbnkit::features {

GrayImage::GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width_ == 0 || height_ == 0) throw InvalidInput("image: dimensions must be positive");
    if (pixels_.size() != width_ * height_) throw InvalidInput("image: pixel count does not match dimensions");
    for (double p : pixels_)
        if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("image: pixel outside [0,1]");
}

GrayImage GrayImage::downsample() const {
    const std::size_t w = width_ / 2;
    const std::size_t h = height_ / 2;
    if (w == 0 || h == 0) throw InvalidInput("image: too small to downsample");
    std::vector<double> out(w * h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            out[y * w + x] = 0.25 * (at(2 * x, 2 * y) + at(2 * x + 1, 2 * y) + at(2 * x, 2 * y + 1) +
                                     at(2 * x + 1, 2 * y + 1));
    return GrayImage(w, h, std::move(out));
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::size_t read_header_number(std::span<const std::uint8_t> bytes, std::size_t& pos, const char* what) {
    while (pos < bytes.size()) {
        if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(bytes[pos])) {
            ++pos;
        } else {
            break;
        }
    }
    const std::size_t start = pos;
    std::size_t value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
        value = value * 10 + (bytes[pos] - '0');
        if (value > (1u << 30)) throw FormatError(std::string("pgm: ") + what + " too large", start);
        ++pos;
    }
    if (pos == start) throw FormatError(std::string("pgm: expected ") + what, start);
    return value;
}

}  // namespace

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError("pgm: expected magic 'P5'", 0);
    std::size_t pos = 2;
    const std::size_t width = read_header_number(bytes, pos, "width");
    const std::size_t height = read_header_number(bytes, pos, "height");
    const std::size_t maxval_pos = pos;
    const std::size_t maxval = read_header_number(bytes, pos, "maxval");
    if (maxval != 255) throw FormatError("pgm: only maxval 255 is supported", maxval_pos);
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("pgm: missing header terminator", pos);
    ++pos;
    if (width == 0 || height == 0) throw FormatError("pgm: zero dimension", pos);
    if (bytes.size() - pos < width * height) throw FormatError("pgm: truncated pixel data", bytes.size());
    std::vector<double> pixels(width * height);
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = bytes[pos + i] / 255.0;
    return GrayImage(width, height, std::move(pixels));
}

GrayImage load_pgm(const std::string& path) { return decode_pgm(io::read_file(path)); }

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
    const std::string header =
        "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    for (double p : img.pixels()) out.push_back(static_cast<std::uint8_t>(std::lround(p * 255.0)));
    return out;
}

void PatchConfig::validate() const {
    if (patch_size < 4) throw InvalidInput("patch config: patch_size must be >= 4");
    if (grid_spacing < 1) throw InvalidInput("patch config: grid_spacing must be >= 1");
    if (!(variance_threshold >= 0.0)) throw InvalidInput("patch config: variance_threshold must be >= 0");
}

std::size_t patch_count_per_level(std::size_t w, std::size_t h, const PatchConfig& cfg) {
    const auto n = static_cast<std::size_t>(cfg.patch_size);
    const auto l = static_cast<std::size_t>(cfg.grid_spacing);
    if (w < n || h < n) return 0;
    return ((w - n) / l + 1) * ((h - n) / l + 1);
}

std::vector<Patch> extract_patch_pyramid(const GrayImage& img, const PatchConfig& cfg) {
    cfg.validate();
    const auto n = static_cast<std::size_t>(cfg.patch_size);
    const auto l = static_cast<std::size_t>(cfg.grid_spacing);
    if (img.width() < n || img.height() < n)
        throw InvalidInput("extract_patch_pyramid: image smaller than one patch");

    std::vector<Patch> patches;
    GrayImage level_img = img;
    for (int level = 0;; ++level) {
        const double scale = static_cast<double>(std::size_t{1} << level);
        for (std::size_t y0 = 0; y0 + n <= level_img.height(); y0 += l) {
            for (std::size_t x0 = 0; x0 + n <= level_img.width(); x0 += l) {
                Patch p;
                p.side = n;
                p.level = level;
                p.center_x = (static_cast<double>(x0) + 0.5 * static_cast<double>(n)) * scale;
                p.center_y = (static_cast<double>(y0) + 0.5 * static_cast<double>(n)) * scale;
                p.pixels.reserve(n * n);
                for (std::size_t y = 0; y < n; ++y)
                    for (std::size_t x = 0; x < n; ++x) p.pixels.push_back(level_img.at(x0 + x, y0 + y));
                patches.push_back(std::move(p));
            }
        }
        if (level_img.width() / 2 < n || level_img.height() / 2 < n) break;
        level_img = level_img.downsample();
    }
    return patches;
}

Descriptor describe_patch(std::span<const double> pixels, std::size_t side, double variance_threshold) {
    if (side < 4 || pixels.size() != side * side)
        throw InvalidInput("describe_patch: expected a square patch with side >= 4");

    Descriptor d;
    d.values.assign(kDescriptorSize, 0.0);
    double mean = 0.0;
    for (double p : pixels) mean += p;
    mean /= static_cast<double>(pixels.size());
    double var = 0.0;
    for (double p : pixels) var += (p - mean) * (p - mean);
    var /= static_cast<double>(pixels.size());
    if (var < variance_threshold) {
        d.low_variance = true;
        return d;
    }

    auto px = [&](std::size_t x, std::size_t y) { return pixels[y * side + x]; };
    const double bin_width = 2.0 * std::numbers::pi / static_cast<double>(kOrientationBins);
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
            const double gx = px(std::min(x + 1, side - 1), y) - px(x == 0 ? 0 : x - 1, y);
            const double gy = px(x, std::min(y + 1, side - 1)) - px(x, y == 0 ? 0 : y - 1);
            const double mag = std::hypot(gx, gy);
            if (mag == 0.0) continue;
            double angle = std::atan2(gy, gx);
            if (angle < 0.0) angle += 2.0 * std::numbers::pi;
            const auto bin = std::min(kOrientationBins - 1, static_cast<std::size_t>(angle / bin_width));
            const std::size_t cell = (y * kDescriptorCells / side) * kDescriptorCells + x * kDescriptorCells / side;
            d.values[cell * kOrientationBins + bin] += mag;
        }
    }

    auto normalize = [&]() {
        const double norm = std::sqrt(kernels::dot(d.values.data(), d.values.data(), d.values.size()));
        if (norm == 0.0) return false;
        for (double& v : d.values) v /= norm;
        return true;
    };
    if (!normalize()) {
        d.low_variance = true;
        return d;
    }
    for (double& v : d.values) v = std::min(v, kDescriptorClamp);
    normalize();
    return d;
}

Codebook::Codebook(std::vector<Vector> centroids) : centroids_(std::move(centroids)) {
    if (centroids_.empty()) throw InvalidInput("codebook: no centroids");
    for (const auto& c : centroids_) {
        if (c.size() != centroids_.front().size() || c.empty())
            throw InvalidInput("codebook: centroid dimensions differ");
        if (!all_finite(c)) throw InvalidInput("codebook: non-finite centroid");
    }
}

namespace {

std::size_t nearest(std::span<const double> x, const std::vector<Vector>& centroids, double* best_dist) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double dist = kernels::squared_distance(x.data(), centroids[c].data(), x.size());
        if (dist < best_d) {
            best_d = dist;
            best = c;
        }
    }
    if (best_dist) *best_dist = best_d;
    return best;
}

}  // namespace

KMeansResult kmeans(std::span<const Descriptor> descriptors, std::size_t k, std::uint64_t seed, int max_iters) {
    if (k == 0) throw InvalidInput("kmeans: K must be positive");
    if (max_iters < 0) throw InvalidInput("kmeans: max_iters must be >= 0");
    std::vector<const Vector*> points;
    for (const auto& d : descriptors)
        if (!d.low_variance) points.push_back(&d.values);
    if (points.size() < k)
        throw InvalidInput("kmeans: " + std::to_string(points.size()) + " usable descriptors, need at least K = " +
                           std::to_string(k));
    const std::size_t dim = points.front()->size();
    for (const auto* p : points)
        if (p->size() != dim) throw InvalidInput("kmeans: descriptor dimensions differ");
    const std::size_t n = points.size();

    Rng rng(seed);
    std::vector<Vector> centroids;
    centroids.push_back(*points[rng.index(n)]);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = kernels::squared_distance(points[i]->data(), centroids[0].data(), dim);
    while (centroids.size() < k) {
        double total = 0.0;
        for (double x : d2) total += x;
        std::size_t pick = n - 1;
        if (total > 0.0) {
            const double r = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > r && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.index(n);
        }
        centroids.push_back(*points[pick]);
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], kernels::squared_distance(points[i]->data(), centroids.back().data(), dim));
    }

    KMeansResult result;
    std::vector<std::size_t> assign(n, k);
    std::vector<double> dist(n);
    for (int iter = 0;; ++iter) {
        bool changed = false;
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = nearest(*points[i], centroids, &dist[i]);
            if (c != assign[i]) changed = true;
            assign[i] = c;
            objective += dist[i];
        }
        result.objective.push_back(objective);
        if (!changed || iter == max_iters) break;

        std::vector<std::size_t> counts(k, 0);
        for (auto& c : centroids) std::fill(c.begin(), c.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            kernels::axpy(centroids[assign[i]].data(), 1.0, points[i]->data(), dim);
            ++counts[assign[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                for (double& x : centroids[c]) x /= static_cast<double>(counts[c]);
                continue;
            }
            const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
            centroids[c] = *points[far];
            dist[far] = -1.0;
        }
        result.iterations = iter + 1;
    }
    result.codebook = Codebook(std::move(centroids));
    result.assignments = std::move(assign);
    return result;
}

Codebook kmeans_codebook(std::span<const Descriptor> descriptors, std::size_t k, std::uint64_t seed,
                         int max_iters) {
    return kmeans(descriptors, k, seed, max_iters).codebook;
}

std::size_t quantize(const Descriptor& d, const Codebook& cb) {
    if (d.low_variance) return cb.size();
    if (d.values.size() != cb.dim())
        throw InvalidInput("quantize: descriptor length " + std::to_string(d.values.size()) + " != codebook dim " +
                           std::to_string(cb.dim()));
    return nearest(d.values, cb.centroids(), nullptr);
}

std::vector<std::uint8_t> serialize_codebook(const Codebook& cb) {
    io::ByteWriter out;
    out.put_bytes("CBK1");
    out.put_u32(static_cast<std::uint32_t>(cb.size()));
    out.put_u32(static_cast<std::uint32_t>(cb.dim()));
    for (const auto& c : cb.centroids())
        for (double x : c) out.put_f64(x);
    return std::move(out.bytes());
}

Codebook deserialize_codebook(std::span<const std::uint8_t> bytes) {
    io::ByteReader in(bytes);
    in.expect_magic("CBK1");
    const std::size_t k_pos = in.position();
    const std::uint32_t k = in.get_u32();
    const std::uint32_t dim = in.get_u32();
    if (k == 0 || dim == 0) throw FormatError("codebook: zero K or dimension", k_pos);
    std::vector<Vector> centroids(k, Vector(dim));
    for (auto& c : centroids)
        for (double& x : c) x = in.get_f64();
    if (!in.at_end()) throw FormatError("codebook: trailing bytes", in.position());
    try {
        return Codebook(std::move(centroids));
    } catch (const InvalidInput& e) {
        throw FormatError(std::string("codebook: ") + e.what(), in.position());
    }
}

HistogramSample build_histogram(std::span<const WordOccurrence> words, std::size_t width, std::size_t height,
                                std::size_t k, int grid, double smoothing_sigma) {
    if (words.empty()) throw InvalidInput("build_histogram: no words");
    if (grid != 1 && grid != 2 && grid != 4) throw InvalidInput("build_histogram: grid must be 1, 2 or 4");
    if (k == 0) throw InvalidInput("build_histogram: K must be positive");
    if (width == 0 || height == 0) throw InvalidInput("build_histogram: image dimensions must be positive");
    if (!(smoothing_sigma >= 0.0) || !std::isfinite(smoothing_sigma))
        throw InvalidInput("build_histogram: smoothing_sigma must be finite and >= 0");

    const auto g = static_cast<std::size_t>(grid);
    const std::size_t cells = g * g;
    HistogramSample out;
    out.grid = grid;
    out.vocabulary = k;
    out.values.assign(cells * k + 1, 0.0);

    const double cw = static_cast<double>(width) / static_cast<double>(g);
    const double ch = static_cast<double>(height) / static_cast<double>(g);
    std::vector<double> d2(cells), weight(cells);
    for (const auto& w : words) {
        if (w.word > k) throw InvalidInput("build_histogram: word index " + std::to_string(w.word) + " > K");
        if (w.word == k) {
            out.values[cells * k] += 1.0;
            continue;
        }
        for (std::size_t c = 0; c < cells; ++c) {
            const double dx = (w.x - (static_cast<double>(c % g) + 0.5) * cw) / cw;
            const double dy = (w.y - (static_cast<double>(c / g) + 0.5) * ch) / ch;
            d2[c] = dx * dx + dy * dy;
        }
        const auto nearest_cell = static_cast<std::size_t>(std::min_element(d2.begin(), d2.end()) - d2.begin());
        if (smoothing_sigma == 0.0 || cells == 1) {
            out.values[nearest_cell * k + w.word] += 1.0;
            continue;
        }
        const double inv = 1.0 / (2.0 * smoothing_sigma * smoothing_sigma);
        double total = 0.0;
        for (std::size_t c = 0; c < cells; ++c) {
            weight[c] = std::exp(-(d2[c] - d2[nearest_cell]) * inv);
            total += weight[c];
        }
        for (std::size_t c = 0; c < cells; ++c) out.values[c * k + w.word] += weight[c] / total;
    }
    const double n = static_cast<double>(words.size());
    for (double& v : out.values) v /= n;
    return out;
}

ImageWords describe_image(const GrayImage& img, const PatchConfig& cfg) {
    ImageWords out;
    out.patches = extract_patch_pyramid(img, cfg);
    out.descriptors.reserve(out.patches.size());
    for (const auto& p : out.patches) out.descriptors.push_back(describe_patch(p.pixels, p.side, cfg.variance_threshold));
    return out;
}

PipelineResult run_pipeline(std::span<const GrayImage> images, std::span<const std::optional<int>> labels,
                            const PipelineConfig& cfg, const Codebook* codebook) {
    if (images.empty()) throw InvalidInput("pipeline: no images");
    if (labels.size() != images.size()) throw InvalidInput("pipeline: label count does not match image count");
    std::vector<ImageWords> described;
    described.reserve(images.size());
    for (const auto& img : images) described.push_back(describe_image(img, cfg.patch));

    PipelineResult result;
    if (codebook) {
        result.codebook = *codebook;
        if (result.codebook.size() != cfg.vocabulary)
            throw InvalidInput("pipeline: supplied codebook size differs from configured vocabulary");
    } else {
        std::vector<Descriptor> all;
        for (const auto& d : described) all.insert(all.end(), d.descriptors.begin(), d.descriptors.end());
        result.codebook = kmeans_codebook(all, cfg.vocabulary, cfg.seed, cfg.kmeans_iters);
    }
    for (std::size_t i = 0; i < images.size(); ++i) {
        std::vector<WordOccurrence> words;
        for (std::size_t p = 0; p < described[i].patches.size(); ++p)
            words.push_back({quantize(described[i].descriptors[p], result.codebook), described[i].patches[p].center_x,
                             described[i].patches[p].center_y});
        auto h = build_histogram(words, images[i].width(), images[i].height(), result.codebook.size(), cfg.grid,
                                 cfg.smoothing_sigma);
        h.label = labels[i];
        result.histograms.push_back(std::move(h));
    }
    return result;
}

}  // namespace dbnkit::features
