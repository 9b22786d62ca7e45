#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dbnkit/matrix.hpp"

namespace dbnkit::features {

// Row-major grayscale image with pixel values in [0,1].
class GrayImage {
public:
    GrayImage() = default;
    // Throws InvalidInput on size mismatch or out-of-range pixels.
    GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    double at(std::size_t x, std::size_t y) const { return pixels_[y * width_ + x]; }
    const std::vector<double>& pixels() const noexcept { return pixels_; }

    // 2x box downsampling; odd trailing rows/columns are dropped.
    GrayImage downsample() const;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> pixels_;
};

// Binary PGM (P5) with maxval 255; pixels scaled by 1/255.
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
GrayImage load_pgm(const std::string& path);
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);

struct PatchConfig {
    int patch_size = 16;  // N
    int grid_spacing = 8;  // l
    double variance_threshold = 1e-4;

    void validate() const;
};

struct Patch {
    std::vector<double> pixels;  // side x side, row-major
    std::size_t side = 0;
    double center_x = 0.0;  // original-image coordinates
    double center_y = 0.0;
    int level = 0;
};

// Patches of side N on a grid of spacing l at every pyramid level. Level 0 is
// the image itself; each following level is box-downsampled by two, until the
// next level could not hold a single patch.
std::vector<Patch> extract_patch_pyramid(const GrayImage& img, const PatchConfig& cfg);

// Patches per level: floor((w-N)/l + 1) * floor((h-N)/l + 1).
std::size_t patch_count_per_level(std::size_t w, std::size_t h, const PatchConfig& cfg);

inline constexpr std::size_t kDescriptorCells = 4;
inline constexpr std::size_t kOrientationBins = 8;
inline constexpr std::size_t kDescriptorSize = kDescriptorCells * kDescriptorCells * kOrientationBins;
inline constexpr double kDescriptorClamp = 0.2;

struct Descriptor {
    std::vector<double> values;  // kDescriptorSize entries
    bool low_variance = false;
};

// 4x4 cells x 8 orientation bins of magnitude-weighted gradient orientations,
// L2-normalized, clamped at 0.2 and renormalized. Patches whose pixel variance
// is below the threshold come back flagged with a zero vector.
Descriptor describe_patch(std::span<const double> pixels, std::size_t side, double variance_threshold);

class Codebook {
public:
    Codebook() = default;
    explicit Codebook(std::vector<Vector> centroids);

    std::size_t size() const noexcept { return centroids_.size(); }  // K
    std::size_t dim() const { return centroids_.empty() ? 0 : centroids_.front().size(); }
    const std::vector<Vector>& centroids() const noexcept { return centroids_; }

    bool operator==(const Codebook&) const = default;

private:
    std::vector<Vector> centroids_;
};

struct KMeansResult {
    Codebook codebook;
    std::vector<std::size_t> assignments;  // per non-low-variance input, in input order
    std::vector<double> objective;         // sum of squared distances after each assignment step
    int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding over the non-low-variance
// descriptors. Empty clusters are reseeded with the point farthest from its
// centroid.
KMeansResult kmeans(std::span<const Descriptor> descriptors, std::size_t k, std::uint64_t seed, int max_iters);
Codebook kmeans_codebook(std::span<const Descriptor> descriptors, std::size_t k, std::uint64_t seed,
                         int max_iters);

// Index of the nearest centroid (ties to the lowest index), or K for a
// low-variance descriptor.
std::size_t quantize(const Descriptor& d, const Codebook& cb);

// "CBK1" | u32 K | u32 dim | f64 centroids (K x dim), little-endian.
std::vector<std::uint8_t> serialize_codebook(const Codebook& cb);
Codebook deserialize_codebook(std::span<const std::uint8_t> bytes);

struct WordOccurrence {
    std::size_t word = 0;  // in [0, K]; K is the low-variance word
    double x = 0.0;
    double y = 0.0;
};

struct HistogramSample {
    std::vector<double> values;  // grid^2 * K + 1 entries summing to 1
    std::optional<int> label;
    int grid = 1;
    std::size_t vocabulary = 0;  // K
};

// Normalized spatial bag of words. Each regular word spreads unit mass over
// the grid x grid cells with Gaussian weights on its distance to each cell
// centre (measured in cell widths, std = smoothing_sigma); sigma 0 means hard
// assignment. Low-variance words share the last bin. Entries sum to 1.
HistogramSample build_histogram(std::span<const WordOccurrence> words, std::size_t width, std::size_t height,
                                std::size_t k, int grid, double smoothing_sigma);

struct PipelineConfig {
    PatchConfig patch;
    std::size_t vocabulary = 200;
    int grid = 1;
    double smoothing_sigma = 0.25;
    int kmeans_iters = 50;
    std::uint64_t seed = 0;
};

// Every patch of an image, described.
struct ImageWords {
    std::vector<Descriptor> descriptors;
    std::vector<Patch> patches;
};

ImageWords describe_image(const GrayImage& img, const PatchConfig& cfg);

// Images to histograms: describe every patch, learn a codebook over all
// descriptors (unless one is supplied) and quantize.
struct PipelineResult {
    Codebook codebook;
    std::vector<HistogramSample> histograms;
};
PipelineResult run_pipeline(std::span<const GrayImage> images, std::span<const std::optional<int>> labels,
                            const PipelineConfig& cfg, const Codebook* codebook = nullptr);

}  // namespace dbnkit::features
