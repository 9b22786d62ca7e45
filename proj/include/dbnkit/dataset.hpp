#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dbnkit/dbn.hpp"
#include "dbnkit/features.hpp"

namespace dbnkit::harness {

using features::HistogramSample;

// CSV contract between the feature pipeline and the models:
//   header "label,grid,K,v0,v1,...", one sample per row, label -1 = unlabeled.
// Lines starting with '#' are comments. Values use 17 significant digits.
std::string format_histogram_csv(const std::vector<HistogramSample>& samples,
                                 const std::vector<std::string>& comments = {});
// Rows whose sum is within 1e-6 of 1 are accepted (rescaled when the gap
// exceeds summation noise). Syntax problems are ParseErrors; a bad row sum or
// grid/K that disagree with the columns are FormatErrors. Both carry the line.
std::vector<HistogramSample> parse_histogram_csv(const std::string& text);

void save_histogram_dataset(const std::string& path, const std::vector<HistogramSample>& samples,
                            const std::vector<std::string>& comments = {});
std::vector<HistogramSample> load_histogram_dataset(const std::string& path);

std::vector<LabeledVector> to_labeled(const std::vector<HistogramSample>& samples);
std::vector<Vector> to_unlabeled(const std::vector<HistogramSample>& samples);

struct Split {
    std::vector<HistogramSample> train;
    std::vector<HistogramSample> test;
    // Positions in the source sample list.
    std::vector<std::size_t> train_index;
    std::vector<std::size_t> test_index;

    // True when train and test share no source sample.
    bool disjoint() const;
};

// Per class, a seeded shuffle takes `train_per_class` training and the next
// `test_per_class` test samples. Throws InvalidInput when a class is short.
// Unlabeled samples are ignored.
Split split_per_class(const std::vector<HistogramSample>& samples, std::size_t train_per_class,
                      std::size_t test_per_class, std::uint64_t seed);

// Seeded subset of `per_class` samples from every class present.
std::vector<HistogramSample> subset_per_class(const std::vector<HistogramSample>& samples, std::size_t per_class,
                                              std::uint64_t seed);

struct SyntheticSpec {
    int n_classes = 5;
    std::size_t vocabulary = 200;  // K
    // Symmetric Dirichlet concentration of every class word distribution;
    // small values give peaky, distinctive classes.
    double concentration = 0.05;
    std::size_t samples_per_class = 200;
    std::size_t words_per_image = 10;
    // Weight of the shared background distribution in each class mixture.
    double background_weight = 0.3;
    std::uint64_t class_seed = 1;
    std::uint64_t background_seed = 2;

    void validate() const;
};

// Class c draws a word distribution from its Dirichlet (class_seed), mixes it
// with the shared background (background_seed); every sample is a multinomial
// draw of words_per_image words, normalized. Grid 1, low-variance bin 0.
std::vector<HistogramSample> synth_dataset(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace dbnkit::harness
