#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dbnkit/dbn.hpp"

namespace dbnkit::analysis {

// Activities of one layer for a set of labeled samples, one row per sample.
struct ActivityMatrix {
    Matrix activities;  // n_samples x n_neurons
    std::vector<int> labels;
    int layer_index = 0;  // 0 = raw input

    void validate() const;
};

enum class Orientation { above_is_category, below_is_category };
std::string to_string(Orientation o);

// How well thresholding one neuron's activity separates a category from the
// rest: the threshold- and orientation-maximized mean of the true-positive and
// true-negative rates.
struct PerformanceParameter {
    double score = 0.5;
    double threshold = 0.0;  // may be +-infinity (the sentinels)
    Orientation orientation = Orientation::above_is_category;
};

// Candidate thresholds are -inf, the midpoints of consecutive distinct
// activity values, and +inf. Ties prefer the lower threshold, then
// above_is_category. Throws InvalidInput if either class is empty.
PerformanceParameter performance_parameter(std::span<const double> activity, std::span<const char> in_category);

struct NeuronScore {
    int category = 0;
    std::size_t neuron = 0;
    PerformanceParameter result;
};

struct ExplicitnessReport {
    std::vector<int> categories;           // sorted distinct labels
    std::vector<NeuronScore> scores;       // category-major, neuron-minor
    std::vector<std::size_t> best_neuron;  // per category, parallel to `categories`
    int layer_index = 0;

    const NeuronScore& best(std::size_t category_slot) const;
    // "category,neuron,score,threshold,orientation" rows followed by a blank
    // line and a per-category best-neuron block.
    std::string to_csv() const;
};

ActivityMatrix layer_activities(const DbnClassifier& model, std::span<const LabeledVector> data, int layer_index);

// Evaluates every (neuron, category) pair; best neuron ties go to the lowest index.
ExplicitnessReport best_neurons(const ActivityMatrix& am);

struct FlipResult {
    ActivityMatrix matrix;
    double flipped_fraction = 0.0;
};

// Replaces every column with mean > 0.5 by 1 - activity.
FlipResult flip_polarity(const ActivityMatrix& am);

// best_neurons over the raw input dimensions.
ExplicitnessReport input_baseline(std::span<const LabeledVector> data);

// best_neurons at the top hidden layer of an untrained init_random model.
ExplicitnessReport random_control(const Architecture& arch, std::span<const LabeledVector> data, std::uint64_t seed,
                                  double init_scale = 0.01);

// Median over categories of the best neuron's score.
double median_best_score(const ExplicitnessReport& report);

// Per-sample activities as CSV: "label,n0,n1,...".
std::string activities_csv(const ActivityMatrix& am);

}  // namespace dbnkit::analysis
