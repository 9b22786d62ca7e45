#include "dbnkit/analysis.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>

#include "dbnkit/error.hpp"
#include "dbnkit/io.hpp"

namespace dbnkit::analysis {

void ActivityMatrix::validate() const {
    if (activities.rows() != labels.size())
        throw InvalidInput("activity matrix: row count does not match label count");
    for (double a : activities.data())
        if (!(a >= 0.0 && a <= 1.0)) throw InvalidInput("activity matrix: entry outside [0,1]");
}

std::string to_string(Orientation o) {
    return o == Orientation::above_is_category ? "above_is_category" : "below_is_category";
}

PerformanceParameter performance_parameter(std::span<const double> activity, std::span<const char> in_category) {
    if (activity.size() != in_category.size())
        throw InvalidInput("performance_parameter: activity and membership lengths differ");
    const std::size_t n = activity.size();
    const auto n_in = static_cast<std::size_t>(std::count_if(in_category.begin(), in_category.end(),
                                                             [](char c) { return c != 0; }));
    const std::size_t n_out = n - n_in;
    if (n_in == 0 || n_out == 0) throw InvalidInput("performance_parameter: both classes must be non-empty");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return activity[a] < activity[b]; });

    // Sweep thresholds upward. Predicting "in" above the threshold:
    //   TPR = in_above / n_in, TNR = out_below / n_out, score = (TPR + TNR) / 2.
    PerformanceParameter best{0.5, -std::numeric_limits<double>::infinity(), Orientation::above_is_category};
    std::size_t in_below = 0, out_below = 0;
    // Scores from integer numerators so mirrored inputs give identical doubles.
    const double denom = 2.0 * static_cast<double>(n_in) * static_cast<double>(n_out);
    auto consider = [&](double threshold) {
        const std::size_t tp = n_in - in_below, tn = out_below;
        const double above = static_cast<double>(tp * n_out + tn * n_in) / denom;
        const double below = static_cast<double>((n_in - tp) * n_out + (n_out - tn) * n_in) / denom;
        if (above > best.score) best = {above, threshold, Orientation::above_is_category};
        if (below > best.score) best = {below, threshold, Orientation::below_is_category};
    };
    consider(-std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n;) {
        const double value = activity[order[i]];
        while (i < n && activity[order[i]] == value) {
            (in_category[order[i]] ? in_below : out_below) += 1;
            ++i;
        }
        consider(i < n ? 0.5 * (value + activity[order[i]]) : std::numeric_limits<double>::infinity());
    }
    return best;
}

const NeuronScore& ExplicitnessReport::best(std::size_t category_slot) const {
    const std::size_t n_neurons = scores.size() / categories.size();
    return scores[category_slot * n_neurons + best_neuron[category_slot]];
}

std::string ExplicitnessReport::to_csv() const {
    std::ostringstream out;
    out << "category,neuron,score,threshold,orientation\n";
    for (const auto& s : scores)
        out << s.category << ',' << s.neuron << ',' << io::format_double(s.result.score) << ','
            << io::format_double(s.result.threshold) << ',' << to_string(s.result.orientation) << '\n';
    out << "\ncategory,best_neuron,score,threshold,orientation\n";
    for (std::size_t c = 0; c < categories.size(); ++c) {
        const auto& s = best(c);
        out << s.category << ',' << s.neuron << ',' << io::format_double(s.result.score) << ','
            << io::format_double(s.result.threshold) << ',' << to_string(s.result.orientation) << '\n';
    }
    return out.str();
}

ActivityMatrix layer_activities(const DbnClassifier& model, std::span<const LabeledVector> data, int layer_index) {
    if (layer_index < 0 || static_cast<std::size_t>(layer_index) > model.rbm_layers().size())
        throw InvalidInput("layer_activities: layer index " + std::to_string(layer_index) + " outside [0, " +
                           std::to_string(model.rbm_layers().size()) + "]");
    const std::size_t width = layer_index == 0 ? model.input_size()
                                               : model.rbm_layers()[static_cast<std::size_t>(layer_index) - 1].n_hidden();
    ActivityMatrix am;
    am.layer_index = layer_index;
    am.activities = Matrix(data.size(), width);
    for (std::size_t i = 0; i < data.size(); ++i) {
        am.labels.push_back(data[i].label);
        if (layer_index == 0) {
            if (data[i].values.size() != width) throw InvalidInput("layer_activities: input length mismatch");
            std::copy(data[i].values.begin(), data[i].values.end(), am.activities.row(i).begin());
        } else {
            const auto acts = hidden_activations(model, data[i].values);
            const auto& a = acts[static_cast<std::size_t>(layer_index)];
            std::copy(a.begin(), a.end(), am.activities.row(i).begin());
        }
    }
    return am;
}

ExplicitnessReport best_neurons(const ActivityMatrix& am) {
    am.validate();
    ExplicitnessReport report;
    report.layer_index = am.layer_index;
    report.categories = am.labels;
    std::sort(report.categories.begin(), report.categories.end());
    report.categories.erase(std::unique(report.categories.begin(), report.categories.end()), report.categories.end());
    if (report.categories.size() < 2) throw InvalidInput("best_neurons: need at least two distinct categories");

    const std::size_t n = am.activities.rows();
    const std::size_t n_neurons = am.activities.cols();
    if (n_neurons == 0) throw InvalidInput("best_neurons: no neurons");
    std::vector<double> column(n);
    std::vector<char> member(n);
    report.scores.reserve(report.categories.size() * n_neurons);
    for (int category : report.categories) {
        for (std::size_t i = 0; i < n; ++i) member[i] = am.labels[i] == category;
        std::size_t best = 0;
        for (std::size_t j = 0; j < n_neurons; ++j) {
            for (std::size_t i = 0; i < n; ++i) column[i] = am.activities(i, j);
            const auto result = performance_parameter(column, member);
            report.scores.push_back({category, j, result});
            if (result.score > report.scores[report.scores.size() - 1 - j + best].result.score) best = j;
        }
        report.best_neuron.push_back(best);
    }
    return report;
}

FlipResult flip_polarity(const ActivityMatrix& am) {
    FlipResult out{am, 0.0};
    const std::size_t n = am.activities.rows();
    const std::size_t n_neurons = am.activities.cols();
    if (n == 0 || n_neurons == 0) return out;
    std::size_t flipped = 0;
    for (std::size_t j = 0; j < n_neurons; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += am.activities(i, j);
        mean /= static_cast<double>(n);
        if (mean <= 0.5) continue;
        ++flipped;
        for (std::size_t i = 0; i < n; ++i) out.matrix.activities(i, j) = 1.0 - am.activities(i, j);
    }
    out.flipped_fraction = static_cast<double>(flipped) / static_cast<double>(n_neurons);
    return out;
}

ExplicitnessReport input_baseline(std::span<const LabeledVector> data) {
    if (data.empty()) throw InvalidInput("input_baseline: empty data");
    ActivityMatrix am;
    am.layer_index = 0;
    am.activities = Matrix(data.size(), data.front().values.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].values.size() != am.activities.cols()) throw InvalidInput("input_baseline: ragged data");
        std::copy(data[i].values.begin(), data[i].values.end(), am.activities.row(i).begin());
        am.labels.push_back(data[i].label);
    }
    return best_neurons(am);
}

ExplicitnessReport random_control(const Architecture& arch, std::span<const LabeledVector> data, std::uint64_t seed,
                                  double init_scale) {
    const auto model = init_random(arch, init_scale, seed);
    return best_neurons(layer_activities(model, data, static_cast<int>(arch.n_hidden_layers())));
}

double median_best_score(const ExplicitnessReport& report) {
    std::vector<double> best;
    for (std::size_t c = 0; c < report.categories.size(); ++c) best.push_back(report.best(c).result.score);
    if (best.empty()) throw InvalidInput("median_best_score: empty report");
    std::sort(best.begin(), best.end());
    const std::size_t m = best.size() / 2;
    return best.size() % 2 ? best[m] : 0.5 * (best[m - 1] + best[m]);
}

std::string activities_csv(const ActivityMatrix& am) {
    std::ostringstream out;
    out << "label";
    for (std::size_t j = 0; j < am.activities.cols(); ++j) out << ",n" << j;
    out << '\n';
    for (std::size_t i = 0; i < am.activities.rows(); ++i) {
        out << am.labels[i];
        for (double a : am.activities.row(i)) out << ',' << io::format_double(a);
        out << '\n';
    }
    return out.str();
}

}  // namespace dbnkit::analysis
