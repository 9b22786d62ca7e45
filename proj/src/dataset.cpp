#include "dbnkit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>

#include "dbnkit/error.hpp"
#include "dbnkit/io.hpp"
#include "dbnkit/random.hpp"

namespace dbnkit::harness {
namespace {

template <typename T>
T parse_number(std::string_view field, std::size_t line, const char* what) {
    T value{};
    const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size())
        throw ParseError(std::string("bad ") + what + " '" + std::string(field) + "'", line);
    return value;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

std::string format_histogram_csv(const std::vector<HistogramSample>& samples, const std::vector<std::string>& comments) {
    std::string out;
    for (const auto& c : comments) out += "# " + c + "\n";
    const std::size_t dims = samples.empty() ? 0 : samples.front().values.size();
    out += "label,grid,K";
    for (std::size_t i = 0; i < dims; ++i) out += ",v" + std::to_string(i);
    out += '\n';
    for (const auto& s : samples) {
        if (s.values.size() != dims) throw InvalidInput("format_histogram_csv: samples differ in length");
        out += std::to_string(s.label.value_or(-1)) + ',' + std::to_string(s.grid) + ',' + std::to_string(s.vocabulary);
        for (double v : s.values) {
            out += ',';
            out += io::format_double(v);
        }
        out += '\n';
    }
    return out;
}

std::vector<HistogramSample> parse_histogram_csv(const std::string& text) {
    std::vector<HistogramSample> samples;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::size_t header_dims = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split_commas(line);
        if (!header_seen) {
            if (fields.size() < 4 || fields[0] != "label" || fields[1] != "grid" || fields[2] != "K")
                throw ParseError("expected header 'label,grid,K,v0,...'", line_no);
            for (std::size_t i = 3; i < fields.size(); ++i)
                if (fields[i] != "v" + std::to_string(i - 3)) throw ParseError("bad header column", line_no);
            header_dims = fields.size() - 3;
            header_seen = true;
            continue;
        }
        if (fields.size() != header_dims + 3)
            throw ParseError("row has " + std::to_string(fields.size()) + " fields, header has " +
                                 std::to_string(header_dims + 3),
                             line_no);
        HistogramSample s;
        const int label = parse_number<int>(fields[0], line_no, "label");
        if (label < -1) throw ParseError("label must be >= -1", line_no);
        if (label >= 0) s.label = label;
        s.grid = parse_number<int>(fields[1], line_no, "grid");
        s.vocabulary = parse_number<std::size_t>(fields[2], line_no, "K");
        if (s.grid != 1 && s.grid != 2 && s.grid != 4) throw ParseError("grid must be 1, 2 or 4", line_no);
        const auto g = static_cast<std::size_t>(s.grid);
        if (s.vocabulary == 0 || g * g * s.vocabulary + 1 != header_dims)
            throw FormatError("grid/K inconsistent with " + std::to_string(header_dims) + " value columns", line_no);
        if (!samples.empty() && (samples.front().grid != s.grid || samples.front().vocabulary != s.vocabulary))
            throw FormatError("grid/K differ from earlier rows", line_no);
        s.values.reserve(header_dims);
        double sum = 0.0;
        for (std::size_t i = 3; i < fields.size(); ++i) {
            const double v = parse_number<double>(fields[i], line_no, "value");
            if (!std::isfinite(v) || v < 0.0) throw ParseError("values must be finite and non-negative", line_no);
            s.values.push_back(v);
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-6) throw FormatError("row sums to " + io::format_double(sum) + ", not 1", line_no);
        if (std::abs(sum - 1.0) > 1e-12)
            for (double& v : s.values) v /= sum;
        samples.push_back(std::move(s));
    }
    if (!header_seen) throw ParseError("missing header", line_no);
    return samples;
}

void save_histogram_dataset(const std::string& path, const std::vector<HistogramSample>& samples,
                            const std::vector<std::string>& comments) {
    io::write_text_atomic(path, format_histogram_csv(samples, comments));
}

std::vector<HistogramSample> load_histogram_dataset(const std::string& path) {
    return parse_histogram_csv(io::read_text(path));
}

std::vector<LabeledVector> to_labeled(const std::vector<HistogramSample>& samples) {
    std::vector<LabeledVector> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back({s.values, s.label.value_or(-1)});
    return out;
}

std::vector<Vector> to_unlabeled(const std::vector<HistogramSample>& samples) {
    std::vector<Vector> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.values);
    return out;
}

namespace {

std::map<int, std::vector<std::size_t>> shuffled_by_class(const std::vector<HistogramSample>& samples,
                                                          std::uint64_t seed) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].label) by_class[*samples[i].label].push_back(i);
    for (auto& [label, idx] : by_class) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(label)));
        std::shuffle(idx.begin(), idx.end(), rng.engine());
    }
    return by_class;
}

}  // namespace

Split split_per_class(const std::vector<HistogramSample>& samples, std::size_t train_per_class,
                      std::size_t test_per_class, std::uint64_t seed) {
    Split split;
    const auto by_class = shuffled_by_class(samples, seed);
    if (by_class.empty()) throw InvalidInput("split: no labeled samples");
    for (const auto& [label, idx] : by_class) {
        if (idx.size() < train_per_class + test_per_class)
            throw InvalidInput("split: class " + std::to_string(label) + " has " + std::to_string(idx.size()) +
                               " samples, need " + std::to_string(train_per_class + test_per_class));
        for (std::size_t i = 0; i < train_per_class; ++i) {
            split.train.push_back(samples[idx[i]]);
            split.train_index.push_back(idx[i]);
        }
        for (std::size_t i = 0; i < test_per_class; ++i) {
            split.test.push_back(samples[idx[train_per_class + i]]);
            split.test_index.push_back(idx[train_per_class + i]);
        }
    }
    return split;
}

bool Split::disjoint() const {
    std::vector<std::size_t> a = train_index, b = test_index;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::size_t> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    return common.empty() && std::adjacent_find(a.begin(), a.end()) == a.end() &&
           std::adjacent_find(b.begin(), b.end()) == b.end();
}

std::vector<HistogramSample> subset_per_class(const std::vector<HistogramSample>& samples, std::size_t per_class,
                                              std::uint64_t seed) {
    return split_per_class(samples, per_class, 0, seed).train;
}

void SyntheticSpec::validate() const {
    if (n_classes < 1) throw InvalidInput("synthetic spec: n_classes must be positive");
    if (vocabulary == 0) throw InvalidInput("synthetic spec: vocabulary must be positive");
    if (!(concentration > 0.0) || !std::isfinite(concentration))
        throw InvalidInput("synthetic spec: concentration must be positive");
    if (samples_per_class == 0) throw InvalidInput("synthetic spec: samples_per_class must be positive");
    if (words_per_image == 0) throw InvalidInput("synthetic spec: words_per_image must be positive");
    if (!(background_weight >= 0.0 && background_weight <= 1.0))
        throw InvalidInput("synthetic spec: background_weight must be in [0,1]");
}

namespace {

std::vector<double> dirichlet(std::size_t n, double alpha, Rng& rng) {
    std::vector<double> out(n);
    double total = 0.0;
    for (double& x : out) {
        x = rng.gamma(alpha);
        total += x;
    }
    if (total == 0.0) {
        out[rng.index(n)] = 1.0;
        return out;
    }
    for (double& x : out) x /= total;
    return out;
}

}  // namespace

std::vector<HistogramSample> synth_dataset(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t k = spec.vocabulary;
    Rng background_rng(spec.background_seed);
    const auto background = dirichlet(k, 1.0, background_rng);
    Rng class_rng(spec.class_seed);
    std::vector<std::discrete_distribution<std::size_t>> word_dists;
    for (int c = 0; c < spec.n_classes; ++c) {
        auto theta = dirichlet(k, spec.concentration, class_rng);
        for (std::size_t w = 0; w < k; ++w)
            theta[w] = (1.0 - spec.background_weight) * theta[w] + spec.background_weight * background[w];
        word_dists.emplace_back(theta.begin(), theta.end());
    }

    Rng rng(seed);
    std::vector<HistogramSample> out;
    out.reserve(static_cast<std::size_t>(spec.n_classes) * spec.samples_per_class);
    std::vector<std::size_t> counts(k);
    for (int c = 0; c < spec.n_classes; ++c) {
        for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
            std::fill(counts.begin(), counts.end(), 0);
            for (std::size_t w = 0; w < spec.words_per_image; ++w) ++counts[word_dists[c](rng.engine())];
            HistogramSample s;
            s.label = c;
            s.grid = 1;
            s.vocabulary = k;
            s.values.resize(k + 1, 0.0);
            for (std::size_t w = 0; w < k; ++w)
                s.values[w] = static_cast<double>(counts[w]) / static_cast<double>(spec.words_per_image);
            out.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace dbnkit::harness
