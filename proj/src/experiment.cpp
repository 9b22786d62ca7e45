#include "dbnkit/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <functional>
#include <sstream>

#include "dbnkit/error.hpp"
#include "dbnkit/io.hpp"

namespace dbnkit::harness {
namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <typename T>
T to_number(const std::string& key, const std::string& value) {
    T out{};
    const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size())
        throw InvalidInput("config: bad value '" + value + "' for " + key);
    return out;
}

template <typename T>
std::string join(const std::vector<T>& items, const std::function<std::string(const T&)>& fmt) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ',';
        out += fmt(items[i]);
    }
    return out;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<std::string> base_metadata(const ExperimentConfig& cfg) {
    return {std::string("dbnkit ") + kToolVersion, "config_digest=" + cfg.digest(), "seed=" + std::to_string(cfg.seed)};
}

void ensure_out_dir(const ExperimentConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out, ec);
    if (ec) throw IoError("cannot create output directory '" + cfg.out + "': " + ec.message());
}

std::string with_comments(const std::vector<std::string>& meta, const std::string& body) {
    std::string out;
    for (const auto& m : meta) out += "# " + m + "\n";
    return out + body;
}

std::vector<HistogramSample> load_or_synthesize(const ExperimentConfig& cfg) {
    if (!cfg.dataset.empty()) return load_histogram_dataset(cfg.dataset);
    return synth_dataset(cfg.synth, cfg.data_seed());
}

std::string split_note(const Split& split) {
    return "split train=" + std::to_string(split.train.size()) + " test=" + std::to_string(split.test.size()) +
           " disjoint=" + (split.disjoint() ? "yes" : "no");
}

}  // namespace

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::learning_curve: return "learning_curve";
        case ExperimentKind::pretrain_sweep: return "pretrain_sweep";
        case ExperimentKind::labeled_size_sweep: return "labeled_size_sweep";
        case ExperimentKind::transfer: return "transfer";
    }
    return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
    if (text == "learning_curve" || text == "curve") return ExperimentKind::learning_curve;
    if (text == "pretrain_sweep" || text == "pretrain") return ExperimentKind::pretrain_sweep;
    if (text == "labeled_size_sweep" || text == "labeled") return ExperimentKind::labeled_size_sweep;
    if (text == "transfer") return ExperimentKind::transfer;
    throw InvalidInput("unknown experiment kind '" + text + "'");
}

std::string to_string(InitMode mode) { return mode == InitMode::pretrained ? "pretrained" : "random"; }

void ExperimentConfig::validate() const {
    if (architectures.empty()) throw InvalidInput("config: no architecture");
    if (init_modes.empty()) throw InvalidInput("config: no init mode");
    if (finetune_modes.empty()) throw InvalidInput("config: no fine-tune mode");
    if (!(init_scale > 0.0)) throw InvalidInput("config: init_scale must be positive");
    if (pretrain_epochs < 0) throw InvalidInput("config: pretrain_epochs must be >= 0");
    cd.validate();
    finetune.validate();
    if (dataset.empty()) synth.validate();
    else if (!std::filesystem::exists(dataset)) throw InvalidInput("config: dataset '" + dataset + "' does not exist");
    if (!pretrain_dataset.empty() && !std::filesystem::exists(pretrain_dataset))
        throw InvalidInput("config: pretrain_dataset '" + pretrain_dataset + "' does not exist");
    if (train_per_class == 0 || test_per_class == 0) throw InvalidInput("config: per-class counts must be positive");
    if (dataset.empty() && train_per_class + test_per_class > synth.samples_per_class)
        throw InvalidInput("config: train_per_class + test_per_class exceeds synth.samples_per_class");
    if (epoch_grid.empty()) throw InvalidInput("config: epoch_grid is empty");
    for (std::size_t i = 0; i < epoch_grid.size(); ++i) {
        if (epoch_grid[i] < 0) throw InvalidInput("config: epoch_grid entries must be >= 0");
        if (i && epoch_grid[i] < epoch_grid[i - 1]) throw InvalidInput("config: epoch_grid must be sorted");
    }
    if (sizes.empty()) throw InvalidInput("config: sizes is empty");
    for (std::size_t s : sizes)
        if (s == 0 || s > pretrain_per_class) throw InvalidInput("config: sizes must be in [1, pretrain_per_class]");
    if (dataset.empty() && pretrain_per_class + test_per_class > synth.samples_per_class)
        throw InvalidInput("config: pretrain_per_class + test_per_class exceeds synth.samples_per_class");
    const std::size_t input = architectures.front().input_size();
    for (const auto& a : architectures)
        if (a.input_size() != input || a.n_classes() != architectures.front().n_classes())
            throw InvalidInput("config: architectures disagree on input or output size");
    if (dataset.empty()) {
        if (input != synth.vocabulary + 1)
            throw InvalidInput("config: architecture input " + std::to_string(input) + " != synth vocabulary + 1");
        if (architectures.front().n_classes() != static_cast<std::size_t>(synth.n_classes))
            throw InvalidInput("config: architecture output != synth.classes");
    }
}

std::string ExperimentConfig::canonical_text() const {
    std::map<std::string, std::string> kv;
    kv["kind"] = to_string(kind);
    kv["architecture"] = join<Architecture>(architectures, [](const Architecture& a) { return a.to_string(); });
    kv["init_modes"] = join<InitMode>(init_modes, [](const InitMode& m) { return to_string(m); });
    kv["finetune_modes"] = join<FinetuneMode>(finetune_modes, [](const FinetuneMode& m) { return to_string(m); });
    kv["init_scale"] = io::format_double(init_scale);
    kv["pretrain_epochs"] = std::to_string(pretrain_epochs);
    kv["cd.k"] = std::to_string(cd.k);
    kv["cd.learning_rate"] = io::format_double(cd.learning_rate);
    kv["cd.momentum"] = io::format_double(cd.momentum);
    kv["cd.final_momentum"] = io::format_double(cd.final_momentum);
    kv["cd.momentum_switch_epoch"] = std::to_string(cd.momentum_switch_epoch);
    kv["cd.weight_decay"] = io::format_double(cd.weight_decay);
    kv["cd.batch_size"] = std::to_string(cd.batch_size);
    kv["cd.visible_mode"] = cd.visible_mode == VisibleMode::mean_field ? "mean_field" : "sampled";
    kv["ft.learning_rate"] = io::format_double(finetune.learning_rate);
    kv["ft.epochs"] = std::to_string(finetune.epochs);
    kv["ft.batch_size"] = std::to_string(finetune.batch_size);
    kv["ft.weight_decay"] = io::format_double(finetune.weight_decay);
    kv["dataset"] = dataset;
    kv["synth.classes"] = std::to_string(synth.n_classes);
    kv["synth.vocabulary"] = std::to_string(synth.vocabulary);
    kv["synth.concentration"] = io::format_double(synth.concentration);
    kv["synth.samples_per_class"] = std::to_string(synth.samples_per_class);
    kv["synth.words_per_image"] = std::to_string(synth.words_per_image);
    kv["synth.background_weight"] = io::format_double(synth.background_weight);
    kv["synth.class_seed"] = std::to_string(synth.class_seed);
    kv["synth.background_seed"] = std::to_string(synth.background_seed);
    kv["synth.seed"] = synth_seed ? std::to_string(*synth_seed) : "";
    kv["train_per_class"] = std::to_string(train_per_class);
    kv["test_per_class"] = std::to_string(test_per_class);
    kv["split_seed"] = std::to_string(split_seed);
    kv["epoch_grid"] = join<int>(epoch_grid, [](const int& e) { return std::to_string(e); });
    kv["sizes"] = join<std::size_t>(sizes, [](const std::size_t& s) { return std::to_string(s); });
    kv["pretrain_per_class"] = std::to_string(pretrain_per_class);
    kv["pretrain_dataset"] = pretrain_dataset;
    kv["transfer.class_seed"] = std::to_string(transfer_class_seed);
    kv["seed"] = std::to_string(seed);
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

std::string ExperimentConfig::digest() const { return fnv1a_hex(canonical_text()); }

std::uint64_t ExperimentConfig::init_seed() const { return derive_seed(seed, 1); }
std::uint64_t ExperimentConfig::cd_seed() const { return derive_seed(seed, 2); }
std::uint64_t ExperimentConfig::finetune_seed() const { return derive_seed(seed, 3); }
std::uint64_t ExperimentConfig::data_seed() const { return synth_seed ? *synth_seed : derive_seed(seed, 4); }

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    using std::size_t;
    auto u64 = [&] { return to_number<std::uint64_t>(key, value); };
    auto sz = [&] { return to_number<size_t>(key, value); };
    auto i32 = [&] { return to_number<int>(key, value); };
    auto f64 = [&] { return to_number<double>(key, value); };

    if (key == "kind") cfg.kind = parse_experiment_kind(value);
    else if (key == "architecture") {
        cfg.architectures.clear();
        for (const auto& a : split_list(value)) cfg.architectures.push_back(Architecture::parse(a));
    } else if (key == "init_modes") {
        cfg.init_modes.clear();
        for (const auto& m : split_list(value)) {
            if (m == "pretrained") cfg.init_modes.push_back(InitMode::pretrained);
            else if (m == "random") cfg.init_modes.push_back(InitMode::random);
            else throw InvalidInput("config: unknown init mode '" + m + "'");
        }
    } else if (key == "finetune_modes") {
        cfg.finetune_modes.clear();
        for (const auto& m : split_list(value)) cfg.finetune_modes.push_back(parse_finetune_mode(m));
    } else if (key == "init_scale") cfg.init_scale = f64();
    else if (key == "pretrain_epochs") cfg.pretrain_epochs = i32();
    else if (key == "cd.k") cfg.cd.k = i32();
    else if (key == "cd.learning_rate") cfg.cd.learning_rate = f64();
    else if (key == "cd.momentum") cfg.cd.momentum = f64();
    else if (key == "cd.final_momentum") cfg.cd.final_momentum = f64();
    else if (key == "cd.momentum_switch_epoch") cfg.cd.momentum_switch_epoch = i32();
    else if (key == "cd.weight_decay") cfg.cd.weight_decay = f64();
    else if (key == "cd.batch_size") cfg.cd.batch_size = i32();
    else if (key == "cd.visible_mode") {
        if (value == "mean_field") cfg.cd.visible_mode = VisibleMode::mean_field;
        else if (value == "sampled") cfg.cd.visible_mode = VisibleMode::sampled;
        else throw InvalidInput("config: unknown cd.visible_mode '" + value + "'");
    } else if (key == "ft.learning_rate") cfg.finetune.learning_rate = f64();
    else if (key == "ft.epochs") cfg.finetune.epochs = i32();
    else if (key == "ft.batch_size") cfg.finetune.batch_size = i32();
    else if (key == "ft.weight_decay") cfg.finetune.weight_decay = f64();
    else if (key == "dataset") cfg.dataset = value;
    else if (key == "synth.classes") cfg.synth.n_classes = i32();
    else if (key == "synth.vocabulary") cfg.synth.vocabulary = sz();
    else if (key == "synth.concentration") cfg.synth.concentration = f64();
    else if (key == "synth.samples_per_class") cfg.synth.samples_per_class = sz();
    else if (key == "synth.words_per_image") cfg.synth.words_per_image = sz();
    else if (key == "synth.background_weight") cfg.synth.background_weight = f64();
    else if (key == "synth.class_seed") cfg.synth.class_seed = u64();
    else if (key == "synth.background_seed") cfg.synth.background_seed = u64();
    else if (key == "synth.seed") {
        if (value.empty()) cfg.synth_seed.reset();
        else cfg.synth_seed = u64();
    }
    else if (key == "train_per_class") cfg.train_per_class = sz();
    else if (key == "test_per_class") cfg.test_per_class = sz();
    else if (key == "split_seed") cfg.split_seed = u64();
    else if (key == "epoch_grid") {
        cfg.epoch_grid.clear();
        for (const auto& e : split_list(value)) cfg.epoch_grid.push_back(to_number<int>(key, e));
    } else if (key == "sizes") {
        cfg.sizes.clear();
        for (const auto& s : split_list(value)) cfg.sizes.push_back(to_number<size_t>(key, s));
    } else if (key == "pretrain_per_class") cfg.pretrain_per_class = sz();
    else if (key == "pretrain_dataset") cfg.pretrain_dataset = value;
    else if (key == "transfer.class_seed") cfg.transfer_class_seed = u64();
    else if (key == "seed") cfg.seed = u64();
    else if (key == "out") cfg.out = value;
    else throw InvalidInput("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            set_config_value(base, key, value);
        } catch (const InvalidInput& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    return base;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
    return parse_config(io::read_text(path), std::move(base));
}

std::string LearningCurve::to_csv() const {
    std::string body = "epoch,train_error,test_error,train_loss,test_mean_class_accuracy\n";
    for (const auto& r : rows)
        body += std::to_string(r.epoch) + ',' + io::format_double(r.train_error) + ',' + io::format_double(r.test_error) +
                ',' + io::format_double(r.train_loss) + ',' + io::format_double(r.test_mean_class_accuracy) + '\n';
    return with_comments(metadata, body);
}

double mean_class_accuracy(const DbnClassifier& model, std::span<const LabeledVector> data) {
    if (data.empty()) throw InvalidInput("mean_class_accuracy: empty data");
    std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // correct, total
    for (const auto& s : data) {
        auto& [correct, total] = per_class[s.label];
        ++total;
        if (predict(model, s.values) == s.label) ++correct;
    }
    double acc = 0.0;
    for (const auto& [label, ct] : per_class) acc += static_cast<double>(ct.first) / static_cast<double>(ct.second);
    return acc / static_cast<double>(per_class.size());
}

Split prepare_split(const ExperimentConfig& cfg) {
    const auto samples = load_or_synthesize(cfg);
    Split split = split_per_class(samples, cfg.train_per_class, cfg.test_per_class, cfg.split_seed);
    if (!split.disjoint()) throw Error("train/test split is not disjoint");
    return split;
}

DbnClassifier build_model(const ExperimentConfig& cfg, const Architecture& arch, InitMode init,
                          std::span<const Vector> pretrain_data, int pretrain_epochs) {
    DbnClassifier model = init_random(arch, cfg.init_scale, cfg.init_seed());
    if (init == InitMode::pretrained && arch.n_hidden_layers() > 0 && pretrain_epochs > 0) {
        CdConfig cd = cfg.cd;
        cd.seed = cfg.cd_seed();
        model = pretrain_greedy(std::move(model), pretrain_data, pretrain_epochs, cd);
    }
    return model;
}

LearningCurve finetune_curve(const ExperimentConfig& cfg, DbnClassifier model, FinetuneMode mode,
                             std::span<const LabeledVector> train, std::span<const LabeledVector> test,
                             std::string variant) {
    FinetuneConfig ft = cfg.finetune;
    ft.mode = mode;
    ft.seed = cfg.finetune_seed();
    LearningCurve curve;
    curve.variant = std::move(variant);
    curve.metadata = base_metadata(cfg);
    curve.metadata.push_back("variant=" + curve.variant);
    finetune(std::move(model), train, ft, [&](const EpochStats& stats, const DbnClassifier& m) {
        curve.rows.push_back({stats.epoch, stats.train_error, error_rate(m, test), stats.train_loss,
                              mean_class_accuracy(m, test)});
    });
    return curve;
}

std::vector<LearningCurve> run_learning_curve(const ExperimentConfig& cfg) {
    cfg.validate();
    const Split split = prepare_split(cfg);
    const auto train = to_labeled(split.train);
    const auto test = to_labeled(split.test);
    const auto unlabeled = to_unlabeled(split.train);
    ensure_out_dir(cfg);

    std::vector<LearningCurve> curves;
    for (const auto& arch : cfg.architectures) {
        for (InitMode init : cfg.init_modes) {
            // Without hidden layers there is nothing to pre-train.
            if (arch.n_hidden_layers() == 0 && init == InitMode::pretrained &&
                std::count(cfg.init_modes.begin(), cfg.init_modes.end(), InitMode::random))
                continue;
            const DbnClassifier base = build_model(cfg, arch, init, unlabeled, cfg.pretrain_epochs);
            for (FinetuneMode mode : cfg.finetune_modes) {
                if (arch.n_hidden_layers() == 0 && mode == FinetuneMode::top_layer_only &&
                    std::count(cfg.finetune_modes.begin(), cfg.finetune_modes.end(), FinetuneMode::full_network))
                    continue;
                const std::string variant = arch.to_string() + "_" + to_string(init) + "_" + to_string(mode);
                auto curve = finetune_curve(cfg, base, mode, train, test, variant);
                curve.metadata.push_back(split_note(split));
                curve.metadata.push_back("pretrain_epochs=" +
                                         std::to_string(init == InitMode::pretrained ? cfg.pretrain_epochs : 0));
                curve.metadata.push_back(
                    "reference (not asserted): a pre-trained 1001-500-13 network on 13 Scenes reached about 25% "
                    "test error after one fine-tune epoch");
                io::write_text_atomic(cfg.out + "/curve_" + variant + ".csv", curve.to_csv());
                curves.push_back(std::move(curve));
            }
        }
    }
    return curves;
}

std::vector<PretrainSweepRow> sweep_pretrain_epochs(const ExperimentConfig& cfg, const std::vector<int>& epoch_grid) {
    cfg.validate();
    if (epoch_grid.empty()) throw InvalidInput("sweep_pretrain_epochs: empty grid");
    for (std::size_t i = 0; i < epoch_grid.size(); ++i)
        if (epoch_grid[i] < 0 || (i && epoch_grid[i] < epoch_grid[i - 1]))
            throw InvalidInput("sweep_pretrain_epochs: grid must be non-negative and sorted");
    const Split split = prepare_split(cfg);
    const auto train = to_labeled(split.train);
    const auto test = to_labeled(split.test);
    const auto unlabeled = to_unlabeled(split.train);
    ensure_out_dir(cfg);

    const Architecture& arch = cfg.architectures.front();
    const FinetuneMode mode = cfg.finetune_modes.front();
    std::vector<PretrainSweepRow> rows;
    std::string body = "pretrain_epochs,test_error_epoch1,final_test_error\n";
    for (int epochs : epoch_grid) {
        auto model = build_model(cfg, arch, InitMode::pretrained, unlabeled, epochs);
        const auto curve = finetune_curve(cfg, std::move(model), mode, train, test, "sweep");
        PretrainSweepRow row{epochs, curve.rows.empty() ? 0.0 : curve.rows.front().test_error,
                             curve.rows.empty() ? 0.0 : curve.rows.back().test_error};
        body += std::to_string(row.pretrain_epochs) + ',' + io::format_double(row.test_error_epoch1) + ',' +
                io::format_double(row.final_test_error) + '\n';
        rows.push_back(row);
    }
    auto meta = base_metadata(cfg);
    meta.push_back("architecture=" + arch.to_string() + " finetune_mode=" + to_string(mode));
    meta.push_back(split_note(split));
    io::write_text_atomic(cfg.out + "/pretrain_sweep.csv", with_comments(meta, body));
    return rows;
}

std::vector<LabeledSizeRow> sweep_labeled_size(const ExperimentConfig& cfg, const std::vector<std::size_t>& sizes,
                                               std::size_t pretrain_per_category) {
    cfg.validate();
    if (sizes.empty()) throw InvalidInput("sweep_labeled_size: no sizes");
    for (std::size_t s : sizes)
        if (s == 0 || s > pretrain_per_category)
            throw InvalidInput("sweep_labeled_size: sizes must be in [1, pretrain_per_category]");
    const auto samples = load_or_synthesize(cfg);
    const Split pool = split_per_class(samples, pretrain_per_category, cfg.test_per_class, cfg.split_seed);
    if (!pool.disjoint()) throw Error("pre-training pool overlaps the test set");
    const auto test = to_labeled(pool.test);
    ensure_out_dir(cfg);

    const Architecture& arch = cfg.architectures.front();
    const FinetuneMode mode = cfg.finetune_modes.front();
    const DbnClassifier pretrained =
        build_model(cfg, arch, InitMode::pretrained, to_unlabeled(pool.train), cfg.pretrain_epochs);
    const DbnClassifier random = build_model(cfg, arch, InitMode::random, {}, 0);

    std::vector<LabeledSizeRow> rows;
    std::string body = "per_class,pretrained_test_error,random_test_error\n";
    for (std::size_t size : sizes) {
        const auto subset = to_labeled(subset_per_class(pool.train, size, derive_seed(cfg.split_seed, 1000 + size)));
        const auto a = finetune_curve(cfg, pretrained, mode, subset, test, "pretrained");
        const auto b = finetune_curve(cfg, random, mode, subset, test, "random");
        LabeledSizeRow row{size, a.rows.empty() ? 0.0 : a.rows.back().test_error,
                           b.rows.empty() ? 0.0 : b.rows.back().test_error};
        body += std::to_string(row.per_class) + ',' + io::format_double(row.pretrained_test_error) + ',' +
                io::format_double(row.random_test_error) + '\n';
        rows.push_back(row);
    }
    auto meta = base_metadata(cfg);
    meta.push_back("architecture=" + arch.to_string() + " pretrain_per_class=" + std::to_string(pretrain_per_category));
    meta.push_back(split_note(pool));
    io::write_text_atomic(cfg.out + "/labeled_size_sweep.csv", with_comments(meta, body));
    return rows;
}

TransferResult run_transfer(const ExperimentConfig& cfg, const std::vector<HistogramSample>& pretrain_dataset,
                            const std::vector<HistogramSample>& finetune_dataset) {
    cfg.validate();
    if (pretrain_dataset.empty() || finetune_dataset.empty()) throw InvalidInput("run_transfer: empty dataset");
    if (pretrain_dataset.front().values.size() != finetune_dataset.front().values.size())
        throw InvalidInput("run_transfer: datasets differ in histogram length (" +
                           std::to_string(pretrain_dataset.front().values.size()) + " vs " +
                           std::to_string(finetune_dataset.front().values.size()) + ")");
    const Split target = split_per_class(finetune_dataset, cfg.train_per_class, cfg.test_per_class, cfg.split_seed);
    if (!target.disjoint()) throw Error("train/test split is not disjoint");
    const bool source_labeled = std::any_of(pretrain_dataset.begin(), pretrain_dataset.end(),
                                            [](const HistogramSample& s) { return s.label.has_value(); });
    const auto source_pool = source_labeled
                                 ? split_per_class(pretrain_dataset, cfg.train_per_class, cfg.test_per_class,
                                                   cfg.split_seed).train
                                 : pretrain_dataset;
    const auto train = to_labeled(target.train);
    const auto test = to_labeled(target.test);
    ensure_out_dir(cfg);

    const Architecture& arch = cfg.architectures.front();
    const FinetuneMode mode = cfg.finetune_modes.front();
    TransferResult result;
    const auto transfer_model =
        build_model(cfg, arch, InitMode::pretrained, to_unlabeled(source_pool), cfg.pretrain_epochs);
    result.transfer = finetune_curve(cfg, transfer_model, mode, train, test, "transfer");
    const auto same_model = build_model(cfg, arch, InitMode::pretrained, to_unlabeled(target.train), cfg.pretrain_epochs);
    result.same_set = finetune_curve(cfg, same_model, mode, train, test, "same_set");
    for (auto* curve : {&result.transfer, &result.same_set}) {
        curve->metadata.push_back(split_note(target));
        io::write_text_atomic(cfg.out + "/transfer_" + curve->variant + ".csv", curve->to_csv());
    }
    return result;
}

TransferResult run_transfer(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto target = load_or_synthesize(cfg);
    std::vector<HistogramSample> source;
    if (!cfg.pretrain_dataset.empty()) {
        source = load_histogram_dataset(cfg.pretrain_dataset);
    } else {
        SyntheticSpec spec = cfg.synth;
        spec.class_seed = cfg.transfer_class_seed;
        source = synth_dataset(spec, derive_seed(cfg.data_seed(), 1));
    }
    return run_transfer(cfg, source, target);
}

void run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.kind) {
        case ExperimentKind::learning_curve: run_learning_curve(cfg); break;
        case ExperimentKind::pretrain_sweep: sweep_pretrain_epochs(cfg, cfg.epoch_grid); break;
        case ExperimentKind::labeled_size_sweep: sweep_labeled_size(cfg, cfg.sizes, cfg.pretrain_per_class); break;
        case ExperimentKind::transfer: run_transfer(cfg); break;
    }
}

}  // namespace dbnkit::harness
