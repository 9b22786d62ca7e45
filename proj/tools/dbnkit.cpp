// dbnkit command line: data generation, feature extraction, training,
// evaluation, explicitness analysis and the experiment sweeps.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dbnkit/analysis.hpp"
#include "dbnkit/dataset.hpp"
#include "dbnkit/dbn.hpp"
#include "dbnkit/error.hpp"
#include "dbnkit/experiment.hpp"
#include "dbnkit/features.hpp"
#include "dbnkit/io.hpp"

namespace fs = std::filesystem;
using namespace dbnkit;
using namespace dbnkit::harness;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::vector<std::string> sets;
};

ExperimentConfig resolve(const Globals& g) {
    ExperimentConfig cfg = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
    for (const auto& kv : g.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InvalidInput("--set expects key=value, got '" + kv + "'");
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (g.seed) cfg.seed = *g.seed;
    if (g.out) cfg.out = *g.out;
    cfg.validate();
    return cfg;
}

std::string in_out(const ExperimentConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.out);
    return (fs::path(cfg.out) / name).string();
}

std::vector<std::string> metadata(const ExperimentConfig& cfg) {
    return {std::string("dbnkit ") + kToolVersion, "config_digest=" + cfg.digest(), "seed=" + std::to_string(cfg.seed)};
}

// Shortest round-trip form, for terminal output.
std::string num(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::vector<HistogramSample> pick(const ExperimentConfig& cfg, const std::string& which) {
    if (which == "all") {
        return cfg.dataset.empty() ? synth_dataset(cfg.synth, cfg.data_seed()) : load_histogram_dataset(cfg.dataset);
    }
    const Split split = prepare_split(cfg);
    if (which == "train") return split.train;
    if (which == "test") return split.test;
    throw InvalidInput("--split must be train, test or all");
}

// Images under `root/<category>/*.pgm`; categories numbered in name order.
void collect_images(const std::string& root, std::vector<features::GrayImage>& images,
                    std::vector<std::optional<int>>& labels, std::vector<std::string>& names) {
    if (!fs::is_directory(root)) throw InvalidInput("not a directory: " + root);
    std::vector<fs::path> dirs;
    std::vector<fs::path> loose;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory()) dirs.push_back(e.path());
        else if (e.path().extension() == ".pgm") loose.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    std::sort(loose.begin(), loose.end());
    for (const auto& p : loose) {
        images.push_back(features::load_pgm(p.string()));
        labels.push_back(std::nullopt);
    }
    for (std::size_t c = 0; c < dirs.size(); ++c) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dirs[c]))
            if (e.path().extension() == ".pgm") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& p : files) {
            images.push_back(features::load_pgm(p.string()));
            labels.push_back(static_cast<int>(c));
        }
        names.push_back(dirs[c].filename().string());
    }
    if (images.empty()) throw InvalidInput("no .pgm images under " + root);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep belief networks on bag-of-words histograms"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "key = value config file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "base seed");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--set", g.sets, "override one config key (key=value), repeatable");

    // synth
    auto* synth = app.add_subcommand("synth", "write a synthetic histogram dataset");

    // features
    auto* feat = app.add_subcommand("features", "PGM images -> histogram CSV and codebook");
    std::string images_dir, codebook_in;
    features::PipelineConfig pcfg;
    feat->add_option("--images", images_dir, "directory with one subdirectory of .pgm files per category")->required();
    feat->add_option("--codebook", codebook_in, "reuse this codebook instead of clustering");
    feat->add_option("--vocabulary", pcfg.vocabulary, "K")->capture_default_str();
    feat->add_option("--grid", pcfg.grid, "g for the g x g spatial grid")->capture_default_str();
    feat->add_option("--sigma", pcfg.smoothing_sigma, "cell smoothing, in cell widths; 0 = hard")->capture_default_str();
    feat->add_option("--patch-size", pcfg.patch.patch_size)->capture_default_str();
    feat->add_option("--spacing", pcfg.patch.grid_spacing)->capture_default_str();
    feat->add_option("--variance-threshold", pcfg.patch.variance_threshold)->capture_default_str();
    feat->add_option("--kmeans-iters", pcfg.kmeans_iters)->capture_default_str();

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "greedy CD pre-training on the train split");
    std::string arch_text;
    std::optional<int> pre_epochs;
    pre->add_option("--arch", arch_text, "e.g. 201-100-5 (default: first configured architecture)");
    pre->add_option("--epochs", pre_epochs, "CD epochs per layer");

    // finetune
    auto* ft = app.add_subcommand("finetune", "supervised fine-tuning on the train split");
    std::string model_path, mode_text = "full_network";
    std::optional<int> ft_epochs;
    ft->add_option("--model", model_path, "input model (default: <out>/model.dbnm)");
    ft->add_option("--mode", mode_text, "full_network or top_layer_only")->capture_default_str();
    ft->add_option("--epochs", ft_epochs, "fine-tune epochs");

    // eval
    auto* ev = app.add_subcommand("eval", "print error_rate=<x> on a split");
    std::string split_name = "test";
    ev->add_option("--model", model_path, "model (default: <out>/model.dbnm)");
    ev->add_option("--split", split_name, "train, test or all")->capture_default_str();

    // analyze
    auto* an = app.add_subcommand("analyze", "per-neuron explicitness at one layer");
    int layer = 1;
    an->add_option("--model", model_path, "model (default: <out>/model.dbnm)");
    an->add_option("--layer", layer, "0 = raw input, 1.. = hidden layers")->capture_default_str();
    an->add_option("--split", split_name, "train, test or all")->capture_default_str();

    // sweep
    auto* sw = app.add_subcommand("sweep", "learning curves and sweeps");
    std::string kind_text = "curve";
    sw->add_option("--kind", kind_text, "curve, pretrain or labeled")->capture_default_str();

    // transfer
    auto* tr = app.add_subcommand("transfer", "pre-train on one dataset, fine-tune on another");
    std::string pretrain_data;
    tr->add_option("--pretrain-data", pretrain_data, "histogram CSV for pre-training (default: second generator)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        ExperimentConfig cfg = resolve(g);
        auto default_model = [&] { return model_path.empty() ? in_out(cfg, "model.dbnm") : model_path; };

        if (*synth) {
            const auto samples = synth_dataset(cfg.synth, cfg.data_seed());
            auto meta = metadata(cfg);
            meta.push_back("synthetic classes=" + std::to_string(cfg.synth.n_classes) +
                           " K=" + std::to_string(cfg.synth.vocabulary));
            const auto path = in_out(cfg, "synthetic.csv");
            save_histogram_dataset(path, samples, meta);
            std::cout << "wrote " << samples.size() << " samples to " << path << "\n";
        } else if (*feat) {
            pcfg.seed = cfg.seed;
            std::vector<features::GrayImage> images;
            std::vector<std::optional<int>> labels;
            std::vector<std::string> names;
            collect_images(images_dir, images, labels, names);
            std::optional<features::Codebook> given;
            if (!codebook_in.empty()) given = features::deserialize_codebook(io::read_file(codebook_in));
            const auto result = features::run_pipeline(images, labels, pcfg, given ? &*given : nullptr);
            auto meta = metadata(cfg);
            for (std::size_t c = 0; c < names.size(); ++c) meta.push_back("category " + std::to_string(c) + "=" + names[c]);
            const auto csv = in_out(cfg, "histograms.csv");
            save_histogram_dataset(csv, result.histograms, meta);
            io::write_file_atomic(in_out(cfg, "codebook.bin"), features::serialize_codebook(result.codebook));
            std::cout << "wrote " << result.histograms.size() << " histograms to " << csv << "\n";
        } else if (*pre) {
            const Architecture arch = arch_text.empty() ? cfg.architectures.front() : Architecture::parse(arch_text);
            if (arch.n_hidden_layers() == 0) throw Unsupported("pretrain: " + arch.to_string() + " has no hidden layers");
            const int epochs = pre_epochs.value_or(cfg.pretrain_epochs);
            if (epochs < 0) throw InvalidInput("--epochs must be non-negative");
            const Split split = prepare_split(cfg);
            const auto model = build_model(cfg, arch, InitMode::pretrained, to_unlabeled(split.train), epochs);
            const auto path = default_model();
            save_model(model, path);
            std::cout << "pre-trained " << arch.to_string() << " for " << epochs << " epochs per layer -> " << path
                      << "\n";
        } else if (*ft) {
            const auto path = default_model();
            DbnClassifier model = fs::exists(path) ? load_model(path)
                                                   : init_random(cfg.architectures.front(), cfg.init_scale, cfg.init_seed());
            FinetuneConfig fc = cfg.finetune;
            fc.mode = parse_finetune_mode(mode_text);
            fc.seed = cfg.finetune_seed();
            if (ft_epochs) fc.epochs = *ft_epochs;
            const Split split = prepare_split(cfg);
            const auto train = to_labeled(split.train);
            const auto test = to_labeled(split.test);
            std::string trace = "epoch,train_loss,train_error,test_error\n";
            auto result = finetune(std::move(model), train, fc, [&](const EpochStats& s, const DbnClassifier& m) {
                trace += std::to_string(s.epoch) + ',' + io::format_double(s.train_loss) + ',' +
                         io::format_double(s.train_error) + ',' + io::format_double(error_rate(m, test)) + '\n';
            });
            std::string header;
            for (const auto& m : metadata(cfg)) header += "# " + m + "\n";
            io::write_text_atomic(in_out(cfg, "finetune_trace.csv"), header + trace);
            save_model(result.model, path);
            const auto& last = result.trace.back();
            std::cout << "epochs=" << last.epoch << " train_error=" << num(last.train_error)
                      << " test_error=" << num(error_rate(result.model, test)) << "\n";
        } else if (*ev) {
            const auto model = load_model(default_model());
            const auto data = to_labeled(pick(cfg, split_name));
            std::cout << "error_rate=" << num(error_rate(model, data)) << "\n";
        } else if (*an) {
            const auto model = load_model(default_model());
            const auto data = to_labeled(pick(cfg, split_name));
            const auto am = analysis::layer_activities(model, data, layer);
            const auto flipped = analysis::flip_polarity(am);
            const auto report = analysis::best_neurons(flipped.matrix);
            const auto path = in_out(cfg, "explicitness_layer" + std::to_string(layer) + ".csv");
            io::write_text_atomic(path, report.to_csv());
            io::write_text_atomic(in_out(cfg, "activities_layer" + std::to_string(layer) + ".csv"),
                                  analysis::activities_csv(am));
            std::cout << "layer=" << layer << " median_best_score=" << num(analysis::median_best_score(report))
                      << " flipped_fraction=" << num(flipped.flipped_fraction)
                      << " input_baseline=" << num(analysis::median_best_score(analysis::input_baseline(data)))
                      << "\n";
        } else if (*sw) {
            cfg.kind = parse_experiment_kind(kind_text);
            if (cfg.kind == ExperimentKind::transfer) throw InvalidInput("use the transfer subcommand");
            run_experiment(cfg);
            std::cout << "wrote " << to_string(cfg.kind) << " results to " << cfg.out << "\n";
        } else if (*tr) {
            if (!pretrain_data.empty()) cfg.pretrain_dataset = pretrain_data;
            cfg.validate();
            const auto r = run_transfer(cfg);
            std::cout << "transfer_final_test_error=" << num(r.transfer.rows.back().test_error)
                      << " same_set_final_test_error=" << num(r.same_set.rows.back().test_error) << "\n";
        }
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Unsupported& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
