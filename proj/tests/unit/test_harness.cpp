#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>
#include <vector>

#include "dbnkit/dataset.hpp"
#include "dbnkit/error.hpp"
#include "dbnkit/experiment.hpp"
#include "dbnkit/io.hpp"

using namespace dbnkit;
using namespace dbnkit::harness;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const auto d = fs::temp_directory_path() / ("dbnkit_unit_" + tag);
    fs::remove_all(d);
    return d;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> order(v.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < order.size();) {
            std::size_t j = i;
            while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = 0.5 * (i + j);
            i = j + 1;
        }
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return syy == 0 ? 0.0 : sxy / std::sqrt(sxx * syy);
}

ExperimentConfig quick(std::uint64_t seed = 0) {
    ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.pretrain_epochs = 5;
    cfg.finetune.epochs = 3;
    return cfg;
}

}  // namespace

TEST_CASE("histogram csv") {
    const auto one = parse_histogram_csv("label,grid,K,v0,v1,v2,v3\n0,1,3,0.5,0.25,0.25,0\n");
    REQUIRE(one.size() == 1);
    CHECK(one[0].label == 0);
    CHECK(one[0].values == std::vector<double>{0.5, 0.25, 0.25, 0.0});
    CHECK(one[0].vocabulary == 3);

    const auto unl = parse_histogram_csv("# note\nlabel,grid,K,v0,v1\n-1,1,1,1,0\n");
    CHECK(!unl[0].label.has_value());

    CHECK_THROWS_AS(parse_histogram_csv("label,grid,K,v0,v1,v2,v3\n0,1,3,0.5,0.2,0.2,0\n"), FormatError);
    CHECK_THROWS_AS(parse_histogram_csv("label,grid,K,v0,v1,v2,v3\n0,1,4,0.5,0.25,0.25,0\n"), FormatError);
    try {
        parse_histogram_csv("label,grid,K,v0,v1\n0,1,1,1,0\n0,1,1,x,0\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse_histogram_csv("label,grid,K,v0,v1\n0,1,1,1\n"), ParseError);
    CHECK_THROWS_AS(parse_histogram_csv("lbl,grid,K,v0,v1\n"), ParseError);

    const auto near = parse_histogram_csv("label,grid,K,v0,v1\n0,1,1,0.5000004,0.5\n");
    CHECK(std::abs(near[0].values[0] + near[0].values[1] - 1) < 1e-15);
}

TEST_CASE("histogram csv round trip is bit-exact") {
    SyntheticSpec spec;
    spec.samples_per_class = 4;
    auto samples = synth_dataset(spec, 1);
    samples[2].label.reset();
    const auto text = format_histogram_csv(samples, {"hello"});
    CHECK(text.rfind("# hello\nlabel,grid,K,v0,", 0) == 0);
    const auto back = parse_histogram_csv(text);
    REQUIRE(back.size() == samples.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].values == samples[i].values);
        CHECK(back[i].label == samples[i].label);
    }

    const auto path = (fs::temp_directory_path() / "dbnkit_unit_hist.csv").string();
    save_histogram_dataset(path, samples);
    CHECK(load_histogram_dataset(path).size() == samples.size());
    fs::remove(path);
    CHECK_THROWS_AS(load_histogram_dataset(path), IoError);
}

TEST_CASE("synthetic generator") {
    SyntheticSpec spec;
    const auto a = synth_dataset(spec, 7);
    CHECK(a.size() == 5 * spec.samples_per_class);
    for (const auto& s : a) {
        CHECK(s.values.size() == 201);
        CHECK(s.values.back() == 0.0);
        CHECK(std::abs(std::accumulate(s.values.begin(), s.values.end(), 0.0) - 1) < 1e-12);
    }
    const auto b = synth_dataset(spec, 7);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].values == b[i].values);
    CHECK(synth_dataset(spec, 8)[0].values != a[0].values);

    spec.background_weight = 1.5;
    CHECK_THROWS_AS(spec.validate(), InvalidInput);
    spec = SyntheticSpec{};
    spec.words_per_image = 0;
    CHECK_THROWS_AS(synth_dataset(spec, 1), InvalidInput);
}

TEST_CASE("synthetic difficulty extremes") {
    auto run = [](SyntheticSpec spec) {
        ExperimentConfig cfg;
        cfg.synth = spec;
        cfg.architectures = {Architecture({201, 5})};
        cfg.init_modes = {InitMode::random};
        cfg.finetune.epochs = 30;
        const auto split = prepare_split(cfg);
        const auto model = build_model(cfg, cfg.architectures[0], InitMode::random, {}, 0);
        FinetuneConfig ft = cfg.finetune;
        const auto r = finetune(model, to_labeled(split.train), ft);
        return error_rate(r.model, to_labeled(split.test));
    };
    SyntheticSpec noise;
    noise.background_weight = 1.0;
    CHECK(run(noise) >= 0.8 - 0.1);

    SyntheticSpec easy;
    easy.background_weight = 0.0;
    easy.concentration = 0.01;
    easy.words_per_image = 500;
    CHECK(run(easy) <= 0.05);
}

TEST_CASE("splits") {
    SyntheticSpec spec;
    spec.samples_per_class = 10;
    const auto data = synth_dataset(spec, 2);
    const auto s = split_per_class(data, 6, 4, 9);
    CHECK(s.train.size() == 30);
    CHECK(s.test.size() == 20);
    CHECK(s.disjoint());
    std::set<std::size_t> all(s.train_index.begin(), s.train_index.end());
    all.insert(s.test_index.begin(), s.test_index.end());
    CHECK(all.size() == 50);
    const auto again = split_per_class(data, 6, 4, 9);
    CHECK(again.train_index == s.train_index);
    CHECK(split_per_class(data, 6, 4, 10).train_index != s.train_index);
    CHECK_THROWS_AS(split_per_class(data, 6, 5, 9), InvalidInput);

    const auto sub = subset_per_class(s.train, 2, 1);
    CHECK(sub.size() == 10);
    std::map<int, int> counts;
    for (const auto& x : sub) ++counts[*x.label];
    for (const auto& [label, n] : counts) CHECK(n == 2);
}

TEST_CASE("config parsing") {
    const auto cfg = parse_config(
        "# comment\n"
        "kind = pretrain\n"
        "architecture = 201-100-50-5, 201-5\n"
        "ft.epochs = 7   # trailing\n"
        "cd.visible_mode = sampled\n"
        "\n"
        "seed = 12\n");
    CHECK(cfg.kind == ExperimentKind::pretrain_sweep);
    REQUIRE(cfg.architectures.size() == 2);
    CHECK(cfg.architectures[1].to_string() == "201-5");
    CHECK(cfg.finetune.epochs == 7);
    CHECK(cfg.cd.visible_mode == VisibleMode::sampled);
    CHECK(cfg.seed == 12);
    CHECK(cfg.cd.batch_size == ExperimentConfig{}.cd.batch_size);

    try {
        parse_config("seed = 1\nbogus = 2\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_config("seed 1\n"), ParseError);
    CHECK_THROWS_AS(parse_config("ft.epochs = many\n"), ParseError);

    ExperimentConfig c;
    set_config_value(c, "sizes", "1,2,4");
    CHECK(c.sizes == std::vector<std::size_t>{1, 2, 4});
    CHECK_THROWS(set_config_value(c, "nope", "1"));

    const auto text = ExperimentConfig{}.canonical_text();
    std::vector<std::string> keys;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        keys.push_back(text.substr(pos, text.find(" = ", pos) - pos));
        pos = nl + 1;
    }
    CHECK(std::is_sorted(keys.begin(), keys.end()));
    CHECK(parse_config(text).canonical_text() == text);

    ExperimentConfig d;
    CHECK(d.digest().size() == 16);
    CHECK(d.digest() == ExperimentConfig{}.digest());
    d.seed = 1;
    CHECK(d.digest() != ExperimentConfig{}.digest());

    ExperimentConfig bad;
    bad.train_per_class = 150;
    bad.test_per_class = 100;
    CHECK_THROWS_AS(run_learning_curve(bad), InvalidInput);
    bad = ExperimentConfig{};
    bad.dataset = "/nonexistent/file.csv";
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("learning curves") {
    auto cfg = quick();
    cfg.finetune.epochs = 1;
    cfg.finetune_modes = {FinetuneMode::full_network, FinetuneMode::top_layer_only};
    cfg.architectures = {Architecture({201, 30, 5}), Architecture({201, 5})};
    cfg.out = fresh_dir("curves").string();
    const auto curves = run_learning_curve(cfg);
    CHECK(curves.size() == 5);
    for (const auto& c : curves) CHECK(c.rows.size() == 1);
    CHECK(fs::exists(fs::path(cfg.out) / "curve_201-30-5_pretrained_top_layer_only.csv"));
    const auto text = io::read_text((fs::path(cfg.out) / "curve_201-5_random_full_network.csv").string());
    CHECK(text.find("# dbnkit 1.0.0\n") == 0);
    CHECK(text.find("# config_digest=" + cfg.digest()) != std::string::npos);
    CHECK(text.find("# seed=0") != std::string::npos);
    CHECK(text.find("disjoint=yes") != std::string::npos);
    CHECK(text.find("epoch,train_error,test_error,train_loss,test_mean_class_accuracy\n1,") != std::string::npos);
    fs::remove_all(cfg.out);
}

TEST_CASE("reruns are byte-identical") {
    auto cfg = quick(4);
    const auto a = fresh_dir("rerun_a"), b = fresh_dir("rerun_b");
    cfg.out = a.string();
    run_experiment(cfg);
    cfg.out = b.string();
    run_experiment(cfg);
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        CHECK(io::read_file(e.path().string()) == io::read_file((b / e.path().filename()).string()));
        ++n;
    }
    CHECK(n == 2);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("pre-trained beats random after one epoch") {
    std::vector<double> pre, rnd;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto cfg = quick(seed);
        cfg.pretrain_epochs = 200;
        cfg.finetune.epochs = 1;
        cfg.out = fresh_dir("epoch1").string();
        const auto curves = run_learning_curve(cfg);
        pre.push_back(curves[0].rows[0].test_error);
        rnd.push_back(curves[1].rows[0].test_error);
        fs::remove_all(cfg.out);
    }
    std::sort(pre.begin(), pre.end());
    std::sort(rnd.begin(), rnd.end());
    CHECK(pre[2] < rnd[2]);
}

TEST_CASE("pre-train sweep") {
    auto cfg = quick();
    cfg.out = fresh_dir("sweep").string();
    const auto rows = sweep_pretrain_epochs(cfg, {0, 2, 5});
    CHECK(rows.size() == 3);
    CHECK(rows[1].pretrain_epochs == 2);

    // Zero epochs is the random-init baseline.
    const auto split = prepare_split(cfg);
    const auto base = finetune_curve(cfg, build_model(cfg, cfg.architectures[0], InitMode::random, {}, 0),
                                     FinetuneMode::full_network, to_labeled(split.train), to_labeled(split.test), "r");
    CHECK(rows[0].final_test_error == base.rows.back().test_error);

    CHECK_THROWS_AS(sweep_pretrain_epochs(cfg, {}), InvalidInput);
    CHECK_THROWS_AS(sweep_pretrain_epochs(cfg, {5, 2}), InvalidInput);
    CHECK_THROWS_AS(sweep_pretrain_epochs(cfg, {-1}), InvalidInput);
    fs::remove_all(cfg.out);
}

TEST_CASE("labeled-size sweep") {
    auto cfg = quick();
    cfg.out = fresh_dir("sizes").string();
    CHECK_THROWS_AS(sweep_labeled_size(cfg, {1, 200}, 100), InvalidInput);
    CHECK_THROWS_AS(sweep_labeled_size(cfg, {0}, 100), InvalidInput);
    CHECK(ExperimentConfig{}.sizes == std::vector<std::size_t>{1, 2, 4, 8, 16, 32, 64});

    std::vector<double> rho;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ExperimentConfig c;
        c.seed = seed;
        c.pretrain_epochs = 50;
        c.finetune.epochs = 30;
        c.out = cfg.out;
        const auto rows = sweep_labeled_size(c, c.sizes, 100);
        REQUIRE(rows.size() == 7);
        std::vector<double> size, err;
        for (const auto& r : rows) size.push_back(r.per_class), err.push_back(r.pretrained_test_error);
        rho.push_back(spearman(size, err));
    }
    std::sort(rho.begin(), rho.end());
    CHECK(rho[2] <= 0.0);
    fs::remove_all(cfg.out);
}

TEST_CASE("transfer") {
    auto cfg = quick();
    cfg.out = fresh_dir("transfer").string();
    const auto data = synth_dataset(cfg.synth, 3);
    const auto same = run_transfer(cfg, data, data);
    REQUIRE(same.transfer.rows.size() == same.same_set.rows.size());
    for (std::size_t i = 0; i < same.transfer.rows.size(); ++i)
        CHECK(same.transfer.rows[i].test_error == same.same_set.rows[i].test_error);

    SyntheticSpec other = cfg.synth;
    other.vocabulary = 150;
    CHECK_THROWS_AS(run_transfer(cfg, synth_dataset(other, 3), data), InvalidInput);

    const auto r = run_transfer(cfg);
    CHECK(fs::exists(fs::path(cfg.out) / "transfer_transfer.csv"));
    CHECK(fs::exists(fs::path(cfg.out) / "transfer_same_set.csv"));
    CHECK(r.transfer.rows.size() == 3);
    fs::remove_all(cfg.out);
}

TEST_CASE("mean class accuracy") {
    const DbnClassifier zero({RbmLayer(2, 2)}, Matrix(3, 2), Vector(3, 0.0));
    // Always predicts class 0: per-class accuracies 1, 0, 0.
    const std::vector<LabeledVector> data{{{0.5, 0.5}, 0}, {{0.5, 0.5}, 1}, {{0.5, 0.5}, 1}, {{0.5, 0.5}, 2}};
    CHECK(mean_class_accuracy(zero, data) == doctest::Approx(1.0 / 3));
    CHECK(error_rate(zero, data) == 0.75);
}
