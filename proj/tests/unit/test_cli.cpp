#include <doctest.h>

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "dbnkit/experiment.hpp"
#include "dbnkit/io.hpp"

using namespace dbnkit;
using namespace dbnkit::harness;
namespace fs = std::filesystem;

namespace {

struct Run {
    int status;
    std::string out;
};

Run cli(const std::string& args) {
    const std::string cmd = std::string(DBNKIT_CLI) + " " + args + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::string out;
    std::array<char, 512> buf{};
    while (const auto n = std::fread(buf.data(), 1, buf.size(), p)) out.append(buf.data(), n);
    const int raw = pclose(p);
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

fs::path fresh_dir(const std::string& tag) {
    const auto d = fs::temp_directory_path() / ("dbnkit_cli_" + tag);
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST_CASE("synth is deterministic") {
    const auto a = fresh_dir("a"), b = fresh_dir("b");
    REQUIRE(cli("synth --seed 3 --out " + a.string()).status == 0);
    REQUIRE(cli("--seed 3 --out " + b.string() + " synth").status == 0);
    const auto text = io::read_text((a / "synthetic.csv").string());
    CHECK(text == io::read_text((b / "synthetic.csv").string()));
    CHECK(text.find("seed=3") != std::string::npos);
    CHECK(parse_histogram_csv(text).size() == 5 * SyntheticSpec{}.samples_per_class);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("eval agrees with the library") {
    const auto d = fresh_dir("eval");
    const std::string common = " --seed 5 --out " + d.string() + " --set architecture=201-20-5";
    REQUIRE(cli("pretrain --epochs 3" + common).status == 0);
    REQUIRE(cli("finetune --epochs 4" + common).status == 0);
    const auto run = cli("eval --split test" + common);
    REQUIRE(run.status == 0);
    REQUIRE(run.out.rfind("error_rate=", 0) == 0);
    double printed = -1;
    const auto* first = run.out.data() + 11;
    std::from_chars(first, run.out.data() + run.out.size(), printed);

    ExperimentConfig cfg;
    cfg.seed = 5;
    const auto model = load_model((d / "model.dbnm").string());
    CHECK(printed == error_rate(model, to_labeled(prepare_split(cfg).test)));
    CHECK(fs::exists(d / "finetune_trace.csv"));

    REQUIRE(cli("analyze --layer 1" + common).status == 0);
    CHECK(fs::exists(d / "explicitness_layer1.csv"));
    fs::remove_all(d);
}

TEST_CASE("exit codes") {
    const auto d = fresh_dir("codes");
    CHECK(cli("frobnicate").status == 1);
    CHECK(cli("synth --set nonsense=1 --out " + d.string()).status == 1);
    CHECK(cli("eval --model " + (d / "missing.dbnm").string()).status == 2);
    CHECK(cli("pretrain --arch 201-5 --out " + d.string()).status == 1);
    CHECK(cli("--help").status == 0);
    fs::remove_all(d);
}
