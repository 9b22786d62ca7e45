#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dbnkit/dataset.hpp"
#include "dbnkit/dbn.hpp"

namespace dbnkit::harness {

inline constexpr const char* kToolVersion = "1.0.0";

enum class ExperimentKind { learning_curve, pretrain_sweep, labeled_size_sweep, transfer };
std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& text);

enum class InitMode { pretrained, random };
std::string to_string(InitMode mode);

// Everything one experiment run needs. Loaded from a flat "key = value" file;
// see README for the key list. Defaults are the desk-scale synthetic benchmark.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::learning_curve;
    std::vector<Architecture> architectures{Architecture({201, 100, 5})};
    std::vector<InitMode> init_modes{InitMode::pretrained, InitMode::random};
    std::vector<FinetuneMode> finetune_modes{FinetuneMode::full_network};
    double init_scale = 0.01;
    int pretrain_epochs = 200;
    // Histogram inputs sum to 1, so the per-unit signal is tiny; the library
    // CD defaults (lr 0.01, batch 100) barely move the weights on them.
    CdConfig cd{.learning_rate = 0.1, .batch_size = 10};
    FinetuneConfig finetune{.learning_rate = 1.0, .epochs = 100};

    // Data: a histogram CSV, or the synthetic generator when empty.
    std::string dataset;
    SyntheticSpec synth;
    std::optional<std::uint64_t> synth_seed;  // defaults to a stream of `seed`

    std::size_t train_per_class = 100;
    std::size_t test_per_class = 100;
    std::uint64_t split_seed = 0;

    std::vector<int> epoch_grid{0, 50, 100, 200};
    std::vector<std::size_t> sizes{1, 2, 4, 8, 16, 32, 64};
    std::size_t pretrain_per_class = 100;

    // Transfer: pre-training source. Empty `pretrain_dataset` means a second
    // synthetic generator that differs from `synth` only in its class seed.
    std::string pretrain_dataset;
    std::uint64_t transfer_class_seed = 101;

    std::uint64_t seed = 0;
    std::string out = "out";

    // Throws InvalidInput on out-of-range values or missing files.
    void validate() const;

    // Sorted "key = value" lines covering every field.
    std::string canonical_text() const;
    // FNV-1a 64 of canonical_text, as 16 hex digits.
    std::string digest() const;

    // Streams derived from `seed`: init 1, CD 2, fine-tune 3, data 4.
    std::uint64_t init_seed() const;
    std::uint64_t cd_seed() const;
    std::uint64_t finetune_seed() const;
    std::uint64_t data_seed() const;
};

// Parses "key = value" lines; '#' starts a comment. Unknown keys and bad values
// are ParseErrors carrying the line number.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});
// Applies one key/value pair (used for file lines and CLI overrides).
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct CurveRow {
    int epoch = 0;
    double train_error = 0.0;
    double test_error = 0.0;
    double train_loss = 0.0;
    double test_mean_class_accuracy = 0.0;
};

struct LearningCurve {
    std::string variant;
    std::vector<CurveRow> rows;
    std::vector<std::string> metadata;  // written as '#' header comments
    std::string to_csv() const;
};

// Mean over classes of per-class accuracy.
double mean_class_accuracy(const DbnClassifier& model, std::span<const LabeledVector> data);

// Train/test split of the configured data source, checked disjoint.
Split prepare_split(const ExperimentConfig& cfg);

// Builds a model for one variant: init_random, then greedy pre-training on
// `pretrain_data` when `init` is pretrained and the architecture has hidden layers.
DbnClassifier build_model(const ExperimentConfig& cfg, const Architecture& arch, InitMode init,
                          std::span<const Vector> pretrain_data, int pretrain_epochs);

// Fine-tunes and records one curve row per epoch with test error.
LearningCurve finetune_curve(const ExperimentConfig& cfg, DbnClassifier model, FinetuneMode mode,
                             std::span<const LabeledVector> train, std::span<const LabeledVector> test,
                             std::string variant);

// Every (architecture, init mode, fine-tune mode) variant; one CSV each under cfg.out.
std::vector<LearningCurve> run_learning_curve(const ExperimentConfig& cfg);

struct PretrainSweepRow {
    int pretrain_epochs = 0;
    double test_error_epoch1 = 0.0;
    double final_test_error = 0.0;
};
std::vector<PretrainSweepRow> sweep_pretrain_epochs(const ExperimentConfig& cfg, const std::vector<int>& epoch_grid);

struct LabeledSizeRow {
    std::size_t per_class = 0;
    double pretrained_test_error = 0.0;
    double random_test_error = 0.0;
};
std::vector<LabeledSizeRow> sweep_labeled_size(const ExperimentConfig& cfg, const std::vector<std::size_t>& sizes,
                                               std::size_t pretrain_per_category);

struct TransferResult {
    LearningCurve transfer;  // pre-trained on the source, fine-tuned on the target
    LearningCurve same_set;  // pre-trained and fine-tuned on the target
};
TransferResult run_transfer(const ExperimentConfig& cfg, const std::vector<HistogramSample>& pretrain_dataset,
                            const std::vector<HistogramSample>& finetune_dataset);

// Loads or synthesizes both transfer datasets per cfg, then run_transfer.
TransferResult run_transfer(const ExperimentConfig& cfg);

// Dispatches on cfg.kind and writes outputs under cfg.out.
void run_experiment(const ExperimentConfig& cfg);

}  // namespace dbnkit::harness
