#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dbnkit/rbm.hpp"

namespace dbnkit {

// Layer sizes from input to label layer, e.g. {1001, 500, 13}.
class Architecture {
public:
    Architecture() = default;
    // Throws InvalidInput unless 2..5 positive sizes are given (0 to 3 hidden).
    explicit Architecture(std::vector<std::size_t> layer_sizes);

    // Parses the dash notation "1001-500-13".
    static Architecture parse(const std::string& text);
    std::string to_string() const;

    const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
    std::size_t input_size() const { return sizes_.front(); }
    std::size_t n_classes() const { return sizes_.back(); }
    std::size_t n_hidden_layers() const { return sizes_.size() - 2; }

    bool operator==(const Architecture&) const = default;

private:
    std::vector<std::size_t> sizes_;
};

// A labeled (or unlabeled, label < 0) input vector.
struct LabeledVector {
    Vector values;
    int label = -1;
};

class DbnClassifier {
public:
    DbnClassifier() = default;
    // Throws InvalidInput if the layers do not chain or parameters are non-finite.
    DbnClassifier(std::vector<RbmLayer> rbm_layers, Matrix label_weights, Vector label_bias);

    Architecture architecture() const;
    const std::vector<RbmLayer>& rbm_layers() const noexcept { return rbm_layers_; }
    std::vector<RbmLayer>& mutable_rbm_layers() noexcept { return rbm_layers_; }
    const Matrix& label_weights() const noexcept { return label_weights_; }
    const Vector& label_bias() const noexcept { return label_bias_; }
    Matrix& mutable_label_weights() noexcept { return label_weights_; }
    Vector& mutable_label_bias() noexcept { return label_bias_; }

    std::size_t input_size() const;
    std::size_t n_classes() const { return label_bias_.size(); }
    // Includes the RBM visible biases, which the classifier never reads.
    std::size_t parameter_count() const;
    bool is_finite() const;

    bool operator==(const DbnClassifier&) const = default;

private:
    std::vector<RbmLayer> rbm_layers_;
    Matrix label_weights_;
    Vector label_bias_;
};

DbnClassifier init_random(const Architecture& arch, double scale, std::uint64_t seed);

// Greedy layer-wise CD pre-training. Layer l is trained on the mean-field
// hidden probabilities of layers below it; each layer uses a seed derived from
// cfg.seed and its index. Label parameters are left as they are.
DbnClassifier pretrain_greedy(DbnClassifier model, std::span<const Vector> data, int epochs_per_layer,
                              const CdConfig& cfg);

// Mean-field activities at every hidden layer; element 0 is the input itself.
std::vector<Vector> hidden_activations(const DbnClassifier& model, std::span<const double> v);

// Softmax class probabilities.
Vector forward(const DbnClassifier& model, std::span<const double> v);

// Argmax of forward; ties go to the lowest class index.
int predict(const DbnClassifier& model, std::span<const double> v);

enum class FinetuneMode { full_network, top_layer_only };

std::string to_string(FinetuneMode mode);
FinetuneMode parse_finetune_mode(const std::string& text);

struct FinetuneConfig {
    FinetuneMode mode = FinetuneMode::full_network;
    double learning_rate = 0.1;
    int epochs = 10;
    int batch_size = 10;
    double weight_decay = 0.0002;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_error = 0.0;
};

// Gradient with the same layout as DbnClassifier. RBM visible biases are not
// part of the discriminative network and are omitted.
struct DbnGradient {
    std::vector<Matrix> weights;
    std::vector<Vector> hidden_bias;
    Matrix label_weights;
    Vector label_bias;
};

// Mean cross-entropy over `data` plus 0.5 * weight_decay * sum of squared
// weights (all layers), and its gradient.
struct LossAndGradient {
    double loss = 0.0;
    DbnGradient gradient;
};
LossAndGradient loss_and_gradient(const DbnClassifier& model, std::span<const LabeledVector> data,
                                  double weight_decay);

// Mean cross-entropy, no decay term.
double cross_entropy(const DbnClassifier& model, std::span<const LabeledVector> data);

using EpochCallback = std::function<void(const EpochStats&, const DbnClassifier&)>;

struct FinetuneResult {
    DbnClassifier model;
    std::vector<EpochStats> trace;
};

// Mini-batch gradient descent on the cross-entropy. In top_layer_only mode the
// RBM stack is frozen. `on_epoch`, when set, runs after every epoch.
FinetuneResult finetune(DbnClassifier model, std::span<const LabeledVector> data, const FinetuneConfig& cfg,
                        const EpochCallback& on_epoch = {});

double error_rate(const DbnClassifier& model, std::span<const LabeledVector> data);

// Binary model format, little-endian:
//   "DBNM" | u32 version | u32 n_sizes | u32 sizes[n_sizes] |
//   per RBM layer: f64 weights (row-major, hidden x visible), f64 hidden_bias, f64 visible_bias |
//   f64 label_weights (row-major, classes x top) | f64 label_bias
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize(const DbnClassifier& model);
// Throws FormatError with the failing byte offset.
DbnClassifier deserialize(std::span<const std::uint8_t> bytes);

void save_model(const DbnClassifier& model, const std::string& path);
DbnClassifier load_model(const std::string& path);

}  // namespace dbnkit
