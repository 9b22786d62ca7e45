#include "dbnkit/dbn.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "dbnkit/error.hpp"
#include "dbnkit/io.hpp"

namespace dbnkit {
namespace {

void check_input(const DbnClassifier& model, std::span<const double> v, const char* what) {
    if (v.size() != model.input_size())
        throw InvalidInput(std::string(what) + ": input length " + std::to_string(v.size()) + " != " +
                           std::to_string(model.input_size()));
    if (!all_finite(v)) throw InvalidInput(std::string(what) + ": non-finite input");
}

void check_labeled(const DbnClassifier& model, std::span<const LabeledVector> data, const char* what) {
    if (data.empty()) throw InvalidInput(std::string(what) + ": empty data");
    for (const auto& s : data) {
        check_input(model, s.values, what);
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= model.n_classes())
            throw InvalidInput(std::string(what) + ": label " + std::to_string(s.label) + " outside [0, " +
                               std::to_string(model.n_classes()) + ")");
    }
}

void logistic_layer(const RbmLayer& layer, std::span<const double> in, std::span<double> out) {
    affine(layer.weights(), in, layer.hidden_bias(), out);
    for (double& x : out) x = logistic(x);
}

// Writes log-softmax of logits into `out`.
void log_softmax(std::span<const double> logits, std::span<double> out) {
    const double top = *std::max_element(logits.begin(), logits.end());
    double acc = 0.0;
    for (double z : logits) acc += std::exp(z - top);
    const double lse = top + std::log(acc);
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
}

int argmax(std::span<const double> x) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < x.size(); ++i)
        if (x[i] > x[best]) best = i;
    return static_cast<int>(best);
}

DbnGradient zero_gradient(const DbnClassifier& model) {
    DbnGradient g;
    for (const auto& layer : model.rbm_layers()) {
        g.weights.emplace_back(layer.n_hidden(), layer.n_visible());
        g.hidden_bias.emplace_back(layer.n_hidden(), 0.0);
    }
    g.label_weights = Matrix(model.label_weights().rows(), model.label_weights().cols());
    g.label_bias.assign(model.n_classes(), 0.0);
    return g;
}

// Per-sample workspace for forward/backward passes.
struct Workspace {
    std::vector<Vector> acts;
    Vector logits, logp, delta, back;

    explicit Workspace(const DbnClassifier& model) {
        acts.emplace_back(model.input_size());
        for (const auto& layer : model.rbm_layers()) acts.emplace_back(layer.n_hidden());
        logits.resize(model.n_classes());
        logp.resize(model.n_classes());
        delta.resize(model.n_classes());
    }
};

// Forward pass from the input stored in ws.acts[0]; fills logits and logp.
void forward_pass(const DbnClassifier& model, Workspace& ws) {
    const auto& layers = model.rbm_layers();
    for (std::size_t l = 0; l < layers.size(); ++l) logistic_layer(layers[l], ws.acts[l], ws.acts[l + 1]);
    affine(model.label_weights(), ws.acts.back(), model.label_bias(), ws.logits);
    log_softmax(ws.logits, ws.logp);
}

// Adds the cross-entropy gradient of one sample (already forwarded) into g.
// With `top_only`, stops after the label layer. Returns the sample loss.
double backward_pass(const DbnClassifier& model, Workspace& ws, int label, bool top_only, DbnGradient& g) {
    const std::size_t n_classes = model.n_classes();
    for (std::size_t c = 0; c < n_classes; ++c) ws.delta[c] = std::exp(ws.logp[c]);
    ws.delta[static_cast<std::size_t>(label)] -= 1.0;
    rank1_update(g.label_weights, 1.0, ws.delta, ws.acts.back());
    kernels::axpy(g.label_bias.data(), 1.0, ws.delta.data(), n_classes);
    const double loss = -ws.logp[static_cast<std::size_t>(label)];
    if (top_only) return loss;

    const auto& layers = model.rbm_layers();
    Vector upstream = ws.delta;
    const Matrix* above = &model.label_weights();
    for (std::size_t l = layers.size(); l-- > 0;) {
        const Vector& out = ws.acts[l + 1];
        ws.back.assign(out.size(), 0.0);
        for (std::size_t r = 0; r < above->rows(); ++r)
            if (upstream[r] != 0.0) kernels::axpy(ws.back.data(), upstream[r], above->row(r).data(), out.size());
        for (std::size_t j = 0; j < out.size(); ++j) ws.back[j] *= out[j] * (1.0 - out[j]);
        rank1_update(g.weights[l], 1.0, ws.back, ws.acts[l]);
        kernels::axpy(g.hidden_bias[l].data(), 1.0, ws.back.data(), out.size());
        upstream.swap(ws.back);
        above = &layers[l].weights();
    }
    return loss;
}

double squared_weight_sum(const DbnClassifier& model) {
    double s = 0.0;
    for (const auto& layer : model.rbm_layers()) {
        const auto& w = layer.weights().data();
        s += kernels::dot(w.data(), w.data(), w.size());
    }
    const auto& u = model.label_weights().data();
    return s + kernels::dot(u.data(), u.data(), u.size());
}

}  // namespace

Architecture::Architecture(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2 || sizes_.size() > 5)
        throw InvalidInput("architecture: need input, 0-3 hidden layers and output (got " +
                           std::to_string(sizes_.size()) + " sizes)");
    for (std::size_t s : sizes_)
        if (s == 0) throw InvalidInput("architecture: layer sizes must be positive");
}

Architecture Architecture::parse(const std::string& text) {
    std::vector<std::size_t> sizes;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, '-')) {
        std::size_t used = 0;
        long long value = 0;
        try {
            value = std::stoll(part, &used);
        } catch (const std::exception&) {
            throw InvalidInput("architecture: cannot parse '" + text + "'");
        }
        if (used != part.size() || value <= 0) throw InvalidInput("architecture: cannot parse '" + text + "'");
        sizes.push_back(static_cast<std::size_t>(value));
    }
    return Architecture(std::move(sizes));
}

std::string Architecture::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
        if (i) out += '-';
        out += std::to_string(sizes_[i]);
    }
    return out;
}

DbnClassifier::DbnClassifier(std::vector<RbmLayer> rbm_layers, Matrix label_weights, Vector label_bias)
    : rbm_layers_(std::move(rbm_layers)), label_weights_(std::move(label_weights)), label_bias_(std::move(label_bias)) {
    for (std::size_t l = 1; l < rbm_layers_.size(); ++l)
        if (rbm_layers_[l].n_visible() != rbm_layers_[l - 1].n_hidden())
            throw InvalidInput("dbn: layer " + std::to_string(l) + " does not chain with the layer below");
    if (rbm_layers_.size() > 3) throw InvalidInput("dbn: at most 3 hidden layers");
    if (label_weights_.rows() != label_bias_.size() || label_bias_.empty())
        throw InvalidInput("dbn: label weights/bias shape mismatch");
    if (!rbm_layers_.empty() && label_weights_.cols() != rbm_layers_.back().n_hidden())
        throw InvalidInput("dbn: label layer does not chain with top hidden layer");
    if (label_weights_.cols() == 0) throw InvalidInput("dbn: empty input layer");
    if (!is_finite()) throw InvalidInput("dbn: non-finite parameter");
}

Architecture DbnClassifier::architecture() const {
    std::vector<std::size_t> sizes{input_size()};
    for (const auto& layer : rbm_layers_) sizes.push_back(layer.n_hidden());
    sizes.push_back(n_classes());
    return Architecture(std::move(sizes));
}

std::size_t DbnClassifier::input_size() const {
    return rbm_layers_.empty() ? label_weights_.cols() : rbm_layers_.front().n_visible();
}

std::size_t DbnClassifier::parameter_count() const {
    std::size_t n = label_weights_.size() + label_bias_.size();
    for (const auto& layer : rbm_layers_) n += layer.weights().size() + layer.n_hidden() + layer.n_visible();
    return n;
}

bool DbnClassifier::is_finite() const {
    for (const auto& layer : rbm_layers_)
        if (!layer.is_finite()) return false;
    return all_finite(label_weights_.data()) && all_finite(label_bias_);
}

DbnClassifier init_random(const Architecture& arch, double scale, std::uint64_t seed) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidInput("init_random: scale must be positive");
    const auto& sizes = arch.layer_sizes();
    if (sizes.size() < 2) throw InvalidInput("init_random: invalid architecture");
    Rng rng(seed);
    std::vector<RbmLayer> layers;
    for (std::size_t l = 0; l + 2 < sizes.size(); ++l)
        layers.push_back(RbmLayer::random(sizes[l], sizes[l + 1], scale, rng));
    Matrix label_weights(sizes.back(), sizes[sizes.size() - 2]);
    for (double& w : label_weights.data()) w = rng.normal(0.0, scale);
    return DbnClassifier(std::move(layers), std::move(label_weights), Vector(sizes.back(), 0.0));
}

DbnClassifier pretrain_greedy(DbnClassifier model, std::span<const Vector> data, int epochs_per_layer,
                              const CdConfig& cfg) {
    if (model.rbm_layers().empty())
        throw Unsupported("pretrain_greedy: model has no hidden layers, nothing to pre-train");
    if (epochs_per_layer < 0) throw InvalidInput("pretrain_greedy: negative epoch count");
    cfg.validate();
    for (const Vector& v : data)
        if (v.size() != model.input_size()) throw InvalidInput("pretrain_greedy: data length mismatch");
    if (epochs_per_layer == 0) return model;
    if (data.empty()) throw InvalidInput("pretrain_greedy: empty data");

    std::vector<Vector> current(data.begin(), data.end());
    auto& layers = model.mutable_rbm_layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        CdConfig layer_cfg = cfg;
        layer_cfg.seed = derive_seed(cfg.seed, l);
        train_cd(layers[l], current, epochs_per_layer, layer_cfg);
        if (l + 1 == layers.size()) break;
        std::vector<Vector> next;
        next.reserve(current.size());
        for (const Vector& v : current) {
            Vector h(layers[l].n_hidden());
            logistic_layer(layers[l], v, h);
            next.push_back(std::move(h));
        }
        current = std::move(next);
    }
    return model;
}

std::vector<Vector> hidden_activations(const DbnClassifier& model, std::span<const double> v) {
    check_input(model, v, "hidden_activations");
    Workspace ws(model);
    ws.acts[0].assign(v.begin(), v.end());
    const auto& layers = model.rbm_layers();
    for (std::size_t l = 0; l < layers.size(); ++l) logistic_layer(layers[l], ws.acts[l], ws.acts[l + 1]);
    return ws.acts;
}

Vector forward(const DbnClassifier& model, std::span<const double> v) {
    check_input(model, v, "forward");
    Workspace ws(model);
    ws.acts[0].assign(v.begin(), v.end());
    forward_pass(model, ws);
    Vector p(model.n_classes());
    for (std::size_t c = 0; c < p.size(); ++c) p[c] = std::exp(ws.logp[c]);
    return p;
}

int predict(const DbnClassifier& model, std::span<const double> v) { return argmax(forward(model, v)); }

std::string to_string(FinetuneMode mode) {
    return mode == FinetuneMode::full_network ? "full_network" : "top_layer_only";
}

FinetuneMode parse_finetune_mode(const std::string& text) {
    if (text == "full_network" || text == "full") return FinetuneMode::full_network;
    if (text == "top_layer_only" || text == "top") return FinetuneMode::top_layer_only;
    throw InvalidInput("unknown fine-tune mode '" + text + "'");
}

void FinetuneConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw InvalidInput("finetune config: learning_rate must be positive");
    if (epochs < 0) throw InvalidInput("finetune config: epochs must be >= 0");
    if (batch_size < 1) throw InvalidInput("finetune config: batch_size must be positive");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
        throw InvalidInput("finetune config: weight_decay must be >= 0");
}

LossAndGradient loss_and_gradient(const DbnClassifier& model, std::span<const LabeledVector> data,
                                  double weight_decay) {
    check_labeled(model, data, "loss_and_gradient");
    LossAndGradient out{0.0, zero_gradient(model)};
    Workspace ws(model);
    for (const auto& s : data) {
        ws.acts[0] = s.values;
        forward_pass(model, ws);
        out.loss += backward_pass(model, ws, s.label, false, out.gradient);
    }
    const double inv = 1.0 / static_cast<double>(data.size());
    out.loss *= inv;
    auto scale = [&](std::vector<double>& g) {
        for (double& x : g) x *= inv;
    };
    for (auto& w : out.gradient.weights) scale(w.data());
    for (auto& b : out.gradient.hidden_bias) scale(b);
    scale(out.gradient.label_weights.data());
    scale(out.gradient.label_bias);

    if (weight_decay != 0.0) {
        out.loss += 0.5 * weight_decay * squared_weight_sum(model);
        const auto& layers = model.rbm_layers();
        for (std::size_t l = 0; l < layers.size(); ++l) {
            auto& g = out.gradient.weights[l].data();
            kernels::axpy(g.data(), weight_decay, layers[l].weights().data().data(), g.size());
        }
        auto& gu = out.gradient.label_weights.data();
        kernels::axpy(gu.data(), weight_decay, model.label_weights().data().data(), gu.size());
    }
    return out;
}

double cross_entropy(const DbnClassifier& model, std::span<const LabeledVector> data) {
    check_labeled(model, data, "cross_entropy");
    Workspace ws(model);
    double total = 0.0;
    for (const auto& s : data) {
        ws.acts[0] = s.values;
        forward_pass(model, ws);
        total -= ws.logp[static_cast<std::size_t>(s.label)];
    }
    return total / static_cast<double>(data.size());
}

FinetuneResult finetune(DbnClassifier model, std::span<const LabeledVector> data, const FinetuneConfig& cfg,
                        const EpochCallback& on_epoch) {
    cfg.validate();
    FinetuneResult result;
    if (cfg.epochs == 0) {
        result.model = std::move(model);
        return result;
    }
    check_labeled(model, data, "finetune");

    const bool top_only = cfg.mode == FinetuneMode::top_layer_only;
    const std::size_t n_layers = model.rbm_layers().size();

    // The frozen stack makes top-layer inputs constant; compute them once.
    std::vector<Vector> top_inputs;
    if (top_only && n_layers > 0) {
        top_inputs.reserve(data.size());
        for (const auto& s : data) top_inputs.push_back(hidden_activations(model, s.values).back());
    }

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    Workspace ws(model);
    DbnGradient grad = zero_gradient(model);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t end = std::min(order.size(), start + bs);
            for (auto& w : grad.weights) std::fill(w.data().begin(), w.data().end(), 0.0);
            for (auto& b : grad.hidden_bias) std::fill(b.begin(), b.end(), 0.0);
            std::fill(grad.label_weights.data().begin(), grad.label_weights.data().end(), 0.0);
            std::fill(grad.label_bias.begin(), grad.label_bias.end(), 0.0);

            for (std::size_t i = start; i < end; ++i) {
                const auto& s = data[order[i]];
                if (top_only && n_layers > 0) {
                    ws.acts.back() = top_inputs[order[i]];
                    affine(model.label_weights(), ws.acts.back(), model.label_bias(), ws.logits);
                    log_softmax(ws.logits, ws.logp);
                } else {
                    ws.acts[0] = s.values;
                    forward_pass(model, ws);
                }
                backward_pass(model, ws, s.label, top_only, grad);
            }

            const double step = cfg.learning_rate / static_cast<double>(end - start);
            const double shrink = 1.0 - cfg.learning_rate * cfg.weight_decay;
            auto& u = model.mutable_label_weights().data();
            kernels::scale_add(u.data(), shrink, -step, grad.label_weights.data().data(), u.size());
            kernels::axpy(model.mutable_label_bias().data(), -step, grad.label_bias.data(), model.n_classes());
            if (!top_only) {
                auto& layers = model.mutable_rbm_layers();
                for (std::size_t l = 0; l < n_layers; ++l) {
                    auto& w = layers[l].mutable_weights().data();
                    kernels::scale_add(w.data(), shrink, -step, grad.weights[l].data().data(), w.size());
                    kernels::axpy(layers[l].mutable_hidden_bias().data(), -step, grad.hidden_bias[l].data(),
                                  layers[l].n_hidden());
                }
            }
        }
        if (!model.is_finite()) throw NumericOverflow("finetune: parameters became non-finite");

        EpochStats stats{epoch, 0.0, 0.0};
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (top_only && n_layers > 0) {
                ws.acts.back() = top_inputs[i];
                affine(model.label_weights(), ws.acts.back(), model.label_bias(), ws.logits);
                log_softmax(ws.logits, ws.logp);
            } else {
                ws.acts[0] = data[i].values;
                forward_pass(model, ws);
            }
            stats.train_loss -= ws.logp[static_cast<std::size_t>(data[i].label)];
            if (argmax(ws.logp) != data[i].label) ++wrong;
        }
        stats.train_loss /= static_cast<double>(data.size());
        stats.train_error = static_cast<double>(wrong) / static_cast<double>(data.size());
        result.trace.push_back(stats);
        if (on_epoch) on_epoch(stats, model);
    }
    result.model = std::move(model);
    return result;
}

double error_rate(const DbnClassifier& model, std::span<const LabeledVector> data) {
    check_labeled(model, data, "error_rate");
    std::size_t wrong = 0;
    for (const auto& s : data)
        if (predict(model, s.values) != s.label) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(data.size());
}

std::vector<std::uint8_t> serialize(const DbnClassifier& model) {
    io::ByteWriter out;
    out.put_bytes("DBNM");
    out.put_u32(kModelFormatVersion);
    const auto sizes = model.architecture().layer_sizes();
    out.put_u32(static_cast<std::uint32_t>(sizes.size()));
    for (std::size_t s : sizes) out.put_u32(static_cast<std::uint32_t>(s));
    for (const auto& layer : model.rbm_layers()) {
        for (double x : layer.weights().data()) out.put_f64(x);
        for (double x : layer.hidden_bias()) out.put_f64(x);
        for (double x : layer.visible_bias()) out.put_f64(x);
    }
    for (double x : model.label_weights().data()) out.put_f64(x);
    for (double x : model.label_bias()) out.put_f64(x);
    return std::move(out.bytes());
}

DbnClassifier deserialize(std::span<const std::uint8_t> bytes) {
    io::ByteReader in(bytes);
    in.expect_magic("DBNM");
    const std::size_t version_pos = in.position();
    const std::uint32_t version = in.get_u32();
    if (version != kModelFormatVersion)
        throw FormatError("unsupported model format version " + std::to_string(version), version_pos);
    const std::size_t count_pos = in.position();
    const std::uint32_t n_sizes = in.get_u32();
    if (n_sizes < 2 || n_sizes > 5) throw FormatError("bad layer count " + std::to_string(n_sizes), count_pos);
    std::vector<std::size_t> sizes;
    for (std::uint32_t i = 0; i < n_sizes; ++i) {
        const std::size_t pos = in.position();
        const std::uint32_t s = in.get_u32();
        if (s == 0) throw FormatError("zero layer size", pos);
        sizes.push_back(s);
    }
    std::vector<RbmLayer> layers;
    try {
        for (std::size_t l = 0; l + 2 < sizes.size(); ++l) {
            Matrix w(sizes[l + 1], sizes[l]);
            for (double& x : w.data()) x = in.get_f64();
            Vector hb(sizes[l + 1]), vb(sizes[l]);
            for (double& x : hb) x = in.get_f64();
            for (double& x : vb) x = in.get_f64();
            layers.emplace_back(std::move(w), std::move(vb), std::move(hb));
        }
        Matrix u(sizes.back(), sizes[sizes.size() - 2]);
        for (double& x : u.data()) x = in.get_f64();
        Vector d(sizes.back());
        for (double& x : d) x = in.get_f64();
        if (!in.at_end()) throw FormatError("trailing bytes after model", in.position());
        return DbnClassifier(std::move(layers), std::move(u), std::move(d));
    } catch (const InvalidInput& e) {
        throw FormatError(std::string("invalid model: ") + e.what(), in.position());
    }
}

void save_model(const DbnClassifier& model, const std::string& path) {
    io::write_file_atomic(path, serialize(model));
}

DbnClassifier load_model(const std::string& path) { return deserialize(io::read_file(path)); }

}  // namespace dbnkit
