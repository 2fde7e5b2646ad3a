#include "fedlora/autonet.hpp"
#include "fedlora/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <string>

namespace fedlora {

std::string_view activation_name(Activation a) noexcept {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Linear: return "linear";
    }
    return "?";
}

std::optional<Activation> parse_activation(std::string_view text) noexcept {
    std::string key;
    for (char c : text) key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    for (auto a : {Activation::Relu, Activation::Tanh, Activation::Sigmoid, Activation::Linear}) {
        if (key == activation_name(a)) return a;
    }
    return std::nullopt;
}

double activate(Activation a, double x) noexcept {
    switch (a) {
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Tanh: return std::tanh(x);
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::Linear: return x;
    }
    return x;
}

double activate_grad_from_output(Activation a, double y) noexcept {
    switch (a) {
        case Activation::Relu: return y > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: return 1.0 - y * y;
        case Activation::Sigmoid: return y * (1.0 - y);
        case Activation::Linear: return 1.0;
    }
    return 1.0;
}

// ------------------------------------------------------------------ Network

Network::Network(std::vector<std::size_t> dims, Activation hidden) : dims_(std::move(dims)), hidden_(hidden) {
    if (dims_.size() < 2) throw Error("Network: need at least an input and an output dimension");
    for (auto d : dims_) {
        if (d == 0) throw Error("Network: zero-width layer");
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        LayerShape shape{dims_[l + 1], dims_[l], offset};
        offset += shape.param_count();
        layers_.push_back(shape);
    }
    params_.assign(offset, 0.0);
}

Scratch Network::make_scratch() const {
    Scratch s;
    s.act.resize(dims_.size());
    s.delta.resize(dims_.size());
    for (std::size_t l = 0; l < dims_.size(); ++l) {
        s.act[l].assign(dims_[l], 0.0);
        s.delta[l].assign(dims_[l], 0.0);
    }
    return s;
}

void Network::forward(std::span<const double> in, std::span<double> out, Scratch& s) const {
    if (in.size() != input_dim() || out.size() != output_dim()) throw Error("Network::forward: shape mismatch");
    std::copy(in.begin(), in.end(), s.act[0].begin());
    const double* p = params_.data();
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& shape = layers_[l];
        const double* w = p + shape.offset;
        const double* b = w + shape.rows * shape.cols;
        const double* x = s.act[l].data();
        double* y = s.act[l + 1].data();
        const Activation act = l + 1 == layers_.size() ? Activation::Linear : hidden_;
        for (std::size_t r = 0; r < shape.rows; ++r) {
            const double* wr = w + r * shape.cols;
            double z = b[r];
            for (std::size_t c = 0; c < shape.cols; ++c) z += wr[c] * x[c];
            y[r] = activate(act, z);
        }
    }
    std::copy(s.act.back().begin(), s.act.back().end(), out.begin());
}

double Network::accumulate_gradient(std::span<const double> in, std::span<const double> target, double scale,
                                    std::span<double> grad, Scratch& s) const {
    if (target.size() != output_dim() || grad.size() != params_.size()) {
        throw Error("Network::accumulate_gradient: shape mismatch");
    }
    const std::size_t last = dims_.size() - 1;
    forward(in, s.act[last], s);

    double sq = 0.0;
    for (std::size_t k = 0; k < output_dim(); ++k) {
        const double diff = s.act[last][k] - target[k];
        sq += diff * diff;
        s.delta[last][k] = 2.0 * scale * diff;  // linear output
    }

    const double* p = params_.data();
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& shape = layers_[l];
        const double* w = p + shape.offset;
        double* gw = grad.data() + shape.offset;
        double* gb = gw + shape.rows * shape.cols;
        const double* x = s.act[l].data();
        const double* d = s.delta[l + 1].data();
        for (std::size_t r = 0; r < shape.rows; ++r) {
            gb[r] += d[r];
            double* gwr = gw + r * shape.cols;
            for (std::size_t c = 0; c < shape.cols; ++c) gwr[c] += d[r] * x[c];
        }
        if (l == 0) break;
        double* dprev = s.delta[l].data();
        for (std::size_t c = 0; c < shape.cols; ++c) {
            double acc = 0.0;
            for (std::size_t r = 0; r < shape.rows; ++r) acc += w[r * shape.cols + c] * d[r];
            dprev[c] = acc * activate_grad_from_output(hidden_, x[c]);
        }
    }
    return sq;
}

// ------------------------------------------------------------- Autoencoder

void ArchSpec::validate() const {
    if (input_dim != kFeatureCount) throw Error("ArchSpec: input_dim must be 5");
    if (hidden_sizes.empty()) throw Error("ArchSpec: hidden_sizes must be non-empty");
    for (auto h : hidden_sizes) {
        if (h == 0) throw Error("ArchSpec: hidden sizes must be positive");
        if (h > 0xFFFF) throw Error("ArchSpec: hidden size exceeds container limit");
    }
    if (activation == Activation::Linear) throw Error("ArchSpec: hidden activation must be relu, tanh or sigmoid");
}

std::vector<std::size_t> ArchSpec::layer_dims() const {
    std::vector<std::size_t> dims{input_dim};
    dims.insert(dims.end(), hidden_sizes.begin(), hidden_sizes.end());
    dims.insert(dims.end(), hidden_sizes.rbegin() + 1, hidden_sizes.rend());
    dims.push_back(input_dim);
    return dims;
}

std::size_t param_count(const ArchSpec& arch) {
    arch.validate();
    const auto dims = arch.layer_dims();
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) total += dims[l] * dims[l + 1] + dims[l + 1];
    return total;
}

AutoencoderModel build_autoencoder(const ArchSpec& arch, std::uint64_t seed) {
    arch.validate();
    AutoencoderModel model{arch, Network(arch.layer_dims(), arch.activation), seed};
    Rng rng(seed);
    auto params = model.net.params();
    for (const auto& shape : model.net.layers()) {
        const double limit = std::sqrt(6.0 / static_cast<double>(shape.cols + shape.rows));
        for (std::size_t i = 0; i < shape.rows * shape.cols; ++i) params[shape.offset + i] = rng.uniform(-limit, limit);
    }
    return model;
}

std::size_t serialized_param_bytes(const AutoencoderModel& model) noexcept { return model.param_count() * 4; }
std::size_t serialized_param_bytes(const ArchSpec& arch) { return param_count(arch) * 4; }

double mse(std::span<const double> y, std::span<const double> y_hat) {
    if (y.size() != y_hat.size()) throw Error("mse: length mismatch");
    if (y.empty()) throw Error("mse: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) sum += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    return sum / static_cast<double>(y.size());
}

std::vector<FeatureRow> forward(const AutoencoderModel& model, std::span<const FeatureRow> batch) {
    std::vector<FeatureRow> out(batch.size());
    Scratch s = model.net.make_scratch();
    for (std::size_t i = 0; i < batch.size(); ++i) model.net.forward(batch[i], out[i], s);
    return out;
}

WeightVector get_weights(const AutoencoderModel& model) {
    const auto p = model.net.params();
    return {p.begin(), p.end()};
}

void set_weights(AutoencoderModel& model, std::span<const double> weights) {
    if (weights.size() != model.param_count()) {
        throw Error("set_weights: expected " + std::to_string(model.param_count()) + " values, got " +
                    std::to_string(weights.size()));
    }
    std::copy(weights.begin(), weights.end(), model.net.params().begin());
}

// ---------------------------------------------------------------- training

void TrainConfig::validate() const {
    if (batch_size == 0) throw Error("TrainConfig: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw Error("TrainConfig: learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw Error("TrainConfig: betas in [0, 1)");
    if (!(epsilon > 0.0)) throw Error("TrainConfig: epsilon must be positive");
}

std::vector<double> train_epochs(Network& net, std::span<const FeatureRow> rows, const TrainConfig& cfg,
                                 OptimizerState& state, std::size_t epochs) {
    cfg.validate();
    if (epochs == 0) return {};
    if (rows.empty()) throw Error("train: empty frame");
    if (net.input_dim() != kFeatureCount || net.output_dim() != kFeatureCount) {
        throw Error("train: network must map 5 features to 5 features");
    }

    const std::size_t n_params = net.param_count();
    if (state.m.size() != n_params) {
        state.m.assign(n_params, 0.0);
        state.v.assign(n_params, 0.0);
        state.step = 0;
    }
    std::vector<double> grad(n_params);
    std::vector<std::size_t> order(rows.size());
    Scratch scratch = net.make_scratch();
    std::vector<double> trace;
    trace.reserve(epochs);
    const auto params = net.params();

    for (std::size_t e = 0; e < epochs; ++e) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(cfg.shuffle_seed, {state.epochs_done}));
        rng.shuffle(std::span<std::size_t>(order));

        double epoch_sq = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const double scale = 1.0 / static_cast<double>((end - start) * kFeatureCount);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t i = start; i < end; ++i) {
                const auto& row = rows[order[i]];
                epoch_sq += net.accumulate_gradient(row, row, scale, grad, scratch);
            }
            ++state.step;
            const double t = static_cast<double>(state.step);
            const double bc1 = 1.0 - std::pow(cfg.beta1, t);
            const double bc2 = 1.0 - std::pow(cfg.beta2, t);
            for (std::size_t k = 0; k < n_params; ++k) {
                state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * grad[k];
                state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
                const double m_hat = state.m[k] / bc1;
                const double v_hat = state.v[k] / bc2;
                params[k] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
            }
        }
        trace.push_back(epoch_sq / static_cast<double>(rows.size() * kFeatureCount));
        ++state.epochs_done;
    }
    return trace;
}

std::vector<double> train_epochs(AutoencoderModel& model, const FeatureFrame& frame, const TrainConfig& cfg,
                                 OptimizerState& state, std::size_t epochs) {
    return train_epochs(model.net, frame.rows, cfg, state, epochs);
}

TrainResult train(AutoencoderModel& model, const FeatureFrame& frame, const TrainConfig& cfg) {
    TrainResult result;
    result.loss_trace = train_epochs(model, frame, cfg, result.state, cfg.epochs);
    return result;
}

double loss_and_gradient(const Network& net, std::span<const std::vector<double>> inputs,
                         std::span<const std::vector<double>> targets, std::vector<double>& grad) {
    if (inputs.size() != targets.size() || inputs.empty()) throw Error("loss_and_gradient: bad batch");
    grad.assign(net.param_count(), 0.0);
    Scratch s = net.make_scratch();
    const double scale = 1.0 / static_cast<double>(inputs.size() * net.output_dim());
    double sq = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) sq += net.accumulate_gradient(inputs[i], targets[i], scale, grad, s);
    return sq * scale;
}

}  // namespace fedlora
