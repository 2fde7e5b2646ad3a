#pragma once

#include "fedlora/common.hpp"
#include "fedlora/frame.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace fedlora {

enum class Activation : std::uint8_t { Relu, Tanh, Sigmoid, Linear };

std::string_view activation_name(Activation a) noexcept;
std::optional<Activation> parse_activation(std::string_view text) noexcept;

double activate(Activation a, double x) noexcept;
/// Derivative expressed through the activation's output value.
double activate_grad_from_output(Activation a, double y) noexcept;

/// Flat parameter vector; canonical order is, per layer, the weight matrix
/// row-major (rows = fan_out) followed by the bias.
using WeightVector = std::vector<double>;

struct LayerShape {
    std::size_t rows = 0;    // fan_out
    std::size_t cols = 0;    // fan_in
    std::size_t offset = 0;  // into the flat parameter vector

    std::size_t param_count() const noexcept { return rows * cols + rows; }
    bool operator==(const LayerShape&) const = default;
};

/// Per-thread buffers for forward/backward passes.
struct Scratch {
    std::vector<std::vector<double>> act;
    std::vector<std::vector<double>> delta;
};

/// Fully connected stack. Every layer but the last applies `hidden`; the
/// last layer is linear.
class Network {
public:
    Network() = default;
    Network(std::vector<std::size_t> dims, Activation hidden);

    const std::vector<std::size_t>& dims() const noexcept { return dims_; }
    const std::vector<LayerShape>& layers() const noexcept { return layers_; }
    Activation hidden_activation() const noexcept { return hidden_; }
    std::size_t input_dim() const noexcept { return dims_.front(); }
    std::size_t output_dim() const noexcept { return dims_.back(); }
    std::size_t param_count() const noexcept { return params_.size(); }

    std::span<const double> params() const noexcept { return params_; }
    std::span<double> params() noexcept { return params_; }

    Scratch make_scratch() const;

    /// One instance; `out` must hold output_dim() values.
    void forward(std::span<const double> in, std::span<double> out, Scratch& s) const;

    /// Adds d(loss)/d(params) for one instance into `grad`, where the loss
    /// contribution is `scale`·Σ(out - target)². Returns Σ(out - target)².
    double accumulate_gradient(std::span<const double> in, std::span<const double> target, double scale,
                               std::span<double> grad, Scratch& s) const;

    bool operator==(const Network&) const = default;

private:
    std::vector<std::size_t> dims_;
    std::vector<LayerShape> layers_;
    std::vector<double> params_;
    Activation hidden_ = Activation::Tanh;
};

struct ArchSpec {
    std::size_t input_dim = kFeatureCount;
    std::vector<std::size_t> hidden_sizes{32};
    Activation activation = Activation::Tanh;

    void validate() const;
    /// input, encoder hidden sizes, mirrored decoder hidden sizes, output.
    std::vector<std::size_t> layer_dims() const;
    bool operator==(const ArchSpec&) const = default;
};

std::size_t param_count(const ArchSpec& arch);

struct AutoencoderModel {
    ArchSpec arch;
    Network net;
    std::uint64_t seed = 0;

    std::size_t param_count() const noexcept { return net.param_count(); }
};

/// Weights uniform in ±sqrt(6 / (fan_in + fan_out)), zero biases.
AutoencoderModel build_autoencoder(const ArchSpec& arch, std::uint64_t seed);

/// Raw float32 payload size, excluding the container header.
std::size_t serialized_param_bytes(const AutoencoderModel& model) noexcept;
std::size_t serialized_param_bytes(const ArchSpec& arch);

double mse(std::span<const double> y, std::span<const double> y_hat);

std::vector<FeatureRow> forward(const AutoencoderModel& model, std::span<const FeatureRow> batch);

WeightVector get_weights(const AutoencoderModel& model);
void set_weights(AutoencoderModel& model, std::span<const double> weights);

struct TrainConfig {
    std::size_t epochs = 80;
    std::size_t batch_size = 16;
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t shuffle_seed = 1;

    void validate() const;
};

/// Adam moments plus counters. Carrying one across calls makes a run split
/// into chunks identical to an uninterrupted run.
struct OptimizerState {
    std::vector<double> m, v;
    std::uint64_t step = 0;
    std::uint64_t epochs_done = 0;
};

/// Trains for `epochs` more epochs from `state`. Epoch e (counted over the
/// whole life of `state`) visits the data in an order drawn from
/// (cfg.shuffle_seed, e). Returns the mean training loss of each epoch.
std::vector<double> train_epochs(AutoencoderModel& model, const FeatureFrame& frame, const TrainConfig& cfg,
                                 OptimizerState& state, std::size_t epochs);

std::vector<double> train_epochs(Network& net, std::span<const FeatureRow> rows, const TrainConfig& cfg,
                                 OptimizerState& state, std::size_t epochs);

struct TrainResult {
    std::vector<double> loss_trace;
    OptimizerState state;
};

TrainResult train(AutoencoderModel& model, const FeatureFrame& frame, const TrainConfig& cfg);

/// Mean-squared reconstruction loss over `inputs` (targets = `targets`) and
/// its exact gradient. Used for gradient checks.
double loss_and_gradient(const Network& net, std::span<const std::vector<double>> inputs,
                         std::span<const std::vector<double>> targets, std::vector<double>& grad);

// ------------------------------------------------------------ serialization

inline constexpr std::uint8_t kContainerVersion = 0x01;

/// "AEFL", version, layer count (u8), per layer rows/cols (u16 LE), then all
/// parameters as little-endian float32 in canonical order.
std::vector<std::uint8_t> serialize(const Network& net);
std::vector<std::uint8_t> serialize(const AutoencoderModel& model);

/// The container does not store the activation; callers supply it.
Network deserialize_network(std::span<const std::uint8_t> bytes, Activation hidden = Activation::Tanh);
AutoencoderModel deserialize(std::span<const std::uint8_t> bytes, Activation hidden = Activation::Tanh);

std::size_t container_header_bytes(std::size_t layer_count) noexcept;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept;

}  // namespace fedlora
