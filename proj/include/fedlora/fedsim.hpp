#pragma once

#include "fedlora/anomaly.hpp"
#include "fedlora/autonet.hpp"
#include "fedlora/metrics.hpp"
#include "fedlora/preprocess.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fedlora {

struct ClientUpdate {
    std::size_t client_id = 0;
    WeightVector weights;
    std::size_t samples = 0;
};

/// Sample-weighted mean Σ nᵢ·wᵢ / Σ nᵢ. Updates are summed in ascending
/// client-id order; with equal counts this is the plain arithmetic mean.
/// The result is clamped to the elementwise envelope of the inputs.
WeightVector fedavg(std::span<const ClientUpdate> updates);

/// One virtual client: a machine's local partitions and its training state.
struct ClientState {
    std::size_t id = 0;
    Machine machine = Machine::Manitou;
    FeatureFrame train, val, test;
    AutoencoderModel model;
    OptimizerState optimizer;
    std::uint64_t stream_seed = 0;
    double threshold = kReferenceThreshold;

    std::size_t samples() const noexcept { return train.size(); }
};

struct GlobalModel {
    WeightVector weights;
    std::size_t round = 0;
    /// MSE of the global model on the pooled client training data; entry 0
    /// is the initial model, entry t the model after round t.
    std::vector<double> loss_history;
};

struct FLSchedule {
    std::size_t epochs_per_round = 1;
    std::size_t rounds = 80;

    std::size_t budget() const noexcept { return epochs_per_round * rounds; }
    void validate(std::optional<std::size_t> budget = std::nullopt) const;
    std::string label() const;  // "E/R"
    bool operator==(const FLSchedule&) const = default;
};

inline constexpr std::size_t kEpochBudget = 80;

/// 1/80, 2/40, 4/20, 5/16, 8/10, 10/8, 16/5, 20/4, 40/2, 80/1.
std::vector<FLSchedule> paper_schedules();

struct FedConfig {
    ArchSpec arch;
    TrainConfig train;  // epochs field unused; schedule decides
    std::uint64_t seed = 1;
    bool parallel_clients = true;
};

/// One client per machine present in `split.train`, numbered in machine order.
std::vector<ClientState> make_clients(const Split& split, const FedConfig& cfg);

struct RoundRecord {
    std::size_t round = 0;  // 1-based
    std::size_t client = 0;
    Machine machine = Machine::Manitou;
    std::size_t epochs = 0;
    double mean_loss = 0.0;
    std::uint64_t checksum = 0;  // FNV-1a of the serialized global after aggregation
};

struct RoundOutcome {
    std::vector<std::vector<double>> client_losses;  // [client][epoch]
};

/// Distributes θ_t, trains every client `epochs` epochs, aggregates with
/// fedavg and advances the round counter.
RoundOutcome run_round(GlobalModel& global, std::vector<ClientState>& clients, std::size_t epochs,
                       const FedConfig& cfg);

struct ScheduleResult {
    GlobalModel global;
    std::vector<RoundRecord> history;

    double initial_loss() const { return global.loss_history.front(); }
    double final_loss() const { return global.loss_history.back(); }
};

/// θ0 = build_autoencoder(cfg.arch, cfg.seed); R rounds of E epochs.
ScheduleResult run_schedule(const FLSchedule& schedule, std::vector<ClientState>& clients, const FedConfig& cfg);

AutoencoderModel materialize(const GlobalModel& global, const ArchSpec& arch);

/// MSE of `model` on the union of the clients' training partitions.
double pooled_training_loss(const AutoencoderModel& model, std::span<const ClientState> clients);

struct ClientThreshold {
    std::size_t client = 0;
    Machine machine = Machine::Manitou;
    std::optional<ThresholdResult> result;  // empty when the client was skipped
    double reference = kReferenceThreshold;
    std::string warning;
};

/// Per-client F1 sweep on local validation errors under the global model.
/// Updates each tuned client's `threshold`.
std::vector<ClientThreshold> tune_client_thresholds(const AutoencoderModel& global, std::vector<ClientState>& clients);

/// Threshold swept on the pooled validation errors of all clients.
ThresholdResult select_global_threshold(const AutoencoderModel& global, std::span<const ClientState> clients);

ConfusionMatrix evaluate_global(const AutoencoderModel& global, const FeatureFrame& test, double threshold);

/// Each client's test partition under `shared` if given, else the client's
/// own tuned threshold.
std::vector<ConfusionMatrix> evaluate_per_client(const AutoencoderModel& global, std::span<const ClientState> clients,
                                                 std::optional<double> shared = std::nullopt);

void write_round_history_csv(std::ostream& out, std::span<const RoundRecord> history);

}  // namespace fedlora
