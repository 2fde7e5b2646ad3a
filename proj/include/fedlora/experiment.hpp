#pragma once

#include "fedlora/anomaly.hpp"
#include "fedlora/datagen.hpp"
#include "fedlora/fedsim.hpp"
#include "fedlora/labeling.hpp"
#include "fedlora/lorawan.hpp"
#include "fedlora/metrics.hpp"
#include "fedlora/preprocess.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <span>
#include <optional>
#include <string>
#include <vector>

namespace fedlora {

inline constexpr std::string_view kVersion = "0.1.0";

enum class DataSource { Synthetic, Csv, Ttn };
enum class FlStandardization { Global, PerClient };

struct ExperimentConfig {
    struct Data {
        DataSource source = DataSource::Synthetic;
        std::filesystem::path path;
        GenConfig synthetic;
        double scale = 1.0;  // multiplies synthetic per-machine counts
    } data;

    struct Labeling {
        LabelMethod method = LabelMethod::Range;
        double iqr_k = 1.5;
        RangeSpec ranges = RangeSpec::defaults();
    } labeling;

    SplitSpec split;
    StandardizeScope standardize_scope = StandardizeScope::TrainOnly;

    struct Model {
        ArchSpec arch;
        TrainConfig train;
        ScoreMode score_mode = ScoreMode::InstanceMean;
    } model;

    struct IForestParams {
        std::size_t n_trees = kDefaultTrees;
        double contamination = kDefaultContamination;
        double max_samples = kDefaultMaxSamples;
    } iforest;

    struct Federated {
        FLSchedule schedule{1, 80};
        std::size_t budget = kEpochBudget;
        FlStandardization standardization = FlStandardization::Global;
    } federated;

    struct Sweep {
        bool enabled = true;
        std::vector<FLSchedule> schedules = paper_schedules();
        std::optional<std::size_t> runs;  // defaults to `runs`
    } sweep;

    struct Plan {
        lorawan::Convention convention = lorawan::Convention::PerRound;
        std::vector<int> sfs{7, 8, 9, 10, 11, 12};
        std::vector<std::size_t> rounds;  // default 1..80
        std::vector<std::size_t> hidden{16, 32, 64, 128};
        bool include_table_kb = true;
    } plan;

    std::size_t runs = 13;
    std::uint64_t seed = 2024;
    std::filesystem::path output_dir = "fedlora_out";
    bool deterministic = false;

    ExperimentConfig();

    /// Unknown keys are rejected.
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& path);
    nlohmann::ordered_json to_json() const;

    void validate() const;
    /// FNV-1a over the canonical JSON dump, output_dir excluded.
    std::uint64_t hash() const;
};

/// Labeled, split and standardized data shared by every stage.
struct PreparedData {
    std::array<std::size_t, kMachineCount> raw_counts{};
    std::size_t rejected_rows = 0;
    std::size_t removed_bad_timestamp = 0;
    std::size_t removed_invalid_feature = 0;
    FeatureFrame frame;  // native units, labeled
    LabelVector labels;
    std::optional<double> range_anomaly_fraction;  // absent when the range table lacks a machine
    std::optional<double> iqr_anomaly_fraction;    // absent when a machine has < 4 rows
    Split raw_split;
    Standardizer standardizer;
    Split split;         // standardized for centralized models and FL (global statistics)
    Split client_split;  // standardized per the FL standardization mode
};

PreparedData prepare_data(const ExperimentConfig& cfg);

struct ModelRuns {
    std::string model;
    std::vector<Metrics> runs;
    std::vector<double> thresholds;          // per run, empty for IF
    std::vector<double> initial_thresholds;  // per run, 84th percentile
    MetricsSummary summary;
};

struct ClientRuns {
    Machine machine = Machine::Manitou;
    std::vector<Metrics> runs;
    std::vector<double> thresholds;
    MetricsSummary summary;
};

struct CentralResult {
    ModelRuns autoencoder;
    ModelRuns iforest;
};

struct FederatedResult {
    ModelRuns global;
    std::vector<ClientRuns> clients;
    std::vector<RoundRecord> history;  // first run
    std::vector<double> loss_history;  // first run
};

struct SweepRow {
    FLSchedule schedule;
    std::size_t runs = 0;
    double f1 = 0, acc = 0, tpr = 0, tnr = 0;  // means over runs
    double initial_loss = 0, final_loss = 0;   // means over runs
    bool loss_decreased_every_run = true;
};

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ExperimentReport {
    nlohmann::ordered_json provenance;
    nlohmann::ordered_json data;
    std::optional<CentralResult> central;
    std::optional<FederatedResult> federated;
    std::vector<SweepRow> sweep;
    std::vector<lorawan::PlanRow> plan;
    std::vector<Check> checks;

    bool all_checks_passed() const;
    nlohmann::ordered_json to_json() const;
};

std::vector<std::uint64_t> run_seeds(const ExperimentConfig& cfg);

CentralResult run_central(const ExperimentConfig& cfg, const PreparedData& data);
FederatedResult run_federated(const ExperimentConfig& cfg, const PreparedData& data);
std::vector<SweepRow> sweep_schedules(const ExperimentConfig& cfg, const PreparedData& data);
std::vector<lorawan::PlanRow> plan_lorawan(const ExperimentConfig& cfg);

/// Checks computable from one run's outputs: size accounting, planner
/// figures, centralized/federated quality gaps and sweep completeness.
std::vector<Check> evaluate_checks(const ExperimentReport& report);

struct Stages {
    bool central = true;
    bool federated = true;
    bool sweep = true;
    bool plan = true;
};

/// Full pipeline. Sets the kernel parallelism switch from cfg.deterministic.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const Stages& stages = {});

/// Writes comparison.csv, per_client.csv, sweep.csv, lorawan_plan.csv,
/// round_history.csv and report.json for the sections present.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

void write_comparison_csv(std::ostream& out, const ExperimentReport& report);
void write_per_client_csv(std::ostream& out, const ExperimentReport& report);
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

}  // namespace fedlora
