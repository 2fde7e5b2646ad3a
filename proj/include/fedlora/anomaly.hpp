#pragma once

#include "fedlora/autonet.hpp"
#include "fedlora/frame.hpp"
#include "fedlora/iforest.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace fedlora {

inline constexpr double kInitialPercentile = 84.0;
/// Reference threshold carried into per-client tuning (squared-error units).
inline constexpr double kReferenceThreshold = 0.16225;

/// How the initial threshold population is formed: one mean squared
/// deviation per instance, or every per-feature squared deviation pooled.
enum class ScoreMode { InstanceMean, PooledColumns };

/// Mean over the five features of the squared reconstruction deviation.
std::vector<double> reconstruction_errors(const AutoencoderModel& model, const FeatureFrame& frame);

/// 84th percentile of `scores`, linear interpolation.
double initial_threshold(std::span<const double> scores);

double initial_threshold(const AutoencoderModel& model, const FeatureFrame& frame, ScoreMode mode);

struct ThresholdResult {
    double threshold = 0.0;
    double f1 = 0.0;          // percent
    double percentile = 0.0;  // where the sweep found it
    bool degenerate = false;  // validation labels held a single class
};

/// 50.0, 50.1, ..., 99.9.
std::vector<double> default_percentile_grid();

/// 1 = anomalous, iff score > threshold.
Flags classify(std::span<const double> scores, double threshold);

/// F1 (positive = normal) of classify(scores, threshold) against labels.
double f1_at(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold);

/// Sweeps thresholds at the given percentiles of `scores` and keeps the
/// F1-maximizing one; ties go to the lowest percentile.
ThresholdResult select_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                 std::span<const double> percentiles);
ThresholdResult select_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels);

// ------------------------------------------------------------- grid search

struct GridSpec {
    std::vector<std::size_t> hidden{16, 32, 64, 128};
    std::vector<std::size_t> epochs{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    std::vector<std::size_t> batch{16, 32, 64, 128};
    std::vector<Activation> activations{Activation::Relu, Activation::Tanh, Activation::Sigmoid};
    std::vector<double> contamination;  // 0.01 .. 0.20
    std::vector<double> max_samples;    // 0.10 .. 0.50

    GridSpec();
};

struct AeGridPoint {
    ArchSpec arch;
    TrainConfig train;
    double score = 0.0;  // -MSE on validation
};

struct AeGridResult {
    std::vector<AeGridPoint> table;  // axis order: hidden, epochs, batch, activation
    std::size_t best = 0;

    const AeGridPoint& best_point() const { return table.at(best); }
};

/// Every point is built and shuffled with `seed`; `base` supplies the
/// optimizer settings.
AeGridResult grid_search_autoencoder(const FeatureFrame& train, const FeatureFrame& val, const GridSpec& grid,
                                     const TrainConfig& base, std::uint64_t seed);

struct IfGridPoint {
    double contamination = 0.0;
    double max_samples = 0.0;
    double f1 = 0.0;
};

struct IfGridResult {
    std::vector<IfGridPoint> table;  // axis order: max_samples, contamination
    std::size_t best = 0;

    const IfGridPoint& best_point() const { return table.at(best); }
};

/// `val` must carry labels. Maximizes validation F1.
IfGridResult grid_search_iforest(const FeatureFrame& train, const FeatureFrame& val, const GridSpec& grid,
                                 std::size_t n_trees, std::uint64_t seed);

void write_grid_csv(std::ostream& out, const AeGridResult& result);
void write_grid_csv(std::ostream& out, const IfGridResult& result);

}  // namespace fedlora
