#include "fedlora/anomaly.hpp"
#include "fedlora/kernels.hpp"
#include "fedlora/metrics.hpp"
#include "fedlora/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace fedlora {

std::vector<double> reconstruction_errors(const AutoencoderModel& model, const FeatureFrame& frame) {
    std::vector<double> out(frame.size());
    kernels::reconstruction_errors(model.net, frame.rows, out);
    return out;
}

double initial_threshold(std::span<const double> scores) {
    if (scores.empty()) throw Error("initial_threshold: empty scores");
    return stats::percentile(scores, kInitialPercentile);
}

double initial_threshold(const AutoencoderModel& model, const FeatureFrame& frame, ScoreMode mode) {
    if (mode == ScoreMode::InstanceMean) return initial_threshold(reconstruction_errors(model, frame));
    std::vector<double> pooled(frame.size() * kFeatureCount);
    kernels::squared_deviations(model.net, frame.rows, pooled);
    return initial_threshold(pooled);
}

std::vector<double> default_percentile_grid() {
    std::vector<double> grid;
    grid.reserve(500);
    for (int permille = 500; permille <= 999; ++permille) grid.push_back(permille / 10.0);
    return grid;
}

Flags classify(std::span<const double> scores, double threshold) {
    Flags out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] > threshold ? 1 : 0;
    return out;
}

double f1_at(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold) {
    const auto predictions = classify(scores, threshold);
    return f1(confusion(labels, predictions)).value;
}

namespace {

void check_inputs(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.empty()) throw Error("select_threshold: empty inputs");
    if (scores.size() != labels.size()) throw Error("select_threshold: length mismatch");
    for (double s : scores) {
        if (!std::isfinite(s)) throw Error("select_threshold: non-finite score");
    }
}

}  // namespace

ThresholdResult select_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                 std::span<const double> percentiles) {
    check_inputs(scores, labels);
    if (percentiles.empty()) throw Error("select_threshold: empty percentile grid");

    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> sorted(n);
    // normals_below[k] = normal instances among the k lowest scores.
    std::vector<std::uint64_t> normals_below(n + 1, 0);
    for (std::size_t k = 0; k < n; ++k) {
        sorted[k] = scores[order[k]];
        normals_below[k + 1] = normals_below[k] + (labels[order[k]] == 0 ? 1 : 0);
    }
    const std::uint64_t normals = normals_below[n];
    const std::uint64_t anomalies = n - normals;

    if (anomalies == 0) {
        return {std::nextafter(sorted.back(), std::numeric_limits<double>::infinity()), 100.0, 100.0, true};
    }
    if (normals == 0) {
        return {std::max(0.0, std::nextafter(sorted.front(), -std::numeric_limits<double>::infinity())), 0.0, 0.0,
                true};
    }

    ThresholdResult best{0.0, -1.0, 0.0, false};
    for (double p : percentiles) {
        const double thr = stats::quantile_sorted(sorted, p / 100.0);
        // Predicted normal: score <= thr.
        const auto k = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), thr) - sorted.begin());
        ConfusionMatrix cm;
        cm.tp = normals_below[k];
        cm.fp = k - cm.tp;
        cm.fn = normals - cm.tp;
        cm.tn = anomalies - cm.fp;
        const double score = f1(cm).value;
        if (score > best.f1 || (score == best.f1 && p < best.percentile)) best = {thr, score, p, false};
    }
    best.threshold = std::max(0.0, best.threshold);
    return best;
}

ThresholdResult select_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    const auto grid = default_percentile_grid();
    return select_threshold(scores, labels, grid);
}

// ---------------------------------------------------------------- grids

GridSpec::GridSpec() {
    for (int c = 1; c <= 20; ++c) contamination.push_back(c / 100.0);
    for (int m = 10; m <= 50; m += 5) max_samples.push_back(m / 100.0);
}

AeGridResult grid_search_autoencoder(const FeatureFrame& train, const FeatureFrame& val, const GridSpec& grid,
                                     const TrainConfig& base, std::uint64_t seed) {
    if (grid.hidden.empty() || grid.epochs.empty() || grid.batch.empty() || grid.activations.empty()) {
        throw Error("grid_search_autoencoder: empty grid axis");
    }
    if (val.empty()) throw Error("grid_search_autoencoder: empty validation set");
    AeGridResult result;
    for (auto h : grid.hidden)
        for (auto e : grid.epochs)
            for (auto b : grid.batch)
                for (auto a : grid.activations) {
                    AeGridPoint point;
                    point.arch.hidden_sizes = {h};
                    point.arch.activation = a;
                    point.train = base;
                    point.train.epochs = e;
                    point.train.batch_size = b;
                    point.train.shuffle_seed = seed;
                    result.table.push_back(point);
                }

    const auto count = static_cast<std::ptrdiff_t>(result.table.size());
    const bool parallel = kernels::parallel_enabled();
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        auto& point = result.table[static_cast<std::size_t>(i)];
        AutoencoderModel model = build_autoencoder(point.arch, seed);
        fedlora::train(model, train, point.train);
        std::vector<double> errors(val.size());
        kernels::serial::reconstruction_errors(model.net, val.rows, errors);
        point.score = -stats::mean(errors);
    }

    for (std::size_t i = 1; i < result.table.size(); ++i) {
        if (result.table[i].score > result.table[result.best].score) result.best = i;
    }
    return result;
}

IfGridResult grid_search_iforest(const FeatureFrame& train, const FeatureFrame& val, const GridSpec& grid,
                                 std::size_t n_trees, std::uint64_t seed) {
    if (grid.contamination.empty() || grid.max_samples.empty()) throw Error("grid_search_iforest: empty grid axis");
    const Flags& labels = val.require_labels("grid_search_iforest");

    IfGridResult result;
    for (double ms : grid.max_samples) {
        const IForest forest = fit_iforest(train, n_trees, ms, seed);
        const auto scores = iforest_scores(forest, val);
        for (double c : grid.contamination) {
            const double cut = contamination_threshold(forest, c);
            Flags predictions(scores.size());
            for (std::size_t i = 0; i < scores.size(); ++i) predictions[i] = scores[i] >= cut ? 1 : 0;
            result.table.push_back({c, ms, f1(confusion(labels, predictions)).value});
        }
    }
    for (std::size_t i = 1; i < result.table.size(); ++i) {
        if (result.table[i].f1 > result.table[result.best].f1) result.best = i;
    }
    return result;
}

void write_grid_csv(std::ostream& out, const AeGridResult& result) {
    out << "hidden,epochs,batch,activation,val_score,best\n";
    for (std::size_t i = 0; i < result.table.size(); ++i) {
        const auto& p = result.table[i];
        out << p.arch.hidden_sizes.front() << ',' << p.train.epochs << ',' << p.train.batch_size << ','
            << activation_name(p.arch.activation) << ',' << p.score << ',' << (i == result.best ? 1 : 0) << '\n';
    }
}

void write_grid_csv(std::ostream& out, const IfGridResult& result) {
    out << "contamination,max_samples,val_f1,best\n";
    for (std::size_t i = 0; i < result.table.size(); ++i) {
        const auto& p = result.table[i];
        out << p.contamination << ',' << p.max_samples << ',' << p.f1 << ',' << (i == result.best ? 1 : 0) << '\n';
    }
}

}  // namespace fedlora
