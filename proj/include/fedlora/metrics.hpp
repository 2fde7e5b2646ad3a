#pragma once

#include "fedlora/common.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace fedlora {

/// Positive class = normal. TP: normal kept normal; TN: anomaly caught;
/// FP: anomaly missed; FN: false alarm on a normal instance.
struct ConfusionMatrix {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
    ConfusionMatrix& operator+=(const ConfusionMatrix& o) noexcept {
        tp += o.tp;
        fp += o.fp;
        tn += o.tn;
        fn += o.fn;
        return *this;
    }
    friend ConfusionMatrix operator+(ConfusionMatrix a, const ConfusionMatrix& b) noexcept { return a += b; }
    bool operator==(const ConfusionMatrix&) const = default;
};

/// `labels` and `predictions` use 1 = anomalous.
ConfusionMatrix confusion(std::span<const std::uint8_t> labels, std::span<const std::uint8_t> predictions);

/// A metric in percent. `degenerate` marks a zero denominator (value 0).
struct Metric {
    double value = 0.0;
    bool degenerate = false;
};

Metric accuracy(const ConfusionMatrix& cm) noexcept;
Metric precision(const ConfusionMatrix& cm) noexcept;
Metric tnr(const ConfusionMatrix& cm) noexcept;
Metric tpr(const ConfusionMatrix& cm) noexcept;
Metric f1(const ConfusionMatrix& cm) noexcept;

enum class MetricId : std::uint8_t { Acc = 0, Pre = 1, Tnr = 2, Tpr = 3, F1 = 4 };
inline constexpr std::size_t kMetricCount = 5;
inline constexpr std::array<MetricId, kMetricCount> kAllMetrics{MetricId::Acc, MetricId::Pre, MetricId::Tnr,
                                                                MetricId::Tpr, MetricId::F1};
std::string_view metric_name(MetricId id) noexcept;

struct Metrics {
    std::array<double, kMetricCount> values{};
    std::array<bool, kMetricCount> degenerate{};

    double operator[](MetricId id) const noexcept { return values[static_cast<std::size_t>(id)]; }
};

Metrics evaluate(const ConfusionMatrix& cm) noexcept;

struct RunStats {
    double min = 0, max = 0, mean = 0, std = 0, median = 0;
};

inline constexpr std::array<std::string_view, 5> kStatisticNames{"min", "max", "mean", "std", "median"};

struct MetricsSummary {
    std::array<RunStats, kMetricCount> per_metric{};
    std::size_t runs = 0;

    const RunStats& operator[](MetricId id) const noexcept { return per_metric[static_cast<std::size_t>(id)]; }
};

RunStats summarize(std::span<const double> values);

/// Min / max / mean / sample sd / median for each metric over the runs.
MetricsSummary summarize_runs(std::span<const Metrics> runs);

}  // namespace fedlora
