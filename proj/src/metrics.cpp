#include "fedlora/metrics.hpp"
#include "fedlora/stats.hpp"

#include <algorithm>

namespace fedlora {

ConfusionMatrix confusion(std::span<const std::uint8_t> labels, std::span<const std::uint8_t> predictions) {
    if (labels.size() != predictions.size()) throw Error("confusion: length mismatch");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool anomaly = labels[i] != 0;
        const bool flagged = predictions[i] != 0;
        if (!anomaly && !flagged) ++cm.tp;
        else if (anomaly && flagged) ++cm.tn;
        else if (anomaly) ++cm.fp;
        else ++cm.fn;
    }
    return cm;
}

namespace {

Metric ratio(double num, double den) noexcept {
    if (den == 0.0) return {0.0, true};
    return {num / den * 100.0, false};
}

double d(std::uint64_t v) noexcept { return static_cast<double>(v); }

}  // namespace

Metric accuracy(const ConfusionMatrix& cm) noexcept { return ratio(d(cm.tp) + d(cm.tn), d(cm.total())); }
Metric precision(const ConfusionMatrix& cm) noexcept { return ratio(d(cm.tp), d(cm.tp) + d(cm.fp)); }
Metric tnr(const ConfusionMatrix& cm) noexcept { return ratio(d(cm.tn), d(cm.tn) + d(cm.fp)); }
Metric tpr(const ConfusionMatrix& cm) noexcept { return ratio(d(cm.tp), d(cm.tp) + d(cm.fn)); }
Metric f1(const ConfusionMatrix& cm) noexcept { return ratio(d(cm.tp), d(cm.tp) + 0.5 * (d(cm.fp) + d(cm.fn))); }

std::string_view metric_name(MetricId id) noexcept {
    switch (id) {
        case MetricId::Acc: return "Acc";
        case MetricId::Pre: return "Pre";
        case MetricId::Tnr: return "TNR";
        case MetricId::Tpr: return "TPR";
        case MetricId::F1: return "F1";
    }
    return "?";
}

Metrics evaluate(const ConfusionMatrix& cm) noexcept {
    const std::array<Metric, kMetricCount> all{accuracy(cm), precision(cm), tnr(cm), tpr(cm), f1(cm)};
    Metrics out;
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        out.values[k] = all[k].value;
        out.degenerate[k] = all[k].degenerate;
    }
    return out;
}

RunStats summarize(std::span<const double> values) {
    if (values.empty()) throw Error("summarize_runs: empty run list");
    RunStats s;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    s.mean = stats::mean(values);
    s.std = stats::sample_sd(values);
    s.median = stats::median(values);
    return s;
}

MetricsSummary summarize_runs(std::span<const Metrics> runs) {
    if (runs.empty()) throw Error("summarize_runs: empty run list");
    MetricsSummary out;
    out.runs = runs.size();
    std::vector<double> column(runs.size());
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        for (std::size_t r = 0; r < runs.size(); ++r) column[r] = runs[r].values[k];
        out.per_metric[k] = summarize(column);
    }
    return out;
}

}  // namespace fedlora
