#include "fedlora/labeling.hpp"
#include "fedlora/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fedlora {

RangeSpec RangeSpec::defaults() {
    RangeSpec spec;
    for (auto m : kAllMachines) {
        const Range battery = m == Machine::Manitou ? Range{12.6, 13.6} : Range{24.0, 28.0};
        spec.set(m, Feature::Battery, battery);
        spec.set(m, Feature::Consumption, {1.0, 40.0});
        spec.set(m, Feature::Rpm, {800.0, 2200.0});
        spec.set(m, Feature::WaterTemp, {75.0, 100.0});
        spec.set(m, Feature::OilPressure, {1.0, 7.0});
    }
    return spec;
}

const Range& RangeSpec::require(Machine m, Feature f) const {
    const auto& r = at(m, f);
    if (!r) {
        throw Error("range spec has no entry for " + std::string(machine_name(m)) + "/" +
                    std::string(feature_name(f)));
    }
    return *r;
}

void RangeSpec::set(Machine m, Feature f, Range r) {
    if (!(r.lower < r.upper)) {
        throw Error("range for " + std::string(machine_name(m)) + "/" + std::string(feature_name(f)) +
                    " needs lower < upper");
    }
    table_[index_of(m)][index_of(f)] = r;
}

bool RangeSpec::complete() const noexcept {
    for (const auto& row : table_)
        for (const auto& r : row)
            if (!r) return false;
    return true;
}

std::size_t LabelVector::anomaly_count() const noexcept {
    return static_cast<std::size_t>(std::count(anomalous.begin(), anomalous.end(), std::uint8_t{1}));
}

double LabelVector::anomaly_fraction() const noexcept {
    return anomalous.empty() ? 0.0 : static_cast<double>(anomaly_count()) / static_cast<double>(anomalous.size());
}

std::pair<double, double> iqr_bounds(std::span<const double> values, double k) {
    if (values.size() < 4) throw Error("iqr_bounds: need at least 4 values");
    for (double v : values) {
        if (!std::isfinite(v)) throw Error("iqr_bounds: non-finite value");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double q1 = stats::quantile_sorted(sorted, 0.25);
    const double q3 = stats::quantile_sorted(sorted, 0.75);
    const double iqr = q3 - q1;
    return {q1 - k * iqr, q3 + k * iqr};
}

namespace {

LabelVector finish(std::vector<std::array<bool, kFeatureCount>> flags, LabelMethod method) {
    LabelVector out;
    out.method = method;
    out.anomalous.resize(flags.size());
    for (std::size_t i = 0; i < flags.size(); ++i) {
        out.anomalous[i] = aggregate_labels(flags[i]) ? 1 : 0;
    }
    out.feature_flags = std::move(flags);
    return out;
}

}  // namespace

LabelVector label_by_iqr(const FeatureFrame& frame, double k) {
    std::vector<std::array<bool, kFeatureCount>> flags(frame.size(), std::array<bool, kFeatureCount>{});
    for (auto m : kAllMachines) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < frame.size(); ++i) {
            if (frame.machines[i] == m) members.push_back(i);
        }
        if (members.empty()) continue;
        std::vector<double> column(members.size());
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            for (std::size_t j = 0; j < members.size(); ++j) column[j] = frame.rows[members[j]][f];
            std::pair<double, double> bounds;
            try {
                bounds = iqr_bounds(column, k);
            } catch (const Error& e) {
                throw Error(std::string("label_by_iqr(") + std::string(machine_name(m)) + "): " + e.what());
            }
            for (std::size_t j = 0; j < members.size(); ++j) {
                const double v = column[j];
                flags[members[j]][f] = v < bounds.first || v > bounds.second;
            }
        }
    }
    return finish(std::move(flags), LabelMethod::Iqr);
}

LabelVector label_by_range(const FeatureFrame& frame, const RangeSpec& spec) {
    std::vector<std::array<bool, kFeatureCount>> flags(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i) {
        const Machine m = frame.machines[i];
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            const Range& r = spec.require(m, static_cast<Feature>(f));
            flags[i][f] = !r.contains(frame.rows[i][f]);
        }
    }
    return finish(std::move(flags), LabelMethod::Range);
}

bool aggregate_labels(std::span<const bool> flags) {
    if (flags.empty()) throw Error("aggregate_labels: empty flag list");
    return std::any_of(flags.begin(), flags.end(), [](bool b) { return b; });
}

void attach_labels(FeatureFrame& frame, const LabelVector& labels) {
    if (labels.size() != frame.size()) throw Error("attach_labels: length mismatch");
    frame.labels = labels.anomalous;
}

}  // namespace fedlora
