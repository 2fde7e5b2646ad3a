#pragma once

#include "fedlora/common.hpp"
#include "fedlora/frame.hpp"

#include <array>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace fedlora {

struct Range {
    double lower = 0.0;
    double upper = 0.0;

    double width() const noexcept { return upper - lower; }
    /// Bounds are inclusive.
    bool contains(double v) const noexcept { return v >= lower && v <= upper; }
    bool operator==(const Range&) const = default;
};

/// Normal operating range per machine per feature. Entries may be absent
/// when loaded from a partial config; labeling a machine with a missing
/// entry is an error.
class RangeSpec {
public:
    /// Manufacturer ranges for the four machines.
    static RangeSpec defaults();

    const std::optional<Range>& at(Machine m, Feature f) const noexcept {
        return table_[index_of(m)][index_of(f)];
    }
    const Range& require(Machine m, Feature f) const;
    void set(Machine m, Feature f, Range r);
    void clear(Machine m, Feature f) noexcept { table_[index_of(m)][index_of(f)].reset(); }

    bool complete() const noexcept;

    bool operator==(const RangeSpec&) const = default;

private:
    std::array<std::array<std::optional<Range>, kFeatureCount>, kMachineCount> table_{};
};

enum class LabelMethod { Range, Iqr };

struct LabelVector {
    std::vector<std::array<bool, kFeatureCount>> feature_flags;
    Flags anomalous;  // OR over feature_flags
    LabelMethod method = LabelMethod::Range;

    std::size_t size() const noexcept { return anomalous.size(); }
    std::size_t anomaly_count() const noexcept;
    double anomaly_fraction() const noexcept;
};

/// Q1 - k·IQR and Q3 + k·IQR with linearly interpolated quartiles.
/// Needs at least four finite values.
std::pair<double, double> iqr_bounds(std::span<const double> values, double k = 1.5);

/// Bounds are computed per machine and per feature.
LabelVector label_by_iqr(const FeatureFrame& frame, double k = 1.5);

LabelVector label_by_range(const FeatureFrame& frame, const RangeSpec& spec);

bool aggregate_labels(std::span<const bool> flags);

/// Copies the aggregated labels onto the frame.
void attach_labels(FeatureFrame& frame, const LabelVector& labels);

}  // namespace fedlora
