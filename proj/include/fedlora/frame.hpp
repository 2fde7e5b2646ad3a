#pragma once

#include "fedlora/common.hpp"

#include <optional>
#include <span>
#include <vector>

namespace fedlora {

/// Instances x the five selected features, aligned with machine ids and,
/// once labeled, with per-instance anomaly labels (1 = anomalous).
struct FeatureFrame {
    std::vector<FeatureRow> rows;
    std::vector<Machine> machines;
    std::optional<Flags> labels;

    std::size_t size() const noexcept { return rows.size(); }
    bool empty() const noexcept { return rows.empty(); }

    void push_back(const FeatureRow& row, Machine m) {
        rows.push_back(row);
        machines.push_back(m);
    }

    /// Rows at `indices`, in that order; labels follow when present.
    FeatureFrame subset(std::span<const std::size_t> indices) const;

    FeatureFrame only(Machine m) const;

    /// Appends `other`; both or neither must carry labels.
    void append(const FeatureFrame& other);

    std::array<std::size_t, kMachineCount> counts_by_machine() const noexcept;

    const Flags& require_labels(const char* who) const;
};

}  // namespace fedlora
