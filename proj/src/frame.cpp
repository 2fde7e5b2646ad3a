#include "fedlora/frame.hpp"

namespace fedlora {

FeatureFrame FeatureFrame::subset(std::span<const std::size_t> indices) const {
    FeatureFrame out;
    out.rows.reserve(indices.size());
    out.machines.reserve(indices.size());
    if (labels) out.labels.emplace().reserve(indices.size());
    for (auto i : indices) {
        if (i >= size()) throw Error("FeatureFrame::subset: index out of range");
        out.rows.push_back(rows[i]);
        out.machines.push_back(machines[i]);
        if (labels) out.labels->push_back((*labels)[i]);
    }
    return out;
}

FeatureFrame FeatureFrame::only(Machine m) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < size(); ++i) {
        if (machines[i] == m) idx.push_back(i);
    }
    return subset(idx);
}

void FeatureFrame::append(const FeatureFrame& other) {
    if (!empty() && !other.empty() && labels.has_value() != other.labels.has_value()) {
        throw Error("FeatureFrame::append: label presence differs");
    }
    if (empty() && other.labels && !labels) labels.emplace();
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
    machines.insert(machines.end(), other.machines.begin(), other.machines.end());
    if (labels && other.labels) labels->insert(labels->end(), other.labels->begin(), other.labels->end());
}

std::array<std::size_t, kMachineCount> FeatureFrame::counts_by_machine() const noexcept {
    std::array<std::size_t, kMachineCount> counts{};
    for (auto m : machines) ++counts[index_of(m)];
    return counts;
}

const Flags& FeatureFrame::require_labels(const char* who) const {
    if (!labels) throw Error(std::string(who) + ": frame has no labels");
    if (labels->size() != size()) throw Error(std::string(who) + ": label length mismatch");
    return *labels;
}

}  // namespace fedlora
