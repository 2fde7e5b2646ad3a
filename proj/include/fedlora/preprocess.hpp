#pragma once

#include "fedlora/frame.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace fedlora {

/// Per-feature z-scoring parameters in native units.
struct Standardizer {
    FeatureRow mean{};
    FeatureRow sd{1.0, 1.0, 1.0, 1.0, 1.0};

    FeatureRow apply(const FeatureRow& row) const noexcept;
    FeatureRow invert(const FeatureRow& z) const noexcept;
};

/// Sample mean and sample sd (n-1). A zero sd is stored as 1.
Standardizer fit_standardizer(const FeatureFrame& frame);

FeatureFrame apply_standardizer(const FeatureFrame& frame, const Standardizer& s);

enum class StandardizeScope { TrainOnly, Joined };

struct SplitSpec {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;
    std::uint64_t seed = 7;

    void validate() const;
};

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

struct Split {
    FeatureFrame train, val, test;
};

/// Per-stratum sizes for a stratum of `n` instances: largest-remainder
/// rounding, ties resolved in train, val, test order.
std::array<std::size_t, 3> stratum_sizes(std::size_t n, const SplitSpec& spec);

/// Stratified by machine id. Each stratum is shuffled with a stream derived
/// from (seed, machine) and cut into train/val/test.
SplitIndices stratified_split_indices(const FeatureFrame& frame, const SplitSpec& spec);

Split stratified_split(const FeatureFrame& frame, const SplitSpec& spec);

}  // namespace fedlora
