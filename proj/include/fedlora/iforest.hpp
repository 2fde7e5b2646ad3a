#pragma once

#include "fedlora/frame.hpp"

#include <cstdint>
#include <vector>

namespace fedlora {

struct IsoNode {
    // Internal nodes: split feature/value and child indices. Leaves: size.
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint8_t feature = 0;
    double split = 0.0;
    std::uint32_t size = 0;

    bool is_leaf() const noexcept { return left < 0; }
    bool operator==(const IsoNode&) const = default;
};

struct IsoTree {
    std::vector<IsoNode> nodes;  // nodes[0] is the root
    bool operator==(const IsoTree&) const = default;
};

struct IForest {
    std::vector<IsoTree> trees;
    std::size_t subsample_size = 0;
    std::size_t height_limit = 0;
    /// Training scores, sorted ascending; used by the contamination cut.
    std::vector<double> training_scores;

    bool fitted() const noexcept { return !trees.empty(); }
};

/// Average unsuccessful-search path length in a BST of n points:
/// 2H(n-1) - 2(n-1)/n with H(k) = ln k + 0.5772156649; c(2) = 1, c(<=1) = 0.
double average_path_length(std::size_t n) noexcept;

inline constexpr std::size_t kDefaultTrees = 100;
inline constexpr double kDefaultContamination = 0.07;
inline constexpr double kDefaultMaxSamples = 0.27;

std::size_t subsample_size(std::size_t n, double max_samples_fraction);

IForest fit_iforest(const FeatureFrame& frame, std::size_t n_trees, double max_samples_fraction, std::uint64_t seed);

/// Path length of `row` in one tree, including the c(size) leaf adjustment.
double path_length(const IsoTree& tree, const FeatureRow& row) noexcept;

/// 2^(-mean path length / c(subsample size)); in (0, 1).
std::vector<double> iforest_scores(const IForest& forest, const FeatureFrame& frame);

/// Score cut that flags floor(contamination·n) of the n training points.
double contamination_threshold(const IForest& forest, double contamination);

/// 1 = anomalous, iff score >= the contamination cut.
Flags iforest_classify(const IForest& forest, const FeatureFrame& frame, double contamination);

}  // namespace fedlora
