#include "fedlora/iforest.hpp"
#include "fedlora/kernels.hpp"
#include "fedlora/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fedlora {

double average_path_length(std::size_t n) noexcept {
    if (n <= 1) return 0.0;
    if (n == 2) return 1.0;
    constexpr double kEulerGamma = 0.5772156649;
    const double m = static_cast<double>(n - 1);
    return 2.0 * (std::log(m) + kEulerGamma) - 2.0 * m / static_cast<double>(n);
}

std::size_t subsample_size(std::size_t n, double max_samples_fraction) {
    if (!(max_samples_fraction > 0.0 && max_samples_fraction <= 1.0)) {
        throw Error("iforest: max_samples fraction must lie in (0, 1]");
    }
    const auto psi = static_cast<std::size_t>(std::llround(max_samples_fraction * static_cast<double>(n)));
    return std::clamp<std::size_t>(psi, 2, n);
}

namespace {

struct TreeBuilder {
    const std::vector<FeatureRow>& rows;
    std::size_t height_limit;
    Rng& rng;
    IsoTree tree;

    std::int32_t build(std::span<std::size_t> idx, std::size_t depth) {
        const auto me = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.push_back(IsoNode{});
        tree.nodes[me].size = static_cast<std::uint32_t>(idx.size());
        if (idx.size() <= 1 || depth >= height_limit) return me;

        FeatureRow lo, hi;
        lo.fill(std::numeric_limits<double>::infinity());
        hi.fill(-std::numeric_limits<double>::infinity());
        for (auto i : idx) {
            for (std::size_t f = 0; f < kFeatureCount; ++f) {
                lo[f] = std::min(lo[f], rows[i][f]);
                hi[f] = std::max(hi[f], rows[i][f]);
            }
        }
        std::array<std::uint8_t, kFeatureCount> candidates{};
        std::size_t n_candidates = 0;
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            if (hi[f] > lo[f]) candidates[n_candidates++] = static_cast<std::uint8_t>(f);
        }
        if (n_candidates == 0) return me;  // all duplicates

        const std::uint8_t f = candidates[rng.below(n_candidates)];
        double split = rng.uniform(lo[f], hi[f]);
        if (!(split > lo[f])) split = lo[f] + 0.5 * (hi[f] - lo[f]);

        auto mid = std::partition(idx.begin(), idx.end(), [&](std::size_t i) { return rows[i][f] < split; });
        const auto n_left = static_cast<std::size_t>(mid - idx.begin());

        const std::int32_t left = build(idx.subspan(0, n_left), depth + 1);
        const std::int32_t right = build(idx.subspan(n_left), depth + 1);
        IsoNode& node = tree.nodes[me];
        node.left = left;
        node.right = right;
        node.feature = f;
        node.split = split;
        return me;
    }
};

}  // namespace

IForest fit_iforest(const FeatureFrame& frame, std::size_t n_trees, double max_samples_fraction, std::uint64_t seed) {
    const std::size_t n = frame.size();
    if (n < 8) throw Error("fit_iforest: need at least 8 instances");
    if (n_trees == 0) throw Error("fit_iforest: need at least one tree");
    const bool degenerate =
        std::all_of(frame.rows.begin(), frame.rows.end(), [&](const FeatureRow& r) { return r == frame.rows.front(); });
    if (degenerate) throw Error("fit_iforest: all rows identical");

    IForest forest;
    forest.subsample_size = subsample_size(n, max_samples_fraction);
    forest.height_limit = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(forest.subsample_size))));
    forest.trees.resize(n_trees);

    std::vector<std::size_t> all(n);
    for (std::size_t t = 0; t < n_trees; ++t) {
        Rng rng(derive_seed(seed, {t}));
        std::iota(all.begin(), all.end(), std::size_t{0});
        // Partial Fisher-Yates: the first psi slots become the sample.
        for (std::size_t i = 0; i < forest.subsample_size; ++i) std::swap(all[i], all[i + rng.below(n - i)]);
        std::vector<std::size_t> sample(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(forest.subsample_size));
        TreeBuilder builder{frame.rows, forest.height_limit, rng, {}};
        builder.build(sample, 0);
        forest.trees[t] = std::move(builder.tree);
    }

    forest.training_scores = iforest_scores(forest, frame);
    std::sort(forest.training_scores.begin(), forest.training_scores.end());
    return forest;
}

double path_length(const IsoTree& tree, const FeatureRow& row) noexcept {
    std::size_t node = 0;
    std::size_t depth = 0;
    while (!tree.nodes[node].is_leaf()) {
        const auto& n = tree.nodes[node];
        node = static_cast<std::size_t>(row[n.feature] < n.split ? n.left : n.right);
        ++depth;
    }
    return static_cast<double>(depth) + average_path_length(tree.nodes[node].size);
}

std::vector<double> iforest_scores(const IForest& forest, const FeatureFrame& frame) {
    if (!forest.fitted()) throw Error("iforest_scores: forest is not fitted");
    std::vector<double> scores(frame.size());
    kernels::mean_path_lengths(forest, frame.rows, scores);
    const double norm = average_path_length(forest.subsample_size);
    for (auto& s : scores) s = std::exp2(-s / norm);
    return scores;
}

double contamination_threshold(const IForest& forest, double contamination) {
    if (!(contamination > 0.0 && contamination <= 0.5)) throw Error("iforest_classify: contamination outside (0, 0.5]");
    if (!forest.fitted()) throw Error("iforest_classify: forest is not fitted");
    const auto& sorted = forest.training_scores;
    const auto k = static_cast<std::size_t>(std::floor(contamination * static_cast<double>(sorted.size()) + 1e-9));
    if (k == 0) return std::numeric_limits<double>::infinity();
    return sorted[sorted.size() - k];
}

Flags iforest_classify(const IForest& forest, const FeatureFrame& frame, double contamination) {
    const double cut = contamination_threshold(forest, contamination);
    const auto scores = iforest_scores(forest, frame);
    Flags out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= cut ? 1 : 0;
    return out;
}

}  // namespace fedlora
