#include "fedlora/preprocess.hpp"
#include "fedlora/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fedlora {

FeatureRow Standardizer::apply(const FeatureRow& row) const noexcept {
    FeatureRow z;
    for (std::size_t f = 0; f < kFeatureCount; ++f) z[f] = (row[f] - mean[f]) / sd[f];
    return z;
}

FeatureRow Standardizer::invert(const FeatureRow& z) const noexcept {
    FeatureRow row;
    for (std::size_t f = 0; f < kFeatureCount; ++f) row[f] = mean[f] + sd[f] * z[f];
    return row;
}

Standardizer fit_standardizer(const FeatureFrame& frame) {
    const std::size_t n = frame.size();
    if (n < 2) throw Error("fit_standardizer: need at least 2 instances");
    Standardizer s;
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        double sum = 0.0;
        for (const auto& row : frame.rows) sum += row[f];
        const double mu = sum / static_cast<double>(n);
        double ss = 0.0;
        for (const auto& row : frame.rows) ss += (row[f] - mu) * (row[f] - mu);
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        s.mean[f] = mu;
        s.sd[f] = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

FeatureFrame apply_standardizer(const FeatureFrame& frame, const Standardizer& s) {
    FeatureFrame out = frame;
    for (auto& row : out.rows) row = s.apply(row);
    return out;
}

void SplitSpec::validate() const {
    for (double r : {train, val, test}) {
        if (!(r > 0.0 && r < 1.0)) throw Error("SplitSpec: each ratio must lie in (0, 1)");
    }
    if (std::abs(train + val + test - 1.0) > 1e-9) throw Error("SplitSpec: ratios must sum to 1");
}

std::array<std::size_t, 3> stratum_sizes(std::size_t n, const SplitSpec& spec) {
    const std::array<double, 3> ratios{spec.train, spec.val, spec.test};
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double exact = ratios[k] * static_cast<double>(n);
        // Guard against 0.7 * 100 landing on 69.999...
        const double fl = std::floor(exact + 1e-9);
        sizes[k] = static_cast<std::size_t>(fl);
        remainder[k] = std::max(0.0, exact - fl);
        assigned += sizes[k];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < n; k = (k + 1) % 3) {
        ++sizes[order[k]];
        ++assigned;
    }
    return sizes;
}

SplitIndices stratified_split_indices(const FeatureFrame& frame, const SplitSpec& spec) {
    spec.validate();
    SplitIndices out;
    for (auto m : kAllMachines) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < frame.size(); ++i) {
            if (frame.machines[i] == m) members.push_back(i);
        }
        if (members.empty()) continue;
        if (members.size() < 3) {
            throw Error("stratified_split: stratum " + std::string(machine_name(m)) + " has fewer than 3 instances");
        }
        Rng rng(derive_seed(spec.seed, {index_of(m)}));
        rng.shuffle(std::span<std::size_t>(members));
        const auto sizes = stratum_sizes(members.size(), spec);
        auto it = members.begin();
        out.train.insert(out.train.end(), it, it + static_cast<std::ptrdiff_t>(sizes[0]));
        it += static_cast<std::ptrdiff_t>(sizes[0]);
        out.val.insert(out.val.end(), it, it + static_cast<std::ptrdiff_t>(sizes[1]));
        it += static_cast<std::ptrdiff_t>(sizes[1]);
        out.test.insert(out.test.end(), it, members.end());
    }
    // Keep source order inside each partition.
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

Split stratified_split(const FeatureFrame& frame, const SplitSpec& spec) {
    const auto idx = stratified_split_indices(frame, spec);
    return {frame.subset(idx.train), frame.subset(idx.val), frame.subset(idx.test)};
}

}  // namespace fedlora
