#include "fedlora/preprocess.hpp"
#include "fedlora/rng.hpp"
#include "fedlora/stats.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace fedlora;

namespace {

FeatureFrame random_frame(const std::array<std::size_t, kMachineCount>& counts, std::uint64_t seed) {
    Rng rng(seed);
    FeatureFrame f;
    f.labels.emplace();
    for (auto m : kAllMachines) {
        for (std::size_t i = 0; i < counts[index_of(m)]; ++i) {
            FeatureRow row{};
            for (std::size_t j = 0; j < kFeatureCount; ++j) row[j] = rng.uniform(-5, 5) * (j + 1) + 100.0 * j;
            f.push_back(row, m);
            f.labels->push_back(rng.bernoulli(0.2));
        }
    }
    return f;
}

std::vector<double> column(const FeatureFrame& f, std::size_t j) {
    std::vector<double> out;
    for (const auto& r : f.rows) out.push_back(r[j]);
    return out;
}

}  // namespace

TEST_CASE("fit_standardizer: two instances 0 and 2 give mean 1, sd sqrt 2") {
    FeatureFrame f;
    f.push_back({0, 0, 0, 0, 0}, Machine::Manitou);
    f.push_back({2, 2, 2, 2, 2}, Machine::Manitou);
    const Standardizer s = fit_standardizer(f);
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
        CHECK(s.mean[j] == 1.0);
        CHECK(s.sd[j] == doctest::Approx(std::sqrt(2.0)));
    }
}

TEST_CASE("fit_standardizer: constant feature keeps its mean and sd 1") {
    FeatureFrame f;
    for (int i = 0; i < 5; ++i) f.push_back({7.25, double(i), 0, 0, 0}, Machine::AtlasD7);
    const Standardizer s = fit_standardizer(f);
    CHECK(s.mean[0] == 7.25);
    CHECK(s.sd[0] == 1.0);
    CHECK(s.sd[2] == 1.0);
    FeatureFrame one;
    one.push_back({1, 2, 3, 4, 5}, Machine::Manitou);
    CHECK_THROWS_AS(fit_standardizer(one), Error);
}

TEST_CASE("apply(fit(frame)) is standard; standard data is a fixed point") {
    const FeatureFrame f = random_frame({300, 200, 100, 50}, 3);
    const FeatureFrame z = apply_standardizer(f, fit_standardizer(f));
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
        const auto c = column(z, j);
        CHECK(std::abs(stats::mean(c)) < 1e-9);
        CHECK(std::abs(stats::sample_sd(c) - 1.0) < 1e-9);
    }
    const Standardizer again = fit_standardizer(z);
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
        CHECK(std::abs(again.mean[j]) < 1e-9);
        CHECK(std::abs(again.sd[j] - 1.0) < 1e-9);
    }
}

TEST_CASE("applying a fitted standardizer twice differs from once") {
    const FeatureFrame f = random_frame({50, 0, 0, 0}, 4);
    const Standardizer s = fit_standardizer(f);
    const FeatureFrame once = apply_standardizer(f, s);
    const FeatureFrame twice = apply_standardizer(once, s);
    CHECK(once.rows != twice.rows);
}

TEST_CASE("standardization preserves rank order and inverts") {
    const FeatureFrame f = random_frame({80, 40, 20, 10}, 5);
    const Standardizer s = fit_standardizer(f);
    const FeatureFrame z = apply_standardizer(f, s);
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
        const auto a = column(f, j), b = column(z, j);
        std::vector<std::size_t> pa(a.size()), pb(b.size());
        std::iota(pa.begin(), pa.end(), 0);
        std::iota(pb.begin(), pb.end(), 0);
        std::stable_sort(pa.begin(), pa.end(), [&](auto x, auto y) { return a[x] < a[y]; });
        std::stable_sort(pb.begin(), pb.end(), [&](auto x, auto y) { return b[x] < b[y]; });
        CHECK(pa == pb);
    }
    for (std::size_t i = 0; i < f.size(); ++i) {
        const FeatureRow back = s.invert(z.rows[i]);
        for (std::size_t j = 0; j < kFeatureCount; ++j) {
            CHECK(std::abs(back[j] - f.rows[i][j]) <= 1e-9 * std::max(1.0, std::abs(f.rows[i][j])));
        }
    }
    CHECK(z.machines == f.machines);
    CHECK(z.labels == f.labels);
}

TEST_CASE("stratum_sizes: exact division and largest remainder") {
    const SplitSpec spec;
    CHECK(stratum_sizes(100, spec) == std::array<std::size_t, 3>{70, 15, 15});
    CHECK(stratum_sizes(200, spec) == std::array<std::size_t, 3>{140, 30, 30});
    // 0.7/0.15/0.15 of 10 is 7/1.5/1.5: one remainder seat, tie goes to val before test
    CHECK(stratum_sizes(10, spec) == std::array<std::size_t, 3>{7, 2, 1});
    // 0.7·11 = 7.7, 1.65, 1.65: train takes the largest remainder
    CHECK(stratum_sizes(11, spec) == std::array<std::size_t, 3>{8, 2, 1});
    for (std::size_t n = 3; n < 500; ++n) {
        const auto s = stratum_sizes(n, spec);
        CHECK(s[0] + s[1] + s[2] == n);
        CHECK(std::abs(double(s[0]) - 0.7 * n) <= 1.0);
        CHECK(std::abs(double(s[1]) - 0.15 * n) <= 1.0);
        CHECK(std::abs(double(s[2]) - 0.15 * n) <= 1.0);
    }
}

TEST_CASE("stratified_split: 100 single-machine instances -> 70/15/15") {
    const Split s = stratified_split(random_frame({0, 100, 0, 0}, 6), SplitSpec{});
    CHECK(s.train.size() == 70);
    CHECK(s.val.size() == 15);
    CHECK(s.test.size() == 15);
}

TEST_CASE("stratified_split: machines of 200 and 100 put 140 and 70 in train") {
    const Split s = stratified_split(random_frame({200, 100, 0, 0}, 7), SplitSpec{});
    const auto c = s.train.counts_by_machine();
    CHECK(c[0] == 140);
    CHECK(c[1] == 70);
}

TEST_CASE("stratified_split: partition property and per-stratum proportions") {
    Rng rng(8);
    for (int t = 0; t < 30; ++t) {
        std::array<std::size_t, kMachineCount> counts{};
        for (auto& c : counts) c = rng.bernoulli(0.2) ? 0 : 3 + rng.below(300);
        if (std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == 0) counts[0] = 10;
        const FeatureFrame f = random_frame(counts, 100 + t);
        SplitSpec spec;
        spec.seed = rng.next();
        const SplitIndices idx = stratified_split_indices(f, spec);
        std::multiset<std::size_t> all(idx.train.begin(), idx.train.end());
        all.insert(idx.val.begin(), idx.val.end());
        all.insert(idx.test.begin(), idx.test.end());
        CHECK(all.size() == f.size());
        CHECK(std::set<std::size_t>(all.begin(), all.end()).size() == f.size());
        for (auto m : kAllMachines) {
            const double n = double(counts[index_of(m)]);
            auto count_in = [&](const std::vector<std::size_t>& part) {
                return double(std::count_if(part.begin(), part.end(), [&](auto i) { return f.machines[i] == m; }));
            };
            CHECK(std::abs(count_in(idx.train) - 0.70 * n) <= 1.0);
            CHECK(std::abs(count_in(idx.val) - 0.15 * n) <= 1.0);
            CHECK(std::abs(count_in(idx.test) - 0.15 * n) <= 1.0);
        }
    }
}

TEST_CASE("stratified_split: same seed same assignment, different seed differs") {
    const FeatureFrame f = random_frame({120, 60, 30, 12}, 9);
    SplitSpec a, b;
    b.seed = a.seed + 1;
    const auto x = stratified_split_indices(f, a), y = stratified_split_indices(f, a), z = stratified_split_indices(f, b);
    CHECK(x.train == y.train);
    CHECK(x.val == y.val);
    CHECK(x.test == y.test);
    CHECK(x.train != z.train);
}

TEST_CASE("stratified_split: invalid specs and tiny strata") {
    SplitSpec bad;
    bad.train = 0.8;
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK_THROWS_AS(stratified_split(random_frame({2, 10, 0, 0}, 1), SplitSpec{}), Error);
}
