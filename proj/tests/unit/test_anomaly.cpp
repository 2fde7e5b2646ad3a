#include "fedlora/anomaly.hpp"
#include "fedlora/metrics.hpp"
#include "fedlora/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

using namespace fedlora;

TEST_CASE("initial_threshold: 84th percentile of 0..99 is 83.16") {
    std::vector<double> v(100);
    std::iota(v.begin(), v.end(), 0.0);
    CHECK(initial_threshold(v) == doctest::Approx(83.16));
    std::reverse(v.begin(), v.end());
    CHECK(initial_threshold(v) == doctest::Approx(83.16));
    CHECK(initial_threshold(std::vector<double>{4.5}) == 4.5);
    CHECK_THROWS_AS(initial_threshold(std::vector<double>{}), Error);
}

TEST_CASE("initial_threshold: pooled columns use every squared deviation") {
    ArchSpec arch;
    arch.hidden_sizes = {4};
    AutoencoderModel m = build_autoencoder(arch, 1);
    set_weights(m, WeightVector(m.param_count(), 0.0));  // reconstructs 0, so deviations are x²
    FeatureFrame f;
    for (int i = 0; i < 20; ++i) f.push_back({double(i), 0, 0, 0, 0}, Machine::Manitou);
    std::vector<double> pooled;
    for (int i = 0; i < 20; ++i) {
        pooled.push_back(double(i) * i);
        for (int j = 0; j < 4; ++j) pooled.push_back(0.0);
    }
    CHECK(initial_threshold(m, f, ScoreMode::PooledColumns) == doctest::Approx(initial_threshold(pooled)));
    std::vector<double> means;
    for (int i = 0; i < 20; ++i) means.push_back(double(i) * i / 5.0);
    CHECK(initial_threshold(m, f, ScoreMode::InstanceMean) == doctest::Approx(initial_threshold(means)));
}

TEST_CASE("classify: strict inequality and infinite thresholds") {
    const std::vector<double> s{0.1, 0.2, 0.3};
    CHECK(classify(s, 0.2) == Flags{0, 0, 1});
    CHECK(classify(s, std::numeric_limits<double>::infinity()) == Flags{0, 0, 0});
    CHECK(classify(s, -std::numeric_limits<double>::infinity()) == Flags{1, 1, 1});
}

TEST_CASE("classify: raising the threshold never adds flags") {
    Rng rng(2);
    std::vector<double> s(300);
    for (auto& x : s) x = rng.uniform();
    Flags prev(s.size(), 1);
    for (double t = -0.1; t <= 1.1; t += 0.05) {
        const Flags cur = classify(s, t);
        for (std::size_t i = 0; i < s.size(); ++i) CHECK(cur[i] <= prev[i]);
        prev = cur;
    }
}

TEST_CASE("default_percentile_grid: 500 points from 50.0 to 99.9") {
    const auto g = default_percentile_grid();
    REQUIRE(g.size() == 500);
    CHECK(g.front() == 50.0);
    CHECK(g.back() == doctest::Approx(99.9));
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
}

TEST_CASE("select_threshold: separable scores reach F1 100") {
    std::vector<double> s;
    std::vector<std::uint8_t> l;
    for (int i = 0; i < 80; ++i) {
        s.push_back(0.01 * i);
        l.push_back(0);
    }
    for (int i = 0; i < 20; ++i) {
        s.push_back(10.0 + i);
        l.push_back(1);
    }
    const ThresholdResult r = select_threshold(s, l);
    CHECK(r.f1 == 100.0);
    CHECK_FALSE(r.degenerate);
    CHECK(r.threshold >= 0.79);
    CHECK(r.threshold < 10.0);
    CHECK(f1_at(s, l, r.threshold) == 100.0);
}

TEST_CASE("select_threshold: all-normal labels are degenerate with nothing flagged") {
    const std::vector<double> s{0.3, 0.1, 0.9, 0.2};
    const std::vector<std::uint8_t> l(4, 0);
    const ThresholdResult r = select_threshold(s, l);
    CHECK(r.degenerate);
    CHECK(r.threshold > 0.9);
    CHECK(classify(s, r.threshold) == Flags(4, 0));
}

TEST_CASE("select_threshold: reported F1 matches a recount at the threshold") {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 10 + rng.below(300);
        std::vector<double> s(n);
        std::vector<std::uint8_t> l(n);
        for (std::size_t i = 0; i < n; ++i) {
            l[i] = rng.bernoulli(0.2);
            s[i] = rng.uniform() + (l[i] ? 0.4 : 0.0);
        }
        if (std::count(l.begin(), l.end(), 1) == 0) l[0] = 1;
        if (std::count(l.begin(), l.end(), 0) == 0) l[0] = 0;
        const ThresholdResult r = select_threshold(s, l);
        CHECK(r.f1 == doctest::Approx(f1_at(s, l, r.threshold)));
        CHECK(r.percentile >= 50.0);
        CHECK(r.percentile < 100.0);
        CHECK(r.f1 + 1e-12 >= f1_at(s, l, initial_threshold(s)));
    }
}

TEST_CASE("select_threshold: ties resolve to the lowest percentile") {
    // Every score equal: every grid point gives the same cut and F1.
    const std::vector<double> s(10, 1.0);
    std::vector<std::uint8_t> l(10, 0);
    l[0] = 1;
    CHECK(select_threshold(s, l).percentile == 50.0);
}

TEST_CASE("select_threshold: input validation") {
    const std::vector<double> s{1, 2};
    CHECK_THROWS_AS(select_threshold(s, std::vector<std::uint8_t>{0}), Error);
    CHECK_THROWS_AS(select_threshold(std::vector<double>{}, std::vector<std::uint8_t>{}), Error);
    CHECK_THROWS_AS(select_threshold(std::vector<double>{1, NAN}, std::vector<std::uint8_t>{0, 1}), Error);
}

namespace {

FeatureFrame grid_data(std::size_t n, std::uint64_t seed, bool labeled) {
    Rng rng(seed);
    FeatureFrame f;
    if (labeled) f.labels.emplace();
    for (std::size_t i = 0; i < n; ++i) {
        const bool anomalous = labeled && rng.bernoulli(0.1);
        const double a = rng.uniform(-1, 1);
        FeatureRow r{a, -a, 0.5 * a, rng.uniform(-0.05, 0.05), 0.0};
        if (anomalous) r[4] = 8.0;
        f.push_back(r, Machine::Manitou);
        if (labeled) f.labels->push_back(anomalous ? 1 : 0);
    }
    return f;
}

}  // namespace

TEST_CASE("grid_search_autoencoder: single point and table layout") {
    GridSpec g;
    g.hidden = {4};
    g.epochs = {3};
    g.batch = {32};
    g.activations = {Activation::Tanh};
    const auto train = grid_data(200, 1, false), val = grid_data(60, 2, false);
    const AeGridResult r = grid_search_autoencoder(train, val, g, TrainConfig{}, 5);
    REQUIRE(r.table.size() == 1);
    CHECK(r.best == 0);
    CHECK(r.best_point().score <= 0.0);

    g.hidden = {2, 8};
    g.epochs = {1, 40};
    const AeGridResult r2 = grid_search_autoencoder(train, val, g, TrainConfig{}, 5);
    REQUIRE(r2.table.size() == 4);
    CHECK(r2.table[1].train.epochs == 40);
    CHECK(r2.table[2].arch.hidden_sizes == std::vector<std::size_t>{8});
    for (const auto& p : r2.table) CHECK(p.score <= r2.best_point().score);
    std::ostringstream csv;
    write_grid_csv(csv, r2);
    const std::string text = csv.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}

TEST_CASE("grid_search_iforest: best point has the highest validation F1") {
    GridSpec g;
    g.contamination = {0.01, 0.1};
    g.max_samples = {0.2, 0.5};
    const auto train = grid_data(400, 3, false), val = grid_data(200, 4, true);
    const IfGridResult r = grid_search_iforest(train, val, g, 30, 9);
    REQUIRE(r.table.size() == 4);
    CHECK(r.table[1].contamination == 0.1);
    CHECK(r.table[2].max_samples == 0.5);
    for (const auto& p : r.table) CHECK(p.f1 <= r.best_point().f1);
    CHECK_THROWS_AS(grid_search_iforest(train, grid_data(10, 5, false), g, 30, 9), Error);
}
