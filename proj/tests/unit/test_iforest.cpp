#include "fedlora/iforest.hpp"
#include "fedlora/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace fedlora;

namespace {

FeatureFrame blob(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    FeatureFrame f;
    for (std::size_t i = 0; i < n; ++i) {
        FeatureRow r{};
        for (auto& v : r) v = rng.uniform(-1, 1);
        f.push_back(r, Machine::Manitou);
    }
    return f;
}

double harmonic(std::size_t k) {
    double h = 0;
    for (std::size_t i = 1; i <= k; ++i) h += 1.0 / double(i);
    return h;
}

}  // namespace

TEST_CASE("average_path_length: small cases and the harmonic form") {
    CHECK(average_path_length(0) == 0.0);
    CHECK(average_path_length(1) == 0.0);
    CHECK(average_path_length(2) == 1.0);
    // H(k) ≈ ln k + γ is within 1/(2k) of the exact harmonic number
    for (std::size_t n : {10, 100, 256, 1000, 5000}) {
        const double exact = 2.0 * harmonic(n - 1) - 2.0 * double(n - 1) / double(n);
        CHECK(std::abs(average_path_length(n) - exact) <= 1.0 / double(n - 1));
    }
    for (std::size_t n = 3; n < 2000; ++n) CHECK(average_path_length(n) > average_path_length(n - 1));
}

TEST_CASE("subsample_size: round then clamp") {
    CHECK(subsample_size(1000, 0.27) == 270);
    CHECK(subsample_size(10, 0.27) == 3);
    CHECK(subsample_size(10, 0.01) == 2);
    CHECK(subsample_size(10, 1.0) == 10);
    CHECK_THROWS_AS(subsample_size(10, 0.0), Error);
    CHECK_THROWS_AS(subsample_size(10, 1.5), Error);
}

TEST_CASE("path_length: hand-built two-leaf tree") {
    IsoTree t;
    t.nodes.resize(3);
    t.nodes[0].left = 1;
    t.nodes[0].right = 2;
    t.nodes[0].feature = 2;
    t.nodes[0].split = 0.5;
    t.nodes[0].size = 5;
    t.nodes[1].size = 1;
    t.nodes[2].size = 4;
    CHECK(path_length(t, {0, 0, 0.1, 0, 0}) == 1.0);
    CHECK(path_length(t, {0, 0, 0.5, 0, 0}) == doctest::Approx(1.0 + average_path_length(4)));
    IsoTree leaf;
    leaf.nodes.resize(1);
    leaf.nodes[0].size = 2;
    CHECK(path_length(leaf, {}) == 1.0);
}

TEST_CASE("fit_iforest: seeded, sized, heights bounded") {
    const FeatureFrame f = blob(1000, 1);
    const IForest a = fit_iforest(f, 40, 0.27, 5), b = fit_iforest(f, 40, 0.27, 5), c = fit_iforest(f, 40, 0.27, 6);
    CHECK(a.trees == b.trees);
    CHECK_FALSE(a.trees == c.trees);
    CHECK(a.subsample_size == 270);
    CHECK(a.height_limit == 9);
    CHECK(a.training_scores.size() == 1000);
    CHECK(std::is_sorted(a.training_scores.begin(), a.training_scores.end()));
    for (const auto& t : a.trees) CHECK(t.nodes[0].size == 270);
    CHECK_THROWS_AS(fit_iforest(blob(5, 1), 10, 0.5, 1), Error);
    CHECK_THROWS_AS(fit_iforest(f, 0, 0.5, 1), Error);
    FeatureFrame same;
    for (int i = 0; i < 20; ++i) same.push_back({1, 1, 1, 1, 1}, Machine::Manitou);
    CHECK_THROWS_AS(fit_iforest(same, 10, 0.5, 1), Error);
}

TEST_CASE("iforest_scores: in (0, 1) and a far outlier scores highest") {
    FeatureFrame f = blob(800, 2);
    f.push_back({40, -40, 40, -40, 40}, Machine::Manitou);
    const IForest forest = fit_iforest(f, 100, 0.27, 3);
    const auto s = iforest_scores(forest, f);
    for (double v : s) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    CHECK(std::max_element(s.begin(), s.end()) - s.begin() == 800);
    CHECK(s.back() > 0.6);
}

TEST_CASE("contamination cut flags floor(c·n) training points") {
    const FeatureFrame f = blob(1000, 4);
    const IForest forest = fit_iforest(f, 60, 0.27, 7);
    const auto count = [&](double c) {
        const Flags flags = iforest_classify(forest, f, c);
        return std::size_t(std::count(flags.begin(), flags.end(), 1));
    };
    // ties among continuous-valued scores are rare; allow them anyway
    CHECK(count(0.07) >= 70);
    CHECK(count(0.07) <= 72);
    CHECK(count(0.0009) == 0);
    CHECK(count(0.5) >= 500);
    CHECK(count(0.5) <= 505);
    CHECK_THROWS_AS(iforest_classify(forest, f, 0.0), Error);
    CHECK_THROWS_AS(iforest_classify(forest, f, 0.6), Error);
    CHECK_THROWS_AS(iforest_scores(IForest{}, f), Error);
}

TEST_CASE("contamination cut is monotone in c") {
    const IForest forest = fit_iforest(blob(500, 8), 30, 0.3, 1);
    double prev = std::numeric_limits<double>::infinity();
    for (int c = 1; c <= 50; ++c) {
        const double cut = contamination_threshold(forest, c / 100.0);
        CHECK(cut <= prev);
        prev = cut;
    }
}
