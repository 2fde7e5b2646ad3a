#include "fedlora/metrics.hpp"
#include "fedlora/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace fedlora;

TEST_CASE("confusion: positive class is normal") {
    const Flags labels{0, 0, 1, 1, 0, 1};
    const Flags preds{0, 1, 1, 0, 0, 1};
    const ConfusionMatrix cm = confusion(labels, preds);
    CHECK(cm.tp == 2);
    CHECK(cm.fn == 1);
    CHECK(cm.tn == 2);
    CHECK(cm.fp == 1);
    CHECK_THROWS_AS(confusion(labels, Flags{0}), Error);
}

TEST_CASE("metrics: perfect detector scores 100 everywhere") {
    const Metrics m = evaluate(ConfusionMatrix{1, 0, 1, 0});
    for (auto id : kAllMetrics) CHECK(m[id] == 100.0);
}

TEST_CASE("metrics: hand case tp 3 fp 1 tn 4 fn 2") {
    const ConfusionMatrix cm{3, 1, 4, 2};
    CHECK(accuracy(cm).value == doctest::Approx(70.0));
    CHECK(precision(cm).value == doctest::Approx(75.0));
    CHECK(tnr(cm).value == doctest::Approx(80.0));
    CHECK(tpr(cm).value == doctest::Approx(60.0));
    CHECK(f1(cm).value == doctest::Approx(200.0 / 3.0));
}

TEST_CASE("metrics: zero denominators are flagged, not NaN") {
    const ConfusionMatrix none{};
    for (auto m : {accuracy(none), precision(none), tnr(none), tpr(none), f1(none)}) {
        CHECK(m.degenerate);
        CHECK(m.value == 0.0);
    }
    const ConfusionMatrix only_normals{5, 0, 0, 0};
    CHECK(tnr(only_normals).degenerate);
    CHECK_FALSE(tpr(only_normals).degenerate);
}

TEST_CASE("metrics: F1 is the harmonic mean of precision and TPR") {
    Rng rng(4);
    for (int t = 0; t < 5000; ++t) {
        const ConfusionMatrix cm{1 + rng.below(500), rng.below(500), rng.below(500), rng.below(500)};
        const double p = precision(cm).value, r = tpr(cm).value;
        CHECK(std::abs(f1(cm).value - 2 * p * r / (p + r)) < 1e-9);
        CHECK(f1(cm).value <= std::max(p, r) + 1e-12);
        CHECK(f1(cm).value >= std::min(p, r) - 1e-12);
    }
}

TEST_CASE("confusion: counts match a per-class oracle") {
    Rng rng(5);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = rng.below(300);
        Flags l(n), p(n);
        std::uint64_t normals = 0, caught = 0, kept = 0;
        for (std::size_t i = 0; i < n; ++i) {
            l[i] = rng.bernoulli(0.3);
            p[i] = rng.bernoulli(0.3);
            normals += l[i] == 0;
            caught += l[i] == 1 && p[i] == 1;
            kept += l[i] == 0 && p[i] == 0;
        }
        const ConfusionMatrix cm = confusion(l, p);
        CHECK(cm.total() == n);
        CHECK(cm.tp + cm.fn == normals);
        CHECK(cm.tn == caught);
        CHECK(cm.tp == kept);
    }
}

TEST_CASE("summarize: two runs, constant runs, one run") {
    const std::vector<double> two{90, 94};
    const RunStats s = summarize(two);
    CHECK(s.min == 90);
    CHECK(s.max == 94);
    CHECK(s.mean == 92);
    CHECK(s.median == 92);
    CHECK(s.std == doctest::Approx(2.828427).epsilon(1e-6));

    const std::vector<double> flat(13, 97.35);
    const RunStats f = summarize(flat);
    CHECK(f.std == 0.0);
    CHECK(f.mean == 97.35);

    const std::vector<double> one{88.5};
    const RunStats o = summarize(one);
    CHECK(o.std == 0.0);
    CHECK(o.median == 88.5);
    CHECK_THROWS_AS(summarize(std::vector<double>{}), Error);
}

TEST_CASE("summarize_runs: per-metric columns") {
    std::vector<Metrics> runs{evaluate(ConfusionMatrix{3, 1, 4, 2}), evaluate(ConfusionMatrix{1, 0, 1, 0})};
    const MetricsSummary s = summarize_runs(runs);
    CHECK(s.runs == 2);
    CHECK(s[MetricId::Acc].mean == doctest::Approx(85.0));
    CHECK(s[MetricId::Tpr].min == doctest::Approx(60.0));
    CHECK(metric_name(MetricId::Tnr) == "TNR");
}
