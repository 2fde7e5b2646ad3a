#include "fedlora/kernels.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fedlora::kernels {

namespace {

#ifdef _OPENMP
std::atomic<bool> g_parallel{true};
#else
std::atomic<bool> g_parallel{false};
#endif

void check(std::size_t got, std::size_t want, const char* who) {
    if (got != want) throw Error(std::string(who) + ": output size mismatch");
}

inline double row_error(const Network& net, const FeatureRow& row, Scratch& s) {
    FeatureRow out;
    net.forward(row, out, s);
    double sum = 0.0;
    for (std::size_t f = 0; f < kFeatureCount; ++f) sum += (row[f] - out[f]) * (row[f] - out[f]);
    return sum / static_cast<double>(kFeatureCount);
}

inline void row_deviations(const Network& net, const FeatureRow& row, Scratch& s, double* dst) {
    FeatureRow out;
    net.forward(row, out, s);
    for (std::size_t f = 0; f < kFeatureCount; ++f) dst[f] = (row[f] - out[f]) * (row[f] - out[f]);
}

inline double row_path(const IForest& forest, const FeatureRow& row) {
    double sum = 0.0;
    for (const auto& tree : forest.trees) sum += path_length(tree, row);
    return sum / static_cast<double>(forest.trees.size());
}

void check_weighted(std::span<const std::vector<double>> vectors, std::span<const double> coeff,
                    std::span<double> out) {
    if (vectors.size() != coeff.size()) throw Error("weighted_sum: coefficient count mismatch");
    for (const auto& v : vectors) check(v.size(), out.size(), "weighted_sum");
}

}  // namespace

namespace serial {

void reconstruction_errors(const Network& net, std::span<const FeatureRow> rows, std::span<double> out) {
    check(out.size(), rows.size(), "reconstruction_errors");
    Scratch s = net.make_scratch();
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = row_error(net, rows[i], s);
}

void squared_deviations(const Network& net, std::span<const FeatureRow> rows, std::span<double> out) {
    check(out.size(), rows.size() * kFeatureCount, "squared_deviations");
    Scratch s = net.make_scratch();
    for (std::size_t i = 0; i < rows.size(); ++i) row_deviations(net, rows[i], s, out.data() + i * kFeatureCount);
}

void mean_path_lengths(const IForest& forest, std::span<const FeatureRow> rows, std::span<double> out) {
    check(out.size(), rows.size(), "mean_path_lengths");
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = row_path(forest, rows[i]);
}

void weighted_sum(std::span<const std::vector<double>> vectors, std::span<const double> coeff, double divisor,
                  std::span<double> out) {
    check_weighted(vectors, coeff, out);
    for (std::size_t j = 0; j < out.size(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < vectors.size(); ++i) acc += coeff[i] * vectors[i][j];
        out[j] = acc / divisor;
    }
}

}  // namespace serial

namespace omp {

void reconstruction_errors(const Network& net, std::span<const FeatureRow> rows, std::span<double> out) {
    check(out.size(), rows.size(), "reconstruction_errors");
    const auto n = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel
    {
        Scratch s = net.make_scratch();
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = row_error(net, rows[i], s);
    }
}

void squared_deviations(const Network& net, std::span<const FeatureRow> rows, std::span<double> out) {
    check(out.size(), rows.size() * kFeatureCount, "squared_deviations");
    const auto n = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel
    {
        Scratch s = net.make_scratch();
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) row_deviations(net, rows[i], s, out.data() + i * kFeatureCount);
    }
}

void mean_path_lengths(const IForest& forest, std::span<const FeatureRow> rows, std::span<double> out) {
    check(out.size(), rows.size(), "mean_path_lengths");
    const auto n = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = row_path(forest, rows[i]);
}

void weighted_sum(std::span<const std::vector<double>> vectors, std::span<const double> coeff, double divisor,
                  std::span<double> out) {
    check_weighted(vectors, coeff, out);
    const auto m = static_cast<std::ptrdiff_t>(out.size());
    const std::size_t k = vectors.size();
#pragma omp parallel for schedule(static) if (m > 4096)
    for (std::ptrdiff_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < k; ++i) acc += coeff[i] * vectors[i][j];
        out[j] = acc / divisor;
    }
}

}  // namespace omp

bool parallel_enabled() noexcept { return g_parallel.load(std::memory_order_relaxed); }

void set_parallel_enabled(bool on) noexcept {
#ifdef _OPENMP
    g_parallel.store(on, std::memory_order_relaxed);
#else
    (void)on;
#endif
}

void reconstruction_errors(const Network& net, std::span<const FeatureRow> rows, std::span<double> out) {
    parallel_enabled() ? omp::reconstruction_errors(net, rows, out) : serial::reconstruction_errors(net, rows, out);
}

void squared_deviations(const Network& net, std::span<const FeatureRow> rows, std::span<double> out) {
    parallel_enabled() ? omp::squared_deviations(net, rows, out) : serial::squared_deviations(net, rows, out);
}

void mean_path_lengths(const IForest& forest, std::span<const FeatureRow> rows, std::span<double> out) {
    parallel_enabled() ? omp::mean_path_lengths(forest, rows, out) : serial::mean_path_lengths(forest, rows, out);
}

void weighted_sum(std::span<const std::vector<double>> vectors, std::span<const double> coeff, double divisor,
                  std::span<double> out) {
    parallel_enabled() ? omp::weighted_sum(vectors, coeff, divisor, out)
                       : serial::weighted_sum(vectors, coeff, divisor, out);
}

int max_threads() noexcept {
#ifdef _OPENMP
    return parallel_enabled() ? omp_get_max_threads() : 1;
#else
    return 1;
#endif
}

}  // namespace fedlora::kernels
