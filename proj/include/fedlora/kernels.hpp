#pragma once

// Data-parallel hot loops. Each kernel exists twice: a plain serial loop,
// kept as the reference, and an OpenMP version. Both compute every output
// element with the same arithmetic in the same order, so their results are
// bitwise equal; tests/unit/test_kernels.cpp holds them to that.

#include "fedlora/autonet.hpp"
#include "fedlora/iforest.hpp"

#include <span>
#include <vector>

namespace fedlora::kernels {

namespace serial {

/// out[i] = mean over features of (row_i - net(row_i))².
void reconstruction_errors(const Network& net, std::span<const FeatureRow> rows, std::span<double> out);

/// Per-feature squared deviations, row-major n x 5.
void squared_deviations(const Network& net, std::span<const FeatureRow> rows, std::span<double> out);

/// out[i] = mean path length of rows[i] over the forest's trees.
void mean_path_lengths(const IForest& forest, std::span<const FeatureRow> rows, std::span<double> out);

/// out[j] = (Σ_i coeff[i]·vectors[i][j]) / divisor, summed in index order.
void weighted_sum(std::span<const std::vector<double>> vectors, std::span<const double> coeff, double divisor,
                  std::span<double> out);

}  // namespace serial

namespace omp {

void reconstruction_errors(const Network& net, std::span<const FeatureRow> rows, std::span<double> out);
void squared_deviations(const Network& net, std::span<const FeatureRow> rows, std::span<double> out);
void mean_path_lengths(const IForest& forest, std::span<const FeatureRow> rows, std::span<double> out);
void weighted_sum(std::span<const std::vector<double>> vectors, std::span<const double> coeff, double divisor,
                  std::span<double> out);

}  // namespace omp

/// Library-wide switch. When false, callers route to the serial kernels.
/// Defaults to true when built with OpenMP.
bool parallel_enabled() noexcept;
void set_parallel_enabled(bool on) noexcept;

/// Dispatching front ends used by the rest of the library.
void reconstruction_errors(const Network& net, std::span<const FeatureRow> rows, std::span<double> out);
void squared_deviations(const Network& net, std::span<const FeatureRow> rows, std::span<double> out);
void mean_path_lengths(const IForest& forest, std::span<const FeatureRow> rows, std::span<double> out);
void weighted_sum(std::span<const std::vector<double>> vectors, std::span<const double> coeff, double divisor,
                  std::span<double> out);

int max_threads() noexcept;

}  // namespace fedlora::kernels
