// Serial reference vs OpenMP kernels on the same inputs.
#include "fedlora/autonet.hpp"
#include "fedlora/iforest.hpp"
#include "fedlora/kernels.hpp"
#include "fedlora/rng.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace fedlora;

std::vector<FeatureRow> random_rows(std::size_t n) {
    Rng rng(11);
    std::vector<FeatureRow> rows(n);
    for (auto& r : rows)
        for (auto& v : r) v = rng.uniform(-2.0, 2.0);
    return rows;
}

FeatureFrame frame_of(const std::vector<FeatureRow>& rows) {
    FeatureFrame f;
    for (const auto& r : rows) f.push_back(r, Machine::Manitou);
    return f;
}

template <bool Parallel>
void BM_ReconstructionErrors(benchmark::State& state) {
    const auto rows = random_rows(static_cast<std::size_t>(state.range(0)));
    ArchSpec arch;
    arch.hidden_sizes = {static_cast<std::size_t>(state.range(1))};
    const AutoencoderModel model = build_autoencoder(arch, 3);
    std::vector<double> out(rows.size());
    for (auto _ : state) {
        if constexpr (Parallel) kernels::omp::reconstruction_errors(model.net, rows, out);
        else kernels::serial::reconstruction_errors(model.net, rows, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_MeanPathLengths(benchmark::State& state) {
    const auto rows = random_rows(static_cast<std::size_t>(state.range(0)));
    const IForest forest = fit_iforest(frame_of(rows), 100, 0.27, 5);
    std::vector<double> out(rows.size());
    for (auto _ : state) {
        if constexpr (Parallel) kernels::omp::mean_path_lengths(forest, rows, out);
        else kernels::serial::mean_path_lengths(forest, rows, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_WeightedSum(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    Rng rng(7);
    std::vector<std::vector<double>> vectors(4, std::vector<double>(m));
    for (auto& v : vectors)
        for (auto& x : v) x = rng.uniform();
    const std::vector<double> coeff{100, 200, 300, 400};
    std::vector<double> out(m);
    for (auto _ : state) {
        if constexpr (Parallel) kernels::omp::weighted_sum(vectors, coeff, 1000.0, out);
        else kernels::serial::weighted_sum(vectors, coeff, 1000.0, out);
        benchmark::DoNotOptimize(out.data());
    }
}

}  // namespace

BENCHMARK(BM_ReconstructionErrors<false>)->Args({20000, 32})->Args({20000, 128});
BENCHMARK(BM_ReconstructionErrors<true>)->Args({20000, 32})->Args({20000, 128});
BENCHMARK(BM_MeanPathLengths<false>)->Arg(20000);
BENCHMARK(BM_MeanPathLengths<true>)->Arg(20000);
BENCHMARK(BM_WeightedSum<false>)->Arg(1413)->Arg(1 << 20);
BENCHMARK(BM_WeightedSum<true>)->Arg(1413)->Arg(1 << 20);

BENCHMARK_MAIN();
