#pragma once

#include "fedlora/experiment.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fedlora::criteria {

struct Outcome {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
    double limit_seconds = 0.0;  // runtime budget; exceeding it fails the criterion
};

/// "AC<n> PASS|FAIL <name> (<seconds>s / <limit>s): detail"
std::string format(const Outcome& o);

Outcome size_accounting();                                   // AC1
Outcome lorawan_figures();                                   // AC2
Outcome fedavg_properties(std::uint64_t seed, std::size_t cases = 1000);  // AC3
Outcome threshold_oracle(std::uint64_t seed, std::size_t instances = 100);  // AC4
Outcome metric_identities(std::uint64_t seed);               // AC5
Outcome gradient_check(std::uint64_t seed);                  // AC6
Outcome end_to_end(std::uint64_t seed);                      // AC7
Outcome epoch_round_sweep(std::uint64_t seed, double scale);  // AC8
Outcome iforest_recovery(std::uint64_t seed);                // AC9
Outcome determinism(std::uint64_t seed, const std::string& scratch_dir);  // AC10

struct SuiteOptions {
    std::uint64_t seed = 2024;
    double sweep_scale = 0.1;
    std::string scratch_dir = "acceptance_scratch";
};

std::vector<Outcome> run_all(const SuiteOptions& opt);

}  // namespace fedlora::criteria
