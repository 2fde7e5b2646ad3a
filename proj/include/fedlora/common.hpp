#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fedlora {

/// Raised for every contract violation in the library. The message names
/// the operation that rejected its input.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Machine : std::uint8_t { Manitou = 0, AtlasD7 = 1, JawCrusher = 2, DoosanDL200 = 3 };
inline constexpr std::size_t kMachineCount = 4;
inline constexpr std::array<Machine, kMachineCount> kAllMachines{
    Machine::Manitou, Machine::AtlasD7, Machine::JawCrusher, Machine::DoosanDL200};

enum class Feature : std::uint8_t { Battery = 0, Consumption = 1, Rpm = 2, WaterTemp = 3, OilPressure = 4 };
inline constexpr std::size_t kFeatureCount = 5;

using FeatureRow = std::array<double, kFeatureCount>;

constexpr std::size_t index_of(Machine m) noexcept { return static_cast<std::size_t>(m); }
constexpr std::size_t index_of(Feature f) noexcept { return static_cast<std::size_t>(f); }

std::string_view machine_name(Machine m) noexcept;
std::string_view feature_name(Feature f) noexcept;

/// Accepts the canonical names plus loose spellings ("atlas-d7", "DOOSAN_DL200").
std::optional<Machine> parse_machine(std::string_view text) noexcept;
std::optional<Feature> parse_feature(std::string_view text) noexcept;

/// Per-instance anomaly flags; 1 = anomalous. Byte-sized so parallel loops can
/// write distinct elements.
using Flags = std::vector<std::uint8_t>;

}  // namespace fedlora
