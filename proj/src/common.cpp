#include "fedlora/common.hpp"
#include "fedlora/stats.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace fedlora {

namespace {

std::string squash(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

}  // namespace

std::string_view machine_name(Machine m) noexcept {
    switch (m) {
        case Machine::Manitou: return "Manitou";
        case Machine::AtlasD7: return "AtlasD7";
        case Machine::JawCrusher: return "JawCrusher";
        case Machine::DoosanDL200: return "DoosanDL200";
    }
    return "?";
}

std::string_view feature_name(Feature f) noexcept {
    switch (f) {
        case Feature::Battery: return "battery_v";
        case Feature::Consumption: return "consumption_lph";
        case Feature::Rpm: return "rpm";
        case Feature::WaterTemp: return "water_c";
        case Feature::OilPressure: return "oil_bar";
    }
    return "?";
}

std::optional<Machine> parse_machine(std::string_view text) noexcept {
    const std::string key = squash(text);
    for (auto m : kAllMachines) {
        if (key == squash(machine_name(m))) return m;
    }
    // Short aliases used on device ids.
    if (key == "d7" || key == "atlas" || key == "atlascopcod7") return Machine::AtlasD7;
    if (key == "j1175" || key == "jaw" || key == "crusher") return Machine::JawCrusher;
    if (key == "dl200" || key == "doosan") return Machine::DoosanDL200;
    return std::nullopt;
}

std::optional<Feature> parse_feature(std::string_view text) noexcept {
    const std::string key = squash(text);
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        auto f = static_cast<Feature>(i);
        if (key == squash(feature_name(f))) return f;
    }
    if (key == "battery") return Feature::Battery;
    if (key == "consumption") return Feature::Consumption;
    if (key == "water" || key == "watertemp") return Feature::WaterTemp;
    if (key == "oil" || key == "oilpressure") return Feature::OilPressure;
    return std::nullopt;
}

namespace stats {

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw Error("quantile: empty input");
    if (!(q >= 0.0 && q <= 1.0)) throw Error("quantile: q outside [0, 1]");
    const double h = static_cast<double>(sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    if (frac == 0.0) return sorted[lo];
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> values, double q) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return quantile_sorted(sorted, q);
}

double mean(std::span<const double> values) {
    if (values.empty()) throw Error("mean: empty input");
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) return values.front();
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
    if (values.empty()) throw Error("sample_sd: empty input");
    if (values.size() == 1) return 0.0;
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) return 0.0;
    const double mu = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mu) * (v - mu);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

}  // namespace stats

}  // namespace fedlora
