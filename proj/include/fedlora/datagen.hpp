#pragma once

#include "fedlora/common.hpp"
#include "fedlora/frame.hpp"
#include "fedlora/labeling.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fedlora {

/// One decoded telemetry message. A feature whose `valid` flag is false came
/// from the protocol's invalid sentinel (or was absent) and its value is
/// meaningless.
struct Record {
    std::int64_t timestamp = 0;  // unix seconds
    Machine machine = Machine::Manitou;
    FeatureRow values{};
    std::array<bool, kFeatureCount> valid{true, true, true, true, true};

    bool fully_valid() const noexcept;
    bool operator==(const Record&) const = default;
};

enum class Provenance { Csv, TtnJson, Synthetic };

std::string_view provenance_name(Provenance p) noexcept;

struct RecordSet {
    std::vector<Record> records;
    Provenance provenance = Provenance::Synthetic;

    std::size_t size() const noexcept { return records.size(); }
    std::array<std::size_t, kMachineCount> counts_by_machine() const noexcept;
    bool operator==(const RecordSet&) const = default;
};

// ---------------------------------------------------------------- CSV ingest

/// Column names for each mandatory field.
struct CsvSchema {
    std::string timestamp = "timestamp";
    std::string machine_id = "machine_id";
    std::array<std::string, kFeatureCount> features{"battery_v", "consumption_lph", "rpm", "water_c", "oil_bar"};
};

struct RejectedRow {
    std::size_t line = 0;  // 1-based, header is line 1
    std::string reason;
};

struct CsvIngest {
    RecordSet records;
    std::vector<RejectedRow> rejected;
};

/// A cell holding "FF" (any case) or nothing is the invalid-data sentinel.
bool is_invalid_sentinel(std::string_view cell) noexcept;

CsvIngest ingest_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
CsvIngest ingest_csv_text(std::string_view text, const CsvSchema& schema = {});

void write_csv(const RecordSet& rs, const std::filesystem::path& path);

// ------------------------------------------------------- TTN uplink adapter

Record decode_ttn_uplink(std::string_view json_text);

/// Inverse of decode_ttn_uplink; invalid features are omitted from the payload.
std::string encode_ttn_uplink(const Record& r);

/// Ingests a file holding either one uplink object, a JSON array of them, or
/// one object per line.
RecordSet ingest_ttn_file(const std::filesystem::path& path);

std::int64_t parse_rfc3339(std::string_view text);
std::string format_rfc3339(std::int64_t unix_seconds);

// ------------------------------------------------------------------ cleaning

struct CleanResult {
    RecordSet records;
    std::size_t removed_bad_timestamp = 0;
    std::size_t removed_invalid_feature = 0;

    std::size_t removed() const noexcept { return removed_bad_timestamp + removed_invalid_feature; }
};

/// Drops records with a non-positive timestamp first, then records with any
/// invalid feature. Each removed record is counted under one reason.
CleanResult clean(const RecordSet& rs);

FeatureFrame select_features(const RecordSet& rs);

// ----------------------------------------------------------- synthetic data

struct GenConfig {
    std::array<std::size_t, kMachineCount> counts{10150, 11507, 6677, 388};
    double anomaly_fraction = 0.1644;
    RangeSpec ranges = RangeSpec::defaults();
    std::uint64_t seed = 42;

    void validate() const;

    /// Scales every per-machine count by `factor`, rounding to nearest.
    GenConfig scaled(double factor) const;
};

inline constexpr std::int64_t kSyntheticEpoch = 1651363200;  // 2022-05-01T00:00:00Z

/// Normal instances sample every feature uniformly inside the machine's
/// range. Anomalous ones displace one uniformly chosen feature into a band
/// 10-50% of the range width beyond a uniformly chosen bound.
RecordSet generate_synthetic(const GenConfig& cfg);

}  // namespace fedlora
