#include "fedlora/datagen.hpp"
#include "fedlora/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fedlora {

bool Record::fully_valid() const noexcept {
    return std::all_of(valid.begin(), valid.end(), [](bool v) { return v; });
}

std::string_view provenance_name(Provenance p) noexcept {
    switch (p) {
        case Provenance::Csv: return "csv";
        case Provenance::TtnJson: return "ttn_json";
        case Provenance::Synthetic: return "synthetic";
    }
    return "?";
}

std::array<std::size_t, kMachineCount> RecordSet::counts_by_machine() const noexcept {
    std::array<std::size_t, kMachineCount> counts{};
    for (const auto& r : records) ++counts[index_of(r.machine)];
    return counts;
}

// ---------------------------------------------------------------------- CSV

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.emplace_back(trim(cell));
            cell.clear();
        } else {
            cell.push_back(c);
        }
    }
    cells.emplace_back(trim(cell));
    return cells;
}

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<std::int64_t> parse_timestamp_cell(std::string_view s) {
    if (auto v = parse_double(s)) {
        if (std::floor(*v) != *v) return std::nullopt;
        return static_cast<std::int64_t>(*v);
    }
    try {
        return parse_rfc3339(trim(s));
    } catch (const Error&) {
        return std::nullopt;
    }
}

}  // namespace

bool is_invalid_sentinel(std::string_view cell) noexcept {
    cell = trim(cell);
    return cell.empty() || ((cell.size() == 2) && (cell[0] == 'F' || cell[0] == 'f') && (cell[1] == 'F' || cell[1] == 'f'));
}

CsvIngest ingest_csv_text(std::string_view text, const CsvSchema& schema) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line)) throw Error("ingest_csv: missing header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

    const auto header = split_csv_line(line);
    auto column = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw Error("ingest_csv: missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t ts_col = column(schema.timestamp);
    const std::size_t id_col = column(schema.machine_id);
    std::array<std::size_t, kFeatureCount> feature_cols{};
    for (std::size_t f = 0; f < kFeatureCount; ++f) feature_cols[f] = column(schema.features[f]);

    CsvIngest out;
    out.records.provenance = Provenance::Csv;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            out.rejected.push_back({line_no, "expected " + std::to_string(header.size()) + " cells, got " +
                                                 std::to_string(cells.size())});
            continue;
        }
        Record r;
        const auto ts = parse_timestamp_cell(cells[ts_col]);
        if (!ts) {
            out.rejected.push_back({line_no, "unparseable timestamp '" + cells[ts_col] + "'"});
            continue;
        }
        r.timestamp = *ts;
        const auto machine = parse_machine(cells[id_col]);
        if (!machine) {
            out.rejected.push_back({line_no, "unknown machine '" + cells[id_col] + "'"});
            continue;
        }
        r.machine = *machine;
        bool ok = true;
        for (std::size_t f = 0; f < kFeatureCount && ok; ++f) {
            const std::string& cell = cells[feature_cols[f]];
            if (is_invalid_sentinel(cell)) {
                r.valid[f] = false;
                r.values[f] = 0.0;
            } else if (auto v = parse_double(cell)) {
                r.values[f] = *v;
            } else {
                out.rejected.push_back({line_no, "unparseable " + schema.features[f] + " '" + cell + "'"});
                ok = false;
            }
        }
        if (ok) out.records.records.push_back(r);
    }
    if (out.records.records.empty()) throw Error("ingest_csv: zero parseable rows");
    return out;
}

CsvIngest ingest_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("ingest_csv: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return ingest_csv_text(buf.str(), schema);
}

void write_csv(const RecordSet& rs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("write_csv: cannot open " + path.string());
    out << "timestamp,machine_id,battery_v,consumption_lph,rpm,water_c,oil_bar\n";
    char buf[32];
    for (const auto& r : rs.records) {
        out << r.timestamp << ',' << machine_name(r.machine);
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            out << ',';
            if (!r.valid[f]) {
                out << "FF";
                continue;
            }
            auto [end, ec] = std::to_chars(buf, buf + sizeof buf, r.values[f]);
            out.write(buf, end - buf);
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------- TTN

std::int64_t parse_rfc3339(std::string_view text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    int consumed = 0;
    const std::string str(text);
    if (std::sscanf(str.c_str(), "%4d-%2d-%2d%*1[Tt ]%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &s, &consumed) != 6) {
        throw Error("parse_rfc3339: malformed timestamp '" + str + "'");
    }
    std::string_view rest = text.substr(static_cast<std::size_t>(consumed));
    if (!rest.empty() && rest.front() == '.') {
        rest.remove_prefix(1);
        while (!rest.empty() && rest.front() >= '0' && rest.front() <= '9') rest.remove_prefix(1);
    }
    std::int64_t offset = 0;
    if (rest == "Z" || rest == "z") {
        offset = 0;
    } else if (rest.size() == 6 && (rest[0] == '+' || rest[0] == '-') && rest[3] == ':') {
        const int oh = (rest[1] - '0') * 10 + (rest[2] - '0');
        const int om = (rest[4] - '0') * 10 + (rest[5] - '0');
        offset = (rest[0] == '+' ? 1 : -1) * (oh * 3600 + om * 60);
    } else {
        throw Error("parse_rfc3339: bad zone in '" + str + "'");
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 60) throw Error("parse_rfc3339: out-of-range field in '" + str + "'");
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + s - offset;
}

std::string format_rfc3339(std::int64_t unix_seconds) {
    using namespace std::chrono;
    const auto day_count = static_cast<int>(std::floor(static_cast<double>(unix_seconds) / 86400.0));
    const std::int64_t secs = unix_seconds - static_cast<std::int64_t>(day_count) * 86400;
    const year_month_day ymd{sys_days{days{day_count}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(secs / 3600),
                  static_cast<int>((secs / 60) % 60), static_cast<int>(secs % 60));
    return buf;
}

namespace {

Record decode_uplink(const nlohmann::json& doc) {
    if (!doc.is_object()) throw Error("decode_ttn_uplink: document is not an object");
    const auto ids = doc.find("end_device_ids");
    if (ids == doc.end() || !ids->is_object() || !ids->contains("device_id") || !(*ids)["device_id"].is_string()) {
        throw Error("decode_ttn_uplink: missing end_device_ids.device_id");
    }
    const auto device = (*ids)["device_id"].get<std::string>();
    const auto machine = parse_machine(device);
    if (!machine) throw Error("decode_ttn_uplink: unknown device '" + device + "'");

    const auto at = doc.find("received_at");
    if (at == doc.end() || !at->is_string()) throw Error("decode_ttn_uplink: missing received_at");

    Record r;
    r.machine = *machine;
    r.timestamp = parse_rfc3339(at->get<std::string>());

    const nlohmann::json* payload = nullptr;
    if (auto up = doc.find("uplink_message"); up != doc.end() && up->is_object()) {
        if (auto dp = up->find("decoded_payload"); dp != up->end() && dp->is_object()) payload = &*dp;
    }
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        const std::string key(feature_name(static_cast<Feature>(f)));
        r.valid[f] = false;
        r.values[f] = 0.0;
        if (!payload) continue;
        auto it = payload->find(key);
        if (it == payload->end()) continue;
        if (it->is_number()) {
            r.values[f] = it->get<double>();
            r.valid[f] = std::isfinite(r.values[f]);
            if (!r.valid[f]) r.values[f] = 0.0;
        }
        // Strings ("FF") and nulls stay invalid.
    }
    return r;
}

}  // namespace

Record decode_ttn_uplink(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(std::string("decode_ttn_uplink: malformed JSON: ") + e.what());
    }
    return decode_uplink(doc);
}

std::string encode_ttn_uplink(const Record& r) {
    nlohmann::ordered_json payload = nlohmann::ordered_json::object();
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        if (r.valid[f]) payload[std::string(feature_name(static_cast<Feature>(f)))] = r.values[f];
    }
    nlohmann::ordered_json doc;
    doc["end_device_ids"]["device_id"] = std::string(machine_name(r.machine));
    doc["received_at"] = format_rfc3339(r.timestamp);
    doc["uplink_message"]["decoded_payload"] = payload;
    return doc.dump();
}

RecordSet ingest_ttn_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("ingest_ttn_file: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();

    RecordSet rs;
    rs.provenance = Provenance::TtnJson;
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (!doc.is_discarded()) {
        if (doc.is_array()) {
            for (const auto& item : doc) rs.records.push_back(decode_uplink(item));
        } else {
            rs.records.push_back(decode_uplink(doc));
        }
    } else {
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            if (trim(line).empty()) continue;
            rs.records.push_back(decode_ttn_uplink(line));
        }
    }
    if (rs.records.empty()) throw Error("ingest_ttn_file: no uplinks in " + path.string());
    return rs;
}

// ----------------------------------------------------------------- cleaning

CleanResult clean(const RecordSet& rs) {
    CleanResult out;
    out.records.provenance = rs.provenance;
    for (const auto& r : rs.records) {
        if (r.timestamp <= 0) {
            ++out.removed_bad_timestamp;
        } else if (!r.fully_valid()) {
            ++out.removed_invalid_feature;
        } else {
            out.records.records.push_back(r);
        }
    }
    return out;
}

FeatureFrame select_features(const RecordSet& rs) {
    if (rs.records.empty()) throw Error("select_features: empty input");
    FeatureFrame frame;
    frame.rows.reserve(rs.size());
    frame.machines.reserve(rs.size());
    for (const auto& r : rs.records) frame.push_back(r.values, r.machine);
    return frame;
}

// ---------------------------------------------------------------- synthetic

void GenConfig::validate() const {
    if (!(anomaly_fraction >= 0.0 && anomaly_fraction <= 1.0)) throw Error("GenConfig: anomaly_fraction outside [0, 1]");
    for (auto m : kAllMachines) {
        if (counts[index_of(m)] == 0) continue;
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            const auto& r = ranges.at(m, static_cast<Feature>(f));
            if (!r) throw Error("GenConfig: missing range for " + std::string(machine_name(m)));
            if (!(r->lower < r->upper)) throw Error("GenConfig: range needs lower < upper");
        }
    }
}

GenConfig GenConfig::scaled(double factor) const {
    if (!(factor > 0.0)) throw Error("GenConfig::scaled: factor must be positive");
    GenConfig out = *this;
    for (auto& c : out.counts) c = static_cast<std::size_t>(std::llround(static_cast<double>(c) * factor));
    return out;
}

RecordSet generate_synthetic(const GenConfig& cfg) {
    cfg.validate();
    RecordSet rs;
    rs.provenance = Provenance::Synthetic;
    std::size_t total = 0;
    for (auto c : cfg.counts) total += c;
    rs.records.reserve(total);

    Rng rng(cfg.seed);
    for (auto m : kAllMachines) {
        const std::size_t n = cfg.counts[index_of(m)];
        for (std::size_t i = 0; i < n; ++i) {
            Record r;
            r.machine = m;
            r.timestamp = kSyntheticEpoch + static_cast<std::int64_t>(i) * 60;
            for (std::size_t f = 0; f < kFeatureCount; ++f) {
                const Range& range = cfg.ranges.require(m, static_cast<Feature>(f));
                r.values[f] = rng.uniform(range.lower, range.upper);
            }
            if (rng.bernoulli(cfg.anomaly_fraction)) {
                const std::size_t f = rng.below(kFeatureCount);
                const Range& range = cfg.ranges.require(m, static_cast<Feature>(f));
                const double offset = rng.uniform(0.1, 0.5) * range.width();
                r.values[f] = rng.bernoulli(0.5) ? range.lower - offset : range.upper + offset;
            }
            rs.records.push_back(r);
        }
    }
    return rs;
}

}  // namespace fedlora
