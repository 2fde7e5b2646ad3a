#include "fedlora/lorawan.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace fedlora::lorawan {

Profile profile(int sf) {
    switch (sf) {
        case 7: return {7, 222, 6.2};
        case 8: return {8, 222, 11.3};
        case 9: return {9, 115, 20.6};
        case 10: return {10, 115, 41.2};
        case 11: return {11, 51, 82.3};
        case 12: return {12, 51, 148.3};
        default: throw Error("lorawan: spreading factor must be 7..12, got " + std::to_string(sf));
    }
}

std::vector<Profile> all_profiles() {
    std::vector<Profile> out;
    for (int sf = kMinSf; sf <= kMaxSf; ++sf) out.push_back(profile(sf));
    return out;
}

std::string_view convention_name(Convention c) noexcept {
    return c == Convention::PerRound ? "per_round" : "total";
}

std::optional<Convention> parse_convention(std::string_view text) noexcept {
    if (text == "per_round") return Convention::PerRound;
    if (text == "total") return Convention::Total;
    return std::nullopt;
}

void PlanRequest::validate() const {
    if (!(model_bytes > 0.0) || !std::isfinite(model_bytes)) throw Error("PlanRequest: model size must be positive");
    if (rounds == 0) throw Error("PlanRequest: rounds must be >= 1");
    if (profile.max_payload == 0 || !(profile.min_periodicity > 0.0)) throw Error("PlanRequest: invalid profile");
}

namespace {

// Ceiling that absorbs representation error in quotients meant to be whole.
std::size_t ceil_div(double num, double den) {
    const double q = num / den;
    const double nearest = std::round(q);
    if (std::abs(q - nearest) <= 1e-9 * std::max(1.0, nearest)) return static_cast<std::size_t>(nearest);
    return static_cast<std::size_t>(std::ceil(q));
}

}  // namespace

std::size_t messages_required(const PlanRequest& req) {
    req.validate();
    const auto payload = static_cast<double>(req.profile.max_payload);
    const auto rounds = static_cast<double>(req.rounds);
    if (req.convention == Convention::PerRound) return ceil_div(req.model_bytes, payload) * req.rounds;
    return ceil_div(req.model_bytes * rounds, payload);
}

double training_hours(std::size_t messages, const Profile& p) noexcept {
    return static_cast<double>(messages) * p.min_periodicity / 3600.0;
}

std::vector<std::size_t> fragmentation_plan(std::size_t model_bytes, const Profile& p) {
    if (model_bytes == 0) throw Error("fragmentation_plan: model size must be positive");
    std::vector<std::size_t> out(model_bytes / p.max_payload, p.max_payload);
    if (const std::size_t rest = model_bytes % p.max_payload; rest != 0) out.push_back(rest);
    return out;
}

SizeSource SizeSource::from_arch(const ArchSpec& arch) {
    SizeSource s;
    std::string label;
    for (auto h : arch.hidden_sizes) label += (label.empty() ? "" : "-") + std::to_string(h);
    s.label = "ae[" + label + "]";
    s.hidden = arch.hidden_sizes.front();
    s.params = param_count(arch);
    s.bytes = static_cast<double>(s.params * 4);
    return s;
}

SizeSource SizeSource::from_kb(std::string label, double kb, std::size_t hidden, std::size_t params) {
    return {std::move(label), hidden, params, kb_to_bytes(kb)};
}

std::vector<SizeSource> table_sizes_kb() {
    return {SizeSource::from_kb("kb[0.70]", 0.70, 16, 181), SizeSource::from_kb("kb[1.39]", 1.39, 32, 357),
            SizeSource::from_kb("kb[2.77]", 2.77, 64, 709), SizeSource::from_kb("kb[5.52]", 5.52, 128, 1413)};
}

std::vector<PlanRow> plan_table(std::span<const SizeSource> sizes, std::span<const int> sfs,
                                std::span<const std::size_t> rounds, Convention convention) {
    std::vector<PlanRow> rows;
    rows.reserve(sizes.size() * sfs.size() * rounds.size());
    for (const auto& size : sizes) {
        for (int sf : sfs) {
            const Profile p = profile(sf);
            for (auto rd : rounds) {
                PlanRow row{size, sf, rd, convention, 0, 0.0, 0};
                row.messages = messages_required({size.bytes, rd, p, convention});
                row.hours = training_hours(row.messages, p);
                row.downlink_messages = row.messages;
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

void write_plan_csv(std::ostream& out, std::span<const PlanRow> rows) {
    out << "arch,hidden,params,bytes,sf,rounds,convention,messages,hours\n";
    char buf[64];
    for (const auto& r : rows) {
        out << r.size.label << ',' << r.size.hidden << ',' << r.size.params << ',';
        std::snprintf(buf, sizeof buf, "%.2f", r.size.bytes);
        out << buf << ',' << r.sf << ',' << r.rounds << ',' << convention_name(r.convention) << ',' << r.messages << ',';
        std::snprintf(buf, sizeof buf, "%.4f", r.hours);
        out << buf << '\n';
    }
}

}  // namespace fedlora::lorawan
