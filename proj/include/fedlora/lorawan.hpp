#pragma once

#include "fedlora/autonet.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedlora::lorawan {

/// EU868 uplink limits per spreading factor.
struct Profile {
    int sf = 7;
    std::size_t max_payload = 222;  // bytes, excluding the 13-byte header
    double min_periodicity = 6.2;   // seconds between messages
    std::size_t header_bytes = 13;  // informational

    bool operator==(const Profile&) const = default;
};

inline constexpr int kMinSf = 7;
inline constexpr int kMaxSf = 12;

/// SF7/8 -> 222 B, SF9/10 -> 115 B, SF11/12 -> 51 B; periodicity 6.2, 11.3,
/// 20.6, 41.2, 82.3, 148.3 s. Throws outside 7..12.
Profile profile(int sf);
std::vector<Profile> all_profiles();

/// per_round: ceil(size / payload) · rounds. total: ceil(size · rounds / payload).
enum class Convention { PerRound, Total };

std::string_view convention_name(Convention c) noexcept;
std::optional<Convention> parse_convention(std::string_view text) noexcept;

struct PlanRequest {
    double model_bytes = 0.0;  // real-valued so rounded-KB sizes (x1024) work
    std::size_t rounds = 1;
    Profile profile;
    Convention convention = Convention::PerRound;

    void validate() const;
};

inline double kb_to_bytes(double kb) noexcept { return kb * 1024.0; }

std::size_t messages_required(const PlanRequest& req);

/// Minimum hours to send `messages` uplinks at the profile's periodicity.
double training_hours(std::size_t messages, const Profile& p) noexcept;

/// Fragment sizes for one transfer: all full except possibly the last.
std::vector<std::size_t> fragmentation_plan(std::size_t model_bytes, const Profile& p);

/// A model size feeding the plan: from an architecture (exact float32
/// payload) or an explicit size in KB.
struct SizeSource {
    std::string label;
    std::size_t hidden = 0;  // 0 when not derived from an architecture
    std::size_t params = 0;
    double bytes = 0.0;

    static SizeSource from_arch(const ArchSpec& arch);
    static SizeSource from_kb(std::string label, double kb, std::size_t hidden = 0, std::size_t params = 0);
};

/// The single-hidden-layer sizes as printed in two-decimal KB: 0.70, 1.39,
/// 2.77, 5.52.
std::vector<SizeSource> table_sizes_kb();

struct PlanRow {
    SizeSource size;
    int sf = 7;
    std::size_t rounds = 1;
    Convention convention = Convention::PerRound;
    std::size_t messages = 0;
    double hours = 0.0;
    std::size_t downlink_messages = 0;  // server -> client, same fragmentation; not part of `messages`
};

std::vector<PlanRow> plan_table(std::span<const SizeSource> sizes, std::span<const int> sfs,
                                std::span<const std::size_t> rounds, Convention convention);

/// Columns: arch,hidden,params,bytes,sf,rounds,convention,messages,hours
void write_plan_csv(std::ostream& out, std::span<const PlanRow> rows);

}  // namespace fedlora::lorawan
