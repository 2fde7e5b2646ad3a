#include "fedlora/lorawan.hpp"
#include "fedlora/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace fedlora;
using namespace fedlora::lorawan;

namespace {

std::size_t msgs(double bytes, std::size_t rounds, int sf, Convention c) {
    return messages_required({bytes, rounds, profile(sf), c});
}

}  // namespace

TEST_CASE("profiles: payloads and periodicity per SF") {
    const std::size_t payload[] = {222, 222, 115, 115, 51, 51};
    const double period[] = {6.2, 11.3, 20.6, 41.2, 82.3, 148.3};
    for (int sf = 7; sf <= 12; ++sf) {
        CHECK(profile(sf).max_payload == payload[sf - 7]);
        CHECK(profile(sf).min_periodicity == period[sf - 7]);
    }
    CHECK(all_profiles().size() == 6);
    CHECK_THROWS_AS(profile(6), Error);
    CHECK_THROWS_AS(profile(13), Error);
}

TEST_CASE("messages: reference figures") {
    CHECK(msgs(724, 1, 7, Convention::PerRound) == 4);
    CHECK(msgs(kb_to_bytes(1.39), 80, 7, Convention::Total) == 513);
    CHECK(msgs(kb_to_bytes(1.39), 80, 11, Convention::Total) == 2233);
    CHECK(msgs(kb_to_bytes(5.52), 80, 12, Convention::Total) == 8867);
    CHECK(training_hours(513, profile(7)) == doctest::Approx(0.8835).epsilon(1e-4));
    CHECK(training_hours(100, profile(12)) == doctest::Approx(4.1194).epsilon(1e-4));
    CHECK(training_hours(0, profile(9)) == 0.0);
}

TEST_CASE("messages: exact multiples do not round up") {
    CHECK(msgs(222, 1, 7, Convention::PerRound) == 1);
    CHECK(msgs(444, 3, 8, Convention::PerRound) == 6);
    CHECK(msgs(51 * 0.1, 10, 11, Convention::Total) == 1);  // 5.1·10/51 is 1 up to rounding
}

TEST_CASE("messages: total never exceeds per-round; both grow with size and rounds") {
    Rng rng(1);
    for (int t = 0; t < 2000; ++t) {
        const double bytes = 1 + rng.below(20000);
        const std::size_t rounds = 1 + rng.below(100);
        const int sf = 7 + int(rng.below(6));
        const std::size_t per = msgs(bytes, rounds, sf, Convention::PerRound);
        const std::size_t tot = msgs(bytes, rounds, sf, Convention::Total);
        CHECK(tot <= per);
        CHECK(tot >= std::size_t(std::ceil(bytes * rounds / profile(sf).max_payload - 1e-9)));
        CHECK(msgs(bytes + 1, rounds, sf, Convention::PerRound) >= per);
        CHECK(msgs(bytes, rounds + 1, sf, Convention::Total) >= tot);
        if (sf < 12) CHECK(msgs(bytes, rounds, sf + 1, Convention::PerRound) >= per);
    }
}

TEST_CASE("messages: invalid requests") {
    CHECK_THROWS_AS(msgs(0, 1, 7, Convention::PerRound), Error);
    CHECK_THROWS_AS(msgs(100, 0, 7, Convention::Total), Error);
    CHECK_THROWS_AS(msgs(NAN, 1, 7, Convention::Total), Error);
}

TEST_CASE("fragmentation: full fragments then the rest") {
    const auto f = fragmentation_plan(1428, profile(7));
    CHECK(f == std::vector<std::size_t>{222, 222, 222, 222, 222, 222, 96});
    CHECK(fragmentation_plan(444, profile(8)) == std::vector<std::size_t>{222, 222});
    CHECK_THROWS_AS(fragmentation_plan(0, profile(7)), Error);
    for (std::size_t b = 1; b < 3000; b += 7) {
        for (int sf : {7, 9, 12}) {
            const auto p = fragmentation_plan(b, profile(sf));
            CHECK(std::accumulate(p.begin(), p.end(), std::size_t{0}) == b);
            CHECK(p.size() == msgs(double(b), 1, sf, Convention::PerRound));
        }
    }
}

TEST_CASE("sizes: architecture and printed KB") {
    ArchSpec arch;
    arch.hidden_sizes = {32};
    const SizeSource s = SizeSource::from_arch(arch);
    CHECK(s.params == 357);
    CHECK(s.bytes == 1428.0);
    const auto table = table_sizes_kb();
    REQUIRE(table.size() == 4);
    CHECK(table[1].bytes == doctest::Approx(1423.36));
    CHECK(table[3].params == 1413);
}

TEST_CASE("plan table and CSV") {
    const auto sizes = table_sizes_kb();
    const int sfs[] = {7, 12};
    const std::size_t rounds[] = {1, 80};
    const auto rows = plan_table(sizes, sfs, rounds, Convention::Total);
    CHECK(rows.size() == 16);
    std::ostringstream out;
    write_plan_csv(out, rows);
    const std::string text = out.str();
    CHECK(text.find("kb[1.39],32,357,1423.36,7,80,total,513,0.8835\n") != std::string::npos);
    CHECK(parse_convention("total") == Convention::Total);
    CHECK_FALSE(parse_convention("sum").has_value());
}
