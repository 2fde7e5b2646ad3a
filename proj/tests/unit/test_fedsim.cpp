#include "fedlora/fedsim.hpp"
#include "fedlora/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace fedlora;

namespace {

Split small_split(std::uint64_t seed, std::array<std::size_t, kMachineCount> counts = {60, 40, 30, 20}) {
    Rng rng(seed);
    FeatureFrame f;
    f.labels.emplace();
    for (auto m : kAllMachines) {
        for (std::size_t i = 0; i < counts[index_of(m)]; ++i) {
            const bool bad = rng.bernoulli(0.15);
            const double a = rng.uniform(-1, 1);
            FeatureRow r{a, 0.5 * a, -a, rng.uniform(-0.1, 0.1), double(index_of(m)) * 0.1};
            if (bad) r[3] += 4.0;
            f.push_back(r, m);
            f.labels->push_back(bad ? 1 : 0);
        }
    }
    return stratified_split(f, SplitSpec{});
}

FedConfig small_config() {
    FedConfig cfg;
    cfg.arch.hidden_sizes = {4};
    cfg.train.batch_size = 16;
    cfg.seed = 11;
    return cfg;
}

}  // namespace

TEST_CASE("fedavg: two clients with equal counts average elementwise") {
    const std::vector<ClientUpdate> u{{0, {1, 1}, 10}, {1, {3, 3}, 10}};
    CHECK(fedavg(u) == WeightVector{2, 2});
}

TEST_CASE("fedavg: weighted mean against a long double oracle") {
    Rng rng(1);
    for (int t = 0; t < 300; ++t) {
        const std::size_t k = 1 + rng.below(6), len = 1 + rng.below(40);
        std::vector<ClientUpdate> u(k);
        for (std::size_t i = 0; i < k; ++i) {
            u[i].client_id = i;
            u[i].samples = 1 + rng.below(5000);
            u[i].weights.resize(len);
            for (auto& w : u[i].weights) w = rng.uniform(-2, 2);
        }
        const WeightVector got = fedavg(u);
        for (std::size_t j = 0; j < len; ++j) {
            long double num = 0, den = 0, lo = INFINITY, hi = -INFINITY;
            for (const auto& x : u) {
                num += (long double)x.samples * x.weights[j];
                den += x.samples;
                lo = std::min<long double>(lo, x.weights[j]);
                hi = std::max<long double>(hi, x.weights[j]);
            }
            CHECK(std::abs((long double)got[j] - num / den) <= 1e-12L);
            CHECK(got[j] >= lo);
            CHECK(got[j] <= hi);
        }
    }
}

TEST_CASE("fedavg: order of updates does not matter; a single update is returned") {
    std::vector<ClientUpdate> u{{2, {0.1, 0.7}, 3}, {0, {0.3, -0.2}, 9}, {1, {-0.5, 0.4}, 5}};
    const WeightVector a = fedavg(u);
    std::reverse(u.begin(), u.end());
    CHECK(fedavg(u) == a);
    const std::vector<ClientUpdate> one{{4, {0.25, -1.5, 3.0}, 17}};
    CHECK(fedavg(one) == one[0].weights);
    const std::vector<ClientUpdate> same{{0, {0.1, 0.2}, 3}, {1, {0.1, 0.2}, 8}};
    CHECK(fedavg(same) == same[0].weights);
}

TEST_CASE("fedavg: bad inputs") {
    CHECK_THROWS_AS(fedavg(std::vector<ClientUpdate>{}), Error);
    CHECK_THROWS_AS(fedavg(std::vector<ClientUpdate>{{0, {1}, 1}, {1, {1, 2}, 1}}), Error);
    CHECK_THROWS_AS(fedavg(std::vector<ClientUpdate>{{0, {1}, 0}}), Error);
}

TEST_CASE("schedules: ten combinations with budget 80") {
    const auto s = paper_schedules();
    REQUIRE(s.size() == 10);
    for (const auto& x : s) CHECK(x.budget() == kEpochBudget);
    CHECK(std::find(s.begin(), s.end(), FLSchedule{20, 4}) != s.end());
    CHECK(FLSchedule{5, 16}.label() == "5/16");
    CHECK_THROWS_AS((FLSchedule{3, 20}.validate(kEpochBudget)), Error);
    CHECK_THROWS_AS((FLSchedule{0, 20}.validate()), Error);
    CHECK_NOTHROW((FLSchedule{3, 20}.validate()));
}

TEST_CASE("make_clients: one client per machine with local partitions") {
    const Split split = small_split(2);
    const auto clients = make_clients(split, small_config());
    REQUIRE(clients.size() == 4);
    std::size_t total = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(clients[i].id == i);
        CHECK(clients[i].machine == kAllMachines[i]);
        for (auto m : clients[i].train.machines) CHECK(m == clients[i].machine);
        total += clients[i].samples();
    }
    CHECK(total == split.train.size());
    const auto three = make_clients(small_split(2, {60, 0, 30, 20}), small_config());
    CHECK(three.size() == 3);
}

TEST_CASE("run_schedule: round counts and history rows") {
    const Split split = small_split(3);
    for (const FLSchedule s : {FLSchedule{80, 1}, FLSchedule{1, 8}}) {
        auto clients = make_clients(split, small_config());
        const ScheduleResult r = run_schedule(s, clients, small_config());
        CHECK(r.global.round == s.rounds);
        CHECK(r.global.loss_history.size() == s.rounds + 1);
        CHECK(r.history.size() == s.rounds * clients.size());
        for (const auto& c : clients) CHECK(c.optimizer.epochs_done == s.budget());
    }
}

TEST_CASE("run_schedule: a lone client equals local training") {
    const Split split = small_split(4, {80, 0, 0, 0});
    const FedConfig cfg = small_config();
    auto clients = make_clients(split, cfg);
    REQUIRE(clients.size() == 1);
    const ScheduleResult r = run_schedule(FLSchedule{3, 4}, clients, cfg);

    AutoencoderModel local = build_autoencoder(cfg.arch, cfg.seed);
    OptimizerState st;
    TrainConfig tc = cfg.train;
    tc.shuffle_seed = clients[0].stream_seed;
    for (int round = 0; round < 4; ++round) train_epochs(local, clients[0].train, tc, st, 3);
    CHECK(get_weights(local) == r.global.weights);
}

TEST_CASE("run_schedule: serial and parallel clients give identical globals") {
    const Split split = small_split(5);
    FedConfig a = small_config(), b = small_config();
    b.parallel_clients = false;
    auto ca = make_clients(split, a), cb = make_clients(split, b);
    const auto ra = run_schedule(FLSchedule{2, 3}, ca, a), rb = run_schedule(FLSchedule{2, 3}, cb, b);
    CHECK(ra.global.weights == rb.global.weights);
    CHECK(ra.global.loss_history == rb.global.loss_history);
}

TEST_CASE("pooled_training_loss is additive over clients") {
    const Split split = small_split(6);
    auto clients = make_clients(split, small_config());
    const AutoencoderModel m = build_autoencoder(small_config().arch, 1);
    double sum = 0;
    std::size_t n = 0;
    for (const auto& c : clients) {
        const double l = pooled_training_loss(m, std::span<const ClientState>(&c, 1));
        sum += l * double(c.samples());
        n += c.samples();
    }
    CHECK(pooled_training_loss(m, clients) == doctest::Approx(sum / double(n)));
}

TEST_CASE("threshold tuning: per-client results, skips and shared evaluation") {
    const Split split = small_split(7);
    auto clients = make_clients(split, small_config());
    const FedConfig cfg = small_config();
    const ScheduleResult r = run_schedule(FLSchedule{5, 2}, clients, cfg);
    const AutoencoderModel global = materialize(r.global, cfg.arch);

    clients[1].val = FeatureFrame{};
    clients[1].val.labels.emplace();
    const auto tuned = tune_client_thresholds(global, clients);
    REQUIRE(tuned.size() == 4);
    CHECK_FALSE(tuned[1].result.has_value());
    CHECK_FALSE(tuned[1].warning.empty());
    CHECK(clients[1].threshold == kReferenceThreshold);
    for (std::size_t i : {0, 2, 3}) {
        REQUIRE(tuned[i].result.has_value());
        CHECK(clients[i].threshold == tuned[i].result->threshold);
    }

    const auto own = evaluate_per_client(global, clients);
    const auto shared = evaluate_per_client(global, clients, 1e9);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(own[i].total() == clients[i].test.size());
        CHECK(shared[i].tn + shared[i].fn == 0);  // nothing exceeds 1e9
    }
    const ThresholdResult g = select_global_threshold(global, clients);
    CHECK(g.f1 >= 0.0);
}

TEST_CASE("round history CSV has a header and one row per client-round") {
    const Split split = small_split(8);
    auto clients = make_clients(split, small_config());
    const ScheduleResult r = run_schedule(FLSchedule{1, 3}, clients, small_config());
    std::ostringstream out;
    write_round_history_csv(out, r.history);
    const std::string text = out.str();
    CHECK(text.rfind("round,client,epochs,mean_loss,global_checksum\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 3 * 4);
}
