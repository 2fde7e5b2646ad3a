#include "fedlora/fedsim.hpp"
#include "fedlora/kernels.hpp"
#include "fedlora/rng.hpp"
#include "fedlora/stats.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

namespace fedlora {

WeightVector fedavg(std::span<const ClientUpdate> updates) {
    if (updates.empty()) throw Error("fedavg: no updates");
    const std::size_t length = updates.front().weights.size();
    for (const auto& u : updates) {
        if (u.weights.size() != length) throw Error("fedavg: weight vector length mismatch");
        if (u.samples == 0) throw Error("fedavg: non-positive sample count");
    }

    std::vector<const ClientUpdate*> ordered;
    for (const auto& u : updates) ordered.push_back(&u);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const ClientUpdate* a, const ClientUpdate* b) { return a->client_id < b->client_id; });

    const bool equal_counts = std::all_of(ordered.begin(), ordered.end(),
                                          [&](const ClientUpdate* u) { return u->samples == ordered.front()->samples; });
    std::vector<std::vector<double>> vectors;
    std::vector<double> coeff;
    double divisor = 0.0;
    vectors.reserve(ordered.size());
    for (const auto* u : ordered) {
        vectors.push_back(u->weights);
        const double c = equal_counts ? 1.0 : static_cast<double>(u->samples);
        coeff.push_back(c);
        divisor += c;
    }

    WeightVector out(length);
    kernels::weighted_sum(vectors, coeff, divisor, out);
    for (std::size_t j = 0; j < length; ++j) {
        double lo = vectors.front()[j], hi = lo;
        for (const auto& v : vectors) {
            lo = std::min(lo, v[j]);
            hi = std::max(hi, v[j]);
        }
        out[j] = std::clamp(out[j], lo, hi);
    }
    return out;
}

void FLSchedule::validate(std::optional<std::size_t> budget) const {
    if (epochs_per_round == 0 || rounds == 0) throw Error("FLSchedule: epochs per round and rounds must be >= 1");
    if (budget && this->budget() != *budget) {
        throw Error("FLSchedule " + label() + ": epochs x rounds must equal " + std::to_string(*budget));
    }
}

std::string FLSchedule::label() const { return std::to_string(epochs_per_round) + "/" + std::to_string(rounds); }

std::vector<FLSchedule> paper_schedules() {
    return {{1, 80}, {2, 40}, {4, 20}, {5, 16}, {8, 10}, {10, 8}, {16, 5}, {20, 4}, {40, 2}, {80, 1}};
}

std::vector<ClientState> make_clients(const Split& split, const FedConfig& cfg) {
    std::vector<ClientState> clients;
    for (auto m : kAllMachines) {
        FeatureFrame train = split.train.only(m);
        if (train.empty()) continue;
        ClientState c;
        c.id = clients.size();
        c.machine = m;
        c.train = std::move(train);
        c.val = split.val.only(m);
        c.test = split.test.only(m);
        c.model = build_autoencoder(cfg.arch, derive_seed(cfg.seed, {index_of(m), 0xC11E27}));
        c.stream_seed = derive_seed(cfg.seed, {index_of(m)});
        clients.push_back(std::move(c));
    }
    if (clients.empty()) throw Error("make_clients: no client has training data");
    return clients;
}

RoundOutcome run_round(GlobalModel& global, std::vector<ClientState>& clients, std::size_t epochs,
                       const FedConfig& cfg) {
    if (clients.empty()) throw Error("run_round: no clients");
    for (const auto& c : clients) {
        if (c.model.param_count() != global.weights.size()) throw Error("run_round: client architecture differs");
    }

    RoundOutcome outcome;
    outcome.client_losses.resize(clients.size());
    const auto n = static_cast<std::ptrdiff_t>(clients.size());
    const bool parallel = cfg.parallel_clients && kernels::parallel_enabled();
    std::vector<std::string> errors(clients.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        auto& c = clients[static_cast<std::size_t>(i)];
        try {
            set_weights(c.model, global.weights);
            TrainConfig local = cfg.train;
            local.shuffle_seed = c.stream_seed;
            outcome.client_losses[static_cast<std::size_t>(i)] = train_epochs(c.model, c.train, local, c.optimizer, epochs);
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = e.what();
        }
    }
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i].empty()) throw Error("run_round: client " + std::to_string(i) + ": " + errors[i]);
    }

    std::vector<ClientUpdate> updates;
    updates.reserve(clients.size());
    for (const auto& c : clients) updates.push_back({c.id, get_weights(c.model), c.samples()});
    global.weights = fedavg(updates);
    ++global.round;
    return outcome;
}

AutoencoderModel materialize(const GlobalModel& global, const ArchSpec& arch) {
    AutoencoderModel model = build_autoencoder(arch, 0);
    set_weights(model, global.weights);
    return model;
}

double pooled_training_loss(const AutoencoderModel& model, std::span<const ClientState> clients) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& c : clients) {
        const auto errors = reconstruction_errors(model, c.train);
        for (double e : errors) sum += e;
        count += errors.size();
    }
    if (count == 0) throw Error("pooled_training_loss: no training data");
    return sum / static_cast<double>(count);
}

ScheduleResult run_schedule(const FLSchedule& schedule, std::vector<ClientState>& clients, const FedConfig& cfg) {
    schedule.validate();
    ScheduleResult result;
    AutoencoderModel probe = build_autoencoder(cfg.arch, cfg.seed);
    result.global.weights = get_weights(probe);
    result.global.loss_history.push_back(pooled_training_loss(probe, clients));

    for (std::size_t r = 0; r < schedule.rounds; ++r) {
        const RoundOutcome outcome = run_round(result.global, clients, schedule.epochs_per_round, cfg);
        set_weights(probe, result.global.weights);
        result.global.loss_history.push_back(pooled_training_loss(probe, clients));
        const std::uint64_t checksum = fnv1a64(serialize(probe));
        for (std::size_t i = 0; i < clients.size(); ++i) {
            const auto& losses = outcome.client_losses[i];
            result.history.push_back({result.global.round, clients[i].id, clients[i].machine, schedule.epochs_per_round,
                                      losses.empty() ? 0.0 : stats::mean(losses), checksum});
        }
    }
    return result;
}

std::vector<ClientThreshold> tune_client_thresholds(const AutoencoderModel& global, std::vector<ClientState>& clients) {
    std::vector<ClientThreshold> out;
    for (auto& c : clients) {
        ClientThreshold t;
        t.client = c.id;
        t.machine = c.machine;
        if (c.val.empty()) {
            t.warning = "client " + std::string(machine_name(c.machine)) + " has no validation data; skipped";
            out.push_back(std::move(t));
            continue;
        }
        const auto errors = reconstruction_errors(global, c.val);
        t.result = select_threshold(errors, c.val.require_labels("tune_client_thresholds"));
        if (t.result->degenerate) {
            t.warning = "client " + std::string(machine_name(c.machine)) + " validation labels hold a single class";
        }
        c.threshold = t.result->threshold;
        out.push_back(std::move(t));
    }
    return out;
}

ThresholdResult select_global_threshold(const AutoencoderModel& global, std::span<const ClientState> clients) {
    std::vector<double> errors;
    Flags labels;
    for (const auto& c : clients) {
        if (c.val.empty()) continue;
        const auto e = reconstruction_errors(global, c.val);
        const auto& l = c.val.require_labels("select_global_threshold");
        errors.insert(errors.end(), e.begin(), e.end());
        labels.insert(labels.end(), l.begin(), l.end());
    }
    return select_threshold(errors, labels);
}

ConfusionMatrix evaluate_global(const AutoencoderModel& global, const FeatureFrame& test, double threshold) {
    const auto& labels = test.require_labels("evaluate_global");
    const auto errors = reconstruction_errors(global, test);
    return confusion(labels, classify(errors, threshold));
}

std::vector<ConfusionMatrix> evaluate_per_client(const AutoencoderModel& global, std::span<const ClientState> clients,
                                                 std::optional<double> shared) {
    std::vector<ConfusionMatrix> out;
    out.reserve(clients.size());
    for (const auto& c : clients) out.push_back(evaluate_global(global, c.test, shared.value_or(c.threshold)));
    return out;
}

void write_round_history_csv(std::ostream& out, std::span<const RoundRecord> history) {
    out << "round,client,epochs,mean_loss,global_checksum\n";
    char buf[64];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(r.checksum));
        out << r.round << ',' << machine_name(r.machine) << ',' << r.epochs << ',' << r.mean_loss << ',' << buf
            << '\n';
    }
}

}  // namespace fedlora
