#include "fedlora/experiment.hpp"
#include "fedlora/kernels.hpp"
#include "fedlora/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace fedlora {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Consumes keys from one JSON object and rejects whatever is left over.
class Reader {
public:
    Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw Error("config: " + where_ + " must be an object");
    }

    const json* get(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    template <class T>
    void read(const std::string& key, T& out) {
        if (const json* v = get(key)) {
            try {
                out = v->get<T>();
            } catch (const json::exception& e) {
                throw Error("config: " + where_ + "." + key + ": " + e.what());
            }
        }
    }

    std::string path(const std::string& key) const { return where_ + "." + key; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw Error("config: unknown key " + where_ + "." + it.key());
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

FLSchedule parse_schedule(const json& v, const std::string& where) {
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        const auto slash = s.find('/');
        if (slash == std::string::npos) throw Error("config: " + where + ": schedule must look like E/R");
        try {
            return {std::stoul(s.substr(0, slash)), std::stoul(s.substr(slash + 1))};
        } catch (const std::exception&) {
            throw Error("config: " + where + ": bad schedule '" + s + "'");
        }
    }
    if (v.is_array() && v.size() == 2) return {v[0].get<std::size_t>(), v[1].get<std::size_t>()};
    throw Error("config: " + where + ": schedule must be \"E/R\" or [E, R]");
}

template <class Enum, class Parse>
Enum parse_enum(const json* v, Enum fallback, Parse parse, const std::string& where) {
    if (!v) return fallback;
    if (!v->is_string()) throw Error("config: " + where + " must be a string");
    const auto text = v->get<std::string>();
    const auto parsed = parse(text);
    if (!parsed) throw Error("config: " + where + ": unknown value '" + text + "'");
    return *parsed;
}

std::optional<DataSource> parse_source(std::string_view s) {
    if (s == "synthetic") return DataSource::Synthetic;
    if (s == "csv") return DataSource::Csv;
    if (s == "ttn") return DataSource::Ttn;
    return std::nullopt;
}
std::string_view source_name(DataSource s) {
    switch (s) {
        case DataSource::Synthetic: return "synthetic";
        case DataSource::Csv: return "csv";
        case DataSource::Ttn: return "ttn";
    }
    return "?";
}

std::optional<LabelMethod> parse_method(std::string_view s) {
    if (s == "range") return LabelMethod::Range;
    if (s == "iqr") return LabelMethod::Iqr;
    return std::nullopt;
}
std::string_view method_name(LabelMethod m) { return m == LabelMethod::Range ? "range" : "iqr"; }

std::optional<StandardizeScope> parse_scope(std::string_view s) {
    if (s == "train_only") return StandardizeScope::TrainOnly;
    if (s == "joined") return StandardizeScope::Joined;
    return std::nullopt;
}
std::string_view scope_name(StandardizeScope s) { return s == StandardizeScope::TrainOnly ? "train_only" : "joined"; }

std::optional<ScoreMode> parse_score_mode(std::string_view s) {
    if (s == "instance_mean") return ScoreMode::InstanceMean;
    if (s == "pooled_columns") return ScoreMode::PooledColumns;
    return std::nullopt;
}
std::string_view score_mode_name(ScoreMode m) {
    return m == ScoreMode::InstanceMean ? "instance_mean" : "pooled_columns";
}

std::optional<FlStandardization> parse_fl_std(std::string_view s) {
    if (s == "global") return FlStandardization::Global;
    if (s == "per_client") return FlStandardization::PerClient;
    return std::nullopt;
}
std::string_view fl_std_name(FlStandardization s) { return s == FlStandardization::Global ? "global" : "per_client"; }

std::string hex64(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

// ------------------------------------------------------------------ config

ExperimentConfig::ExperimentConfig() {
    for (std::size_t r = 1; r <= kEpochBudget; ++r) plan.rounds.push_back(r);
    data.synthetic.ranges = labeling.ranges;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig cfg;
    Reader root(j, "config");

    if (const json* d = root.get("data")) {
        Reader r(*d, "data");
        cfg.data.source = parse_enum(r.get("source"), cfg.data.source, parse_source, r.path("source"));
        std::string path;
        r.read("path", path);
        cfg.data.path = path;
        r.read("scale", cfg.data.scale);
        if (const json* s = r.get("synthetic")) {
            Reader g(*s, "data.synthetic");
            if (const json* counts = g.get("counts")) {
                Reader c(*counts, "data.synthetic.counts");
                for (auto m : kAllMachines) c.read(std::string(machine_name(m)), cfg.data.synthetic.counts[index_of(m)]);
                c.finish();
            }
            g.read("anomaly_fraction", cfg.data.synthetic.anomaly_fraction);
            g.read("seed", cfg.data.synthetic.seed);
            g.finish();
        }
        r.finish();
    }

    if (const json* l = root.get("labeling")) {
        Reader r(*l, "labeling");
        cfg.labeling.method = parse_enum(r.get("method"), cfg.labeling.method, parse_method, r.path("method"));
        r.read("iqr_k", cfg.labeling.iqr_k);
        if (const json* ranges = r.get("ranges")) {
            if (!ranges->is_object()) throw Error("config: labeling.ranges must be an object");
            for (auto it = ranges->begin(); it != ranges->end(); ++it) {
                const auto m = parse_machine(it.key());
                if (!m) throw Error("config: labeling.ranges: unknown machine '" + it.key() + "'");
                if (!it->is_object()) throw Error("config: labeling.ranges." + it.key() + " must be an object");
                for (auto ft = it->begin(); ft != it->end(); ++ft) {
                    const auto f = parse_feature(ft.key());
                    if (!f) throw Error("config: labeling.ranges." + it.key() + ": unknown feature '" + ft.key() + "'");
                    if (ft->is_null()) {
                        cfg.labeling.ranges.clear(*m, *f);
                        continue;
                    }
                    if (!ft->is_array() || ft->size() != 2) {
                        throw Error("config: labeling.ranges." + it.key() + "." + ft.key() + " must be [lower, upper]");
                    }
                    cfg.labeling.ranges.set(*m, *f, {(*ft)[0].get<double>(), (*ft)[1].get<double>()});
                }
            }
        }
        r.finish();
    }
    cfg.data.synthetic.ranges = cfg.labeling.ranges;

    if (const json* s = root.get("split")) {
        Reader r(*s, "split");
        r.read("train", cfg.split.train);
        r.read("val", cfg.split.val);
        r.read("test", cfg.split.test);
        r.read("seed", cfg.split.seed);
        cfg.standardize_scope =
            parse_enum(r.get("standardize_scope"), cfg.standardize_scope, parse_scope, r.path("standardize_scope"));
        r.finish();
    }

    if (const json* m = root.get("model")) {
        Reader r(*m, "model");
        r.read("hidden", cfg.model.arch.hidden_sizes);
        cfg.model.arch.activation =
            parse_enum(r.get("activation"), cfg.model.arch.activation, parse_activation, r.path("activation"));
        r.read("epochs", cfg.model.train.epochs);
        r.read("batch_size", cfg.model.train.batch_size);
        r.read("learning_rate", cfg.model.train.learning_rate);
        r.read("beta1", cfg.model.train.beta1);
        r.read("beta2", cfg.model.train.beta2);
        r.read("epsilon", cfg.model.train.epsilon);
        cfg.model.score_mode = parse_enum(r.get("score_mode"), cfg.model.score_mode, parse_score_mode, r.path("score_mode"));
        r.finish();
    }

    if (const json* f = root.get("iforest")) {
        Reader r(*f, "iforest");
        r.read("n_trees", cfg.iforest.n_trees);
        r.read("contamination", cfg.iforest.contamination);
        r.read("max_samples", cfg.iforest.max_samples);
        r.finish();
    }

    if (const json* f = root.get("federated")) {
        Reader r(*f, "federated");
        if (const json* s = r.get("schedule")) cfg.federated.schedule = parse_schedule(*s, "federated.schedule");
        r.read("budget", cfg.federated.budget);
        cfg.federated.standardization = parse_enum(r.get("standardization"), cfg.federated.standardization,
                                                   parse_fl_std, r.path("standardization"));
        r.finish();
    }

    if (const json* s = root.get("sweep")) {
        Reader r(*s, "sweep");
        r.read("enabled", cfg.sweep.enabled);
        if (const json* list = r.get("schedules")) {
            if (!list->is_array()) throw Error("config: sweep.schedules must be an array");
            cfg.sweep.schedules.clear();
            for (const auto& v : *list) cfg.sweep.schedules.push_back(parse_schedule(v, "sweep.schedules"));
        }
        if (const json* n = r.get("runs"); n && !n->is_null()) cfg.sweep.runs = n->get<std::size_t>();
        r.finish();
    }

    if (const json* p = root.get("lorawan")) {
        Reader r(*p, "lorawan");
        cfg.plan.convention =
            parse_enum(r.get("convention"), cfg.plan.convention, lorawan::parse_convention, r.path("convention"));
        r.read("sfs", cfg.plan.sfs);
        r.read("rounds", cfg.plan.rounds);
        r.read("hidden", cfg.plan.hidden);
        r.read("include_table_kb", cfg.plan.include_table_kb);
        r.finish();
    }

    root.read("runs", cfg.runs);
    root.read("seed", cfg.seed);
    std::string out;
    root.read("output_dir", out);
    if (!out.empty()) cfg.output_dir = out;
    root.read("deterministic", cfg.deterministic);
    root.finish();
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error("config: " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

ordered_json ExperimentConfig::to_json() const {
    ordered_json j;
    ordered_json counts;
    for (auto m : kAllMachines) counts[std::string(machine_name(m))] = data.synthetic.counts[index_of(m)];
    j["data"] = {{"source", source_name(data.source)},
                 {"path", data.path.string()},
                 {"scale", data.scale},
                 {"synthetic",
                  {{"counts", counts}, {"anomaly_fraction", data.synthetic.anomaly_fraction}, {"seed", data.synthetic.seed}}}};

    ordered_json ranges = ordered_json::object();
    for (auto m : kAllMachines) {
        ordered_json per = ordered_json::object();
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            const auto& r = labeling.ranges.at(m, static_cast<Feature>(f));
            if (r) per[std::string(feature_name(static_cast<Feature>(f)))] = {r->lower, r->upper};
        }
        ranges[std::string(machine_name(m))] = per;
    }
    j["labeling"] = {{"method", method_name(labeling.method)}, {"iqr_k", labeling.iqr_k}, {"ranges", ranges}};
    j["split"] = {{"train", split.train},
                  {"val", split.val},
                  {"test", split.test},
                  {"seed", split.seed},
                  {"standardize_scope", scope_name(standardize_scope)}};
    j["model"] = {{"hidden", model.arch.hidden_sizes},
                  {"activation", activation_name(model.arch.activation)},
                  {"epochs", model.train.epochs},
                  {"batch_size", model.train.batch_size},
                  {"learning_rate", model.train.learning_rate},
                  {"beta1", model.train.beta1},
                  {"beta2", model.train.beta2},
                  {"epsilon", model.train.epsilon},
                  {"score_mode", score_mode_name(model.score_mode)}};
    j["iforest"] = {
        {"n_trees", iforest.n_trees}, {"contamination", iforest.contamination}, {"max_samples", iforest.max_samples}};
    j["federated"] = {{"schedule", federated.schedule.label()},
                      {"budget", federated.budget},
                      {"standardization", fl_std_name(federated.standardization)}};
    ordered_json schedules = ordered_json::array();
    for (const auto& s : sweep.schedules) schedules.push_back(s.label());
    j["sweep"] = {{"enabled", sweep.enabled}, {"schedules", schedules}};
    j["sweep"]["runs"] = sweep.runs ? ordered_json(*sweep.runs) : ordered_json(nullptr);
    j["lorawan"] = {{"convention", lorawan::convention_name(plan.convention)},
                    {"sfs", plan.sfs},
                    {"rounds", plan.rounds},
                    {"hidden", plan.hidden},
                    {"include_table_kb", plan.include_table_kb}};
    j["runs"] = runs;
    j["seed"] = seed;
    j["output_dir"] = output_dir.string();
    j["deterministic"] = deterministic;
    return j;
}

void ExperimentConfig::validate() const {
    if (data.source != DataSource::Synthetic) {
        if (data.path.empty()) throw Error("config: data.path is required for source " + std::string(source_name(data.source)));
        if (!std::filesystem::exists(data.path)) throw Error("config: data.path does not exist: " + data.path.string());
    } else {
        if (!(data.scale > 0.0) || !std::isfinite(data.scale)) throw Error("config: data.scale must be positive");
        data.synthetic.scaled(data.scale).validate();
    }
    if (!(labeling.iqr_k > 0.0)) throw Error("config: labeling.iqr_k must be positive");
    split.validate();
    model.arch.validate();
    model.train.validate();
    if (iforest.n_trees == 0) throw Error("config: iforest.n_trees must be >= 1");
    if (!(iforest.contamination > 0.0 && iforest.contamination <= 0.5)) {
        throw Error("config: iforest.contamination must be in (0, 0.5]");
    }
    if (!(iforest.max_samples > 0.0 && iforest.max_samples <= 1.0)) {
        throw Error("config: iforest.max_samples must be in (0, 1]");
    }
    federated.schedule.validate(federated.budget);
    if (sweep.enabled) {
        if (sweep.schedules.empty()) throw Error("config: sweep.schedules is empty");
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (const auto& s : sweep.schedules) {
            s.validate(federated.budget);
            if (!seen.insert({s.epochs_per_round, s.rounds}).second) {
                throw Error("config: sweep.schedules repeats " + s.label());
            }
        }
        if (sweep.runs && *sweep.runs == 0) throw Error("config: sweep.runs must be >= 1");
    }
    for (int sf : plan.sfs) lorawan::profile(sf);
    if (plan.rounds.empty() || std::count(plan.rounds.begin(), plan.rounds.end(), 0u) != 0) {
        throw Error("config: lorawan.rounds must be non-empty and positive");
    }
    for (auto h : plan.hidden) {
        if (h == 0) throw Error("config: lorawan.hidden entries must be positive");
    }
    if (runs == 0) throw Error("config: runs must be >= 1");
}

std::uint64_t ExperimentConfig::hash() const {
    auto j = to_json();
    j.erase("output_dir");  // where results go does not change them
    const std::string text = j.dump();
    return fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// -------------------------------------------------------------------- data

namespace {

Split standardize_split(const Split& raw, const Standardizer& s) {
    return {apply_standardizer(raw.train, s), apply_standardizer(raw.val, s), apply_standardizer(raw.test, s)};
}

// Each machine's partitions scaled by statistics of its own training rows.
Split standardize_per_client(const Split& raw) {
    Split out;
    out.train.labels.emplace();
    out.val.labels.emplace();
    out.test.labels.emplace();
    for (auto m : kAllMachines) {
        const FeatureFrame train = raw.train.only(m);
        if (train.empty()) continue;
        const Standardizer s = fit_standardizer(train);
        out.train.append(apply_standardizer(train, s));
        out.val.append(apply_standardizer(raw.val.only(m), s));
        out.test.append(apply_standardizer(raw.test.only(m), s));
    }
    return out;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& cfg) {
    PreparedData d;
    RecordSet records;
    try {
        switch (cfg.data.source) {
            case DataSource::Synthetic: {
                GenConfig g = cfg.data.synthetic.scaled(cfg.data.scale);
                g.ranges = cfg.labeling.ranges;
                records = generate_synthetic(g);
                break;
            }
            case DataSource::Csv: {
                CsvIngest ingest = ingest_csv(cfg.data.path);
                d.rejected_rows = ingest.rejected.size();
                records = std::move(ingest.records);
                break;
            }
            case DataSource::Ttn: records = ingest_ttn_file(cfg.data.path); break;
        }
    } catch (const std::exception& e) {
        throw Error(std::string("stage ingest: ") + e.what());
    }
    d.raw_counts = records.counts_by_machine();

    try {
        CleanResult cleaned = clean(records);
        d.removed_bad_timestamp = cleaned.removed_bad_timestamp;
        d.removed_invalid_feature = cleaned.removed_invalid_feature;
        d.frame = select_features(cleaned.records);
    } catch (const std::exception& e) {
        throw Error(std::string("stage clean: ") + e.what());
    }

    try {
        try {
            d.range_anomaly_fraction = label_by_range(d.frame, cfg.labeling.ranges).anomaly_fraction();
        } catch (const Error&) {
            if (cfg.labeling.method == LabelMethod::Range) throw;
        }
        try {
            d.iqr_anomaly_fraction = label_by_iqr(d.frame, cfg.labeling.iqr_k).anomaly_fraction();
        } catch (const Error&) {
            if (cfg.labeling.method == LabelMethod::Iqr) throw;
        }
        d.labels = cfg.labeling.method == LabelMethod::Range ? label_by_range(d.frame, cfg.labeling.ranges)
                                                             : label_by_iqr(d.frame, cfg.labeling.iqr_k);
        attach_labels(d.frame, d.labels);
    } catch (const std::exception& e) {
        throw Error(std::string("stage label: ") + e.what());
    }

    try {
        d.raw_split = stratified_split(d.frame, cfg.split);
        d.standardizer = fit_standardizer(cfg.standardize_scope == StandardizeScope::TrainOnly ? d.raw_split.train : d.frame);
        d.split = standardize_split(d.raw_split, d.standardizer);
        d.client_split = cfg.federated.standardization == FlStandardization::Global ? d.split
                                                                                    : standardize_per_client(d.raw_split);
    } catch (const std::exception& e) {
        throw Error(std::string("stage preprocess: ") + e.what());
    }
    return d;
}

std::vector<std::uint64_t> run_seeds(const ExperimentConfig& cfg) {
    std::vector<std::uint64_t> seeds(cfg.runs);
    for (std::size_t i = 0; i < cfg.runs; ++i) seeds[i] = cfg.seed + i;
    return seeds;
}

// ------------------------------------------------------------------ stages

namespace {

// Runs fn(i) for i in [0, n), in parallel unless deterministic, and rethrows
// the first failure in index order.
template <class Fn>
void for_each_run(std::size_t n, bool parallel, const char* stage, Fn&& fn) {
    std::vector<std::string> errors(n);
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = e.what();
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i].empty()) throw Error(std::string("stage ") + stage + ", run " + std::to_string(i) + ": " + errors[i]);
    }
}

FedConfig fed_config(const ExperimentConfig& cfg, std::uint64_t seed) {
    FedConfig fc;
    fc.arch = cfg.model.arch;
    fc.train = cfg.model.train;
    fc.seed = seed;
    fc.parallel_clients = !cfg.deterministic;
    return fc;
}

}  // namespace

CentralResult run_central(const ExperimentConfig& cfg, const PreparedData& data) {
    const auto seeds = run_seeds(cfg);
    const std::size_t n = seeds.size();
    CentralResult out;
    out.autoencoder.model = "AE";
    out.iforest.model = "IF";
    out.autoencoder.runs.resize(n);
    out.autoencoder.thresholds.resize(n);
    out.autoencoder.initial_thresholds.resize(n);
    out.iforest.runs.resize(n);

    const auto& test_labels = data.split.test.require_labels("run_central");
    const auto& val_labels = data.split.val.require_labels("run_central");
    for_each_run(n, !cfg.deterministic, "train-central", [&](std::size_t i) {
        AutoencoderModel model = build_autoencoder(cfg.model.arch, seeds[i]);
        TrainConfig tc = cfg.model.train;
        tc.shuffle_seed = seeds[i];
        train(model, data.split.train, tc);
        out.autoencoder.initial_thresholds[i] = initial_threshold(model, data.split.train, cfg.model.score_mode);
        const ThresholdResult t = select_threshold(reconstruction_errors(model, data.split.val), val_labels);
        out.autoencoder.thresholds[i] = t.threshold;
        const auto test_errors = reconstruction_errors(model, data.split.test);
        out.autoencoder.runs[i] = evaluate(confusion(test_labels, classify(test_errors, t.threshold)));

        const IForest forest = fit_iforest(data.split.train, cfg.iforest.n_trees, cfg.iforest.max_samples, seeds[i]);
        out.iforest.runs[i] = evaluate(
            confusion(test_labels, iforest_classify(forest, data.split.test, cfg.iforest.contamination)));
    });
    out.autoencoder.summary = summarize_runs(out.autoencoder.runs);
    out.iforest.summary = summarize_runs(out.iforest.runs);
    return out;
}

FederatedResult run_federated(const ExperimentConfig& cfg, const PreparedData& data) {
    const auto seeds = run_seeds(cfg);
    const std::size_t n = seeds.size();
    FederatedResult out;
    out.global.model = "FL-AE";
    out.global.runs.resize(n);
    out.global.thresholds.resize(n);

    std::vector<std::vector<ClientRuns>> per_run(n);
    std::vector<ScheduleResult> first(1);
    const auto& test_labels = data.client_split.test.require_labels("run_federated");
    for_each_run(n, !cfg.deterministic, "train-federated", [&](std::size_t i) {
        const FedConfig fc = fed_config(cfg, seeds[i]);
        auto clients = make_clients(data.client_split, fc);
        ScheduleResult result = run_schedule(cfg.federated.schedule, clients, fc);
        const AutoencoderModel global = materialize(result.global, cfg.model.arch);

        const ThresholdResult t = select_global_threshold(global, clients);
        out.global.thresholds[i] = t.threshold;
        const auto errors = reconstruction_errors(global, data.client_split.test);
        out.global.runs[i] = evaluate(confusion(test_labels, classify(errors, t.threshold)));

        tune_client_thresholds(global, clients);
        const auto cms = evaluate_per_client(global, clients);
        for (std::size_t c = 0; c < clients.size(); ++c) {
            ClientRuns cr;
            cr.machine = clients[c].machine;
            cr.runs.push_back(evaluate(cms[c]));
            cr.thresholds.push_back(clients[c].threshold);
            per_run[i].push_back(std::move(cr));
        }
        if (i == 0) first[0] = std::move(result);
    });

    out.global.summary = summarize_runs(out.global.runs);
    for (const auto& run : per_run) {
        for (const auto& cr : run) {
            auto it = std::find_if(out.clients.begin(), out.clients.end(),
                                   [&](const ClientRuns& x) { return x.machine == cr.machine; });
            if (it == out.clients.end()) {
                out.clients.push_back({cr.machine, {}, {}, {}});
                it = std::prev(out.clients.end());
            }
            it->runs.push_back(cr.runs.front());
            it->thresholds.push_back(cr.thresholds.front());
        }
    }
    for (auto& c : out.clients) c.summary = summarize_runs(c.runs);
    out.history = std::move(first[0].history);
    out.loss_history = std::move(first[0].global.loss_history);
    return out;
}

std::vector<SweepRow> sweep_schedules(const ExperimentConfig& cfg, const PreparedData& data) {
    if (cfg.sweep.schedules.empty()) throw Error("sweep_schedules: empty schedule list");
    for (const auto& s : cfg.sweep.schedules) s.validate(cfg.federated.budget);

    const std::size_t runs = cfg.sweep.runs.value_or(cfg.runs);
    const std::size_t combos = cfg.sweep.schedules.size();
    struct Cell {
        Metrics metrics;
        double initial = 0, final = 0;
    };
    std::vector<Cell> cells(combos * runs);
    const auto& test_labels = data.client_split.test.require_labels("sweep_schedules");

    for_each_run(cells.size(), !cfg.deterministic, "sweep", [&](std::size_t k) {
        const auto& schedule = cfg.sweep.schedules[k / runs];
        const FedConfig fc = fed_config(cfg, cfg.seed + k % runs);
        auto clients = make_clients(data.client_split, fc);
        const ScheduleResult result = run_schedule(schedule, clients, fc);
        const AutoencoderModel global = materialize(result.global, cfg.model.arch);
        const ThresholdResult t = select_global_threshold(global, clients);
        const auto errors = reconstruction_errors(global, data.client_split.test);
        cells[k] = {evaluate(confusion(test_labels, classify(errors, t.threshold))), result.initial_loss(),
                    result.final_loss()};
    });

    std::vector<SweepRow> rows;
    for (std::size_t c = 0; c < combos; ++c) {
        SweepRow row;
        row.schedule = cfg.sweep.schedules[c];
        row.runs = runs;
        std::vector<double> f1, acc, tpr, tnr, init, fin;
        for (std::size_t r = 0; r < runs; ++r) {
            const Cell& cell = cells[c * runs + r];
            f1.push_back(cell.metrics[MetricId::F1]);
            acc.push_back(cell.metrics[MetricId::Acc]);
            tpr.push_back(cell.metrics[MetricId::Tpr]);
            tnr.push_back(cell.metrics[MetricId::Tnr]);
            init.push_back(cell.initial);
            fin.push_back(cell.final);
            if (!(cell.final < cell.initial)) row.loss_decreased_every_run = false;
        }
        row.f1 = stats::mean(f1);
        row.acc = stats::mean(acc);
        row.tpr = stats::mean(tpr);
        row.tnr = stats::mean(tnr);
        row.initial_loss = stats::mean(init);
        row.final_loss = stats::mean(fin);
        rows.push_back(row);
    }
    return rows;
}

std::vector<lorawan::PlanRow> plan_lorawan(const ExperimentConfig& cfg) {
    std::vector<lorawan::SizeSource> sizes;
    for (auto h : cfg.plan.hidden) {
        ArchSpec arch = cfg.model.arch;
        arch.hidden_sizes = {h};
        sizes.push_back(lorawan::SizeSource::from_arch(arch));
    }
    if (cfg.plan.include_table_kb) {
        for (auto& s : lorawan::table_sizes_kb()) sizes.push_back(std::move(s));
    }
    return lorawan::plan_table(sizes, cfg.plan.sfs, cfg.plan.rounds, cfg.plan.convention);
}

// ------------------------------------------------------------------ checks

std::vector<Check> evaluate_checks(const ExperimentReport& report) {
    std::vector<Check> checks;

    {
        Check c{"size_accounting", true, ""};
        const std::array<std::size_t, 4> hidden{16, 32, 64, 128};
        const std::array<std::size_t, 4> params{181, 357, 709, 1413};
        const std::array<const char*, 4> kb{"0.70", "1.39", "2.77", "5.52"};
        for (std::size_t i = 0; i < hidden.size(); ++i) {
            ArchSpec arch;
            arch.hidden_sizes = {hidden[i]};
            const auto p = param_count(arch);
            const auto shown = fixed(static_cast<double>(serialized_param_bytes(arch)) / 1024.0, 2);
            c.detail += (i ? "; " : "") + std::to_string(hidden[i]) + ":" + std::to_string(p) + "/" + shown + "KB";
            if (p != params[i] || shown != kb[i]) c.passed = false;
        }
        checks.push_back(std::move(c));
    }

    {
        Check c{"lorawan_figures", true, ""};
        struct Case {
            double kb;
            int sf;
            std::size_t rounds, expected;
        };
        for (const Case k : {Case{0.70, 7, 1, 4}, Case{1.39, 7, 80, 513}, Case{1.39, 12, 80, 2233}, Case{5.52, 12, 80, 8867}}) {
            const auto got = lorawan::messages_required(
                {lorawan::kb_to_bytes(k.kb), k.rounds, lorawan::profile(k.sf), lorawan::Convention::Total});
            c.detail += std::to_string(got) + " ";
            if (got != k.expected) c.passed = false;
        }
        const double nh = lorawan::training_hours(513, lorawan::profile(7));
        c.detail += "Nh=" + fixed(nh, 4);
        if (std::abs(nh - 0.8835) > 1e-4) c.passed = false;
        checks.push_back(std::move(c));
    }

    if (report.central) {
        const double f1 = report.central->autoencoder.summary[MetricId::F1].mean;
        checks.push_back({"central_f1", f1 >= 90.0, "mean F1 " + fixed(f1, 3) + " (>= 90)"});
        if (report.federated) {
            const auto& ce = report.central->autoencoder.summary;
            const auto& fe = report.federated->global.summary;
            const double f1_gap = std::abs(ce[MetricId::F1].mean - fe[MetricId::F1].mean);
            const double tnr_gap = std::abs(ce[MetricId::Tnr].mean - fe[MetricId::Tnr].mean);
            checks.push_back({"federated_gap", f1_gap <= 5.0 && tnr_gap <= 10.0,
                              "F1 gap " + fixed(f1_gap, 3) + " (<= 5), TNR gap " + fixed(tnr_gap, 3) + " (<= 10)"});
        }
    }

    if (!report.sweep.empty()) {
        bool ok = report.sweep.size() == paper_schedules().size();
        std::size_t decreased = 0;
        for (const auto& row : report.sweep) {
            if (row.schedule.budget() != kEpochBudget) ok = false;
            if (row.loss_decreased_every_run) ++decreased;
        }
        ok = ok && decreased == report.sweep.size();
        checks.push_back({"sweep", ok,
                          std::to_string(report.sweep.size()) + " combos, " + std::to_string(decreased) +
                              " with final loss < initial loss"});
    }
    return checks;
}

bool ExperimentReport::all_checks_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

// ------------------------------------------------------------------ report

namespace {

ordered_json metrics_json(const Metrics& m) {
    ordered_json j;
    for (auto id : kAllMetrics) j[std::string(metric_name(id))] = m[id];
    return j;
}

ordered_json summary_json(const MetricsSummary& s) {
    ordered_json j;
    for (auto id : kAllMetrics) {
        const RunStats& r = s[id];
        j[std::string(metric_name(id))] = {
            {"min", r.min}, {"max", r.max}, {"mean", r.mean}, {"std", r.std}, {"median", r.median}};
    }
    j["runs"] = s.runs;
    return j;
}

ordered_json model_json(const ModelRuns& m, std::span<const std::uint64_t> seeds) {
    ordered_json runs = ordered_json::array();
    for (std::size_t i = 0; i < m.runs.size(); ++i) {
        ordered_json r;
        if (i < seeds.size()) r["seed"] = seeds[i];
        r["metrics"] = metrics_json(m.runs[i]);
        if (i < m.thresholds.size()) r["threshold"] = m.thresholds[i];
        if (i < m.initial_thresholds.size()) r["initial_threshold"] = m.initial_thresholds[i];
        runs.push_back(std::move(r));
    }
    return {{"model", m.model}, {"summary", summary_json(m.summary)}, {"runs", runs}};
}

double stat_value(const RunStats& r, std::size_t k) {
    switch (k) {
        case 0: return r.min;
        case 1: return r.max;
        case 2: return r.mean;
        case 3: return r.std;
        default: return r.median;
    }
}

void summary_rows(std::ostream& out, const std::string& name, const MetricsSummary& s) {
    for (auto id : kAllMetrics) {
        for (std::size_t k = 0; k < kStatisticNames.size(); ++k) {
            out << name << ',' << metric_name(id) << ',' << kStatisticNames[k] << ',' << fixed(stat_value(s[id], k))
                << ',' << s.runs << '\n';
        }
    }
}

}  // namespace

ordered_json ExperimentReport::to_json() const {
    ordered_json j;
    j["provenance"] = provenance;
    j["data"] = data;
    std::vector<std::uint64_t> seeds;
    if (provenance.contains("run_seeds")) seeds = provenance["run_seeds"].get<std::vector<std::uint64_t>>();

    if (central) {
        j["central"] = {{"autoencoder", model_json(central->autoencoder, seeds)},
                        {"iforest", model_json(central->iforest, seeds)}};
    }
    if (federated) {
        ordered_json clients = ordered_json::array();
        for (const auto& c : federated->clients) {
            ordered_json runs = ordered_json::array();
            for (std::size_t i = 0; i < c.runs.size(); ++i) {
                runs.push_back({{"metrics", metrics_json(c.runs[i])}, {"threshold", c.thresholds[i]}});
            }
            clients.push_back({{"client", machine_name(c.machine)}, {"summary", summary_json(c.summary)}, {"runs", runs}});
        }
        j["federated"] = {{"global", model_json(federated->global, seeds)},
                          {"clients", clients},
                          {"loss_history", federated->loss_history}};
    }
    if (!sweep.empty()) {
        ordered_json rows = ordered_json::array();
        for (const auto& r : sweep) {
            rows.push_back({{"schedule", r.schedule.label()},
                            {"epochs", r.schedule.epochs_per_round},
                            {"rounds", r.schedule.rounds},
                            {"runs", r.runs},
                            {"F1", r.f1},
                            {"Acc", r.acc},
                            {"TPR", r.tpr},
                            {"TNR", r.tnr},
                            {"initial_loss", r.initial_loss},
                            {"final_loss", r.final_loss},
                            {"loss_decreased_every_run", r.loss_decreased_every_run}});
        }
        j["sweep"] = rows;
    }
    if (!plan.empty()) {
        ordered_json rows = ordered_json::array();
        for (const auto& r : plan) {
            rows.push_back({{"arch", r.size.label},
                            {"hidden", r.size.hidden},
                            {"params", r.size.params},
                            {"bytes", r.size.bytes},
                            {"sf", r.sf},
                            {"rounds", r.rounds},
                            {"convention", lorawan::convention_name(r.convention)},
                            {"messages", r.messages},
                            {"hours", r.hours}});
        }
        j["lorawan_plan"] = rows;
    }
    ordered_json cs = ordered_json::array();
    for (const auto& c : checks) cs.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    j["checks"] = cs;
    return j;
}

void write_comparison_csv(std::ostream& out, const ExperimentReport& report) {
    out << "model,metric,statistic,value,runs\n";
    if (report.central) {
        summary_rows(out, report.central->autoencoder.model, report.central->autoencoder.summary);
        summary_rows(out, report.central->iforest.model, report.central->iforest.summary);
    }
    if (report.federated) summary_rows(out, report.federated->global.model, report.federated->global.summary);
}

void write_per_client_csv(std::ostream& out, const ExperimentReport& report) {
    out << "client,metric,statistic,value,runs\n";
    if (!report.federated) return;
    for (const auto& c : report.federated->clients) summary_rows(out, std::string(machine_name(c.machine)), c.summary);
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
    out << "epochs,rounds,runs,f1,acc,tpr,tnr,initial_loss,final_loss\n";
    for (const auto& r : rows) {
        out << r.schedule.epochs_per_round << ',' << r.schedule.rounds << ',' << r.runs << ',' << fixed(r.f1) << ','
            << fixed(r.acc) << ',' << fixed(r.tpr) << ',' << fixed(r.tnr) << ',' << fixed(r.initial_loss, 8) << ','
            << fixed(r.final_loss, 8) << '\n';
    }
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw Error("write_report: cannot write " + (dir / name).string());
        return f;
    };
    if (report.central || report.federated) {
        auto f = open("comparison.csv");
        write_comparison_csv(f, report);
    }
    if (report.federated) {
        auto f = open("per_client.csv");
        write_per_client_csv(f, report);
        auto h = open("round_history.csv");
        write_round_history_csv(h, report.federated->history);
    }
    if (!report.sweep.empty()) {
        auto f = open("sweep.csv");
        write_sweep_csv(f, report.sweep);
    }
    if (!report.plan.empty()) {
        auto f = open("lorawan_plan.csv");
        lorawan::write_plan_csv(f, report.plan);
    }
    auto f = open("report.json");
    f << report.to_json().dump(2) << '\n';
}

// -------------------------------------------------------------- pipeline

ExperimentReport run_experiment(const ExperimentConfig& cfg, const Stages& stages) {
    cfg.validate();
    kernels::set_parallel_enabled(!cfg.deterministic);

    ExperimentReport report;
    const auto seeds = run_seeds(cfg);
    report.provenance = {{"tool", "fedlora"},
                         {"version", kVersion},
                         {"config_hash", hex64(cfg.hash())},
                         {"base_seed", cfg.seed},
                         {"run_seeds", seeds},
                         {"deterministic", cfg.deterministic},
                         {"config", cfg.to_json()}};
    report.provenance["config"].erase("output_dir");

    if (stages.central || stages.federated || (stages.sweep && cfg.sweep.enabled)) {
        const PreparedData data = prepare_data(cfg);
        ordered_json counts, cleaned;
        const auto kept = data.frame.counts_by_machine();
        for (auto m : kAllMachines) {
            counts[std::string(machine_name(m))] = data.raw_counts[index_of(m)];
            cleaned[std::string(machine_name(m))] = kept[index_of(m)];
        }
        report.data = {{"source", source_name(cfg.data.source)},
                       {"records", counts},
                       {"rejected_rows", data.rejected_rows},
                       {"removed_bad_timestamp", data.removed_bad_timestamp},
                       {"removed_invalid_feature", data.removed_invalid_feature},
                       {"instances", cleaned},
                       {"label_method", method_name(cfg.labeling.method)},
                       {"anomaly_fraction", data.labels.anomaly_fraction()}};
        report.data["range_anomaly_fraction"] =
            data.range_anomaly_fraction ? ordered_json(*data.range_anomaly_fraction) : ordered_json(nullptr);
        report.data["iqr_anomaly_fraction"] =
            data.iqr_anomaly_fraction ? ordered_json(*data.iqr_anomaly_fraction) : ordered_json(nullptr);
        report.data["split"] = {{"train", data.split.train.size()},
                                {"val", data.split.val.size()},
                                {"test", data.split.test.size()}};

        if (stages.central) report.central = run_central(cfg, data);
        if (stages.federated) report.federated = run_federated(cfg, data);
        if (stages.sweep && cfg.sweep.enabled) report.sweep = sweep_schedules(cfg, data);
    }
    if (stages.plan) report.plan = plan_lorawan(cfg);
    report.checks = evaluate_checks(report);
    return report;
}

}  // namespace fedlora
