#include "criteria.hpp"
#include "fedlora/datagen.hpp"
#include "fedlora/experiment.hpp"
#include "fedlora/kernels.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace fedlora;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> runs;
    std::string out;
    bool deterministic = false;
    bool check = false;
    std::string convention;
    std::optional<double> scale;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "JSON experiment config")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "base seed; run i uses seed + i");
    app->add_option("--runs", c.runs, "independent runs per model")->check(CLI::PositiveNumber);
    app->add_option("--out", c.out, "output directory (fallback: $FEDLORA_OUT)");
    app->add_flag("--deterministic", c.deterministic, "serial execution, bitwise reproducible");
    app->add_flag("--check", c.check, "run the acceptance criteria; exit 1 if any fails");
    app->add_option("--convention", c.convention, "LoRaWAN message count convention")
        ->check(CLI::IsMember({"per_round", "total"}));
    app->add_option("--scale", c.scale, "multiply synthetic per-machine counts")->check(CLI::PositiveNumber);
}

ExperimentConfig resolve(const Common& c) {
    ExperimentConfig cfg;
    bool out_from_config = false;
    if (!c.config.empty()) {
        std::ifstream in(c.config);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw Error("config: " + c.config + ": " + e.what());
        }
        cfg = ExperimentConfig::from_json(j);
        out_from_config = j.is_object() && j.contains("output_dir");
    }
    if (c.seed) cfg.seed = *c.seed;
    if (c.runs) cfg.runs = *c.runs;
    if (c.scale) cfg.data.scale = *c.scale;
    if (c.deterministic) cfg.deterministic = true;
    if (!c.convention.empty()) cfg.plan.convention = *lorawan::parse_convention(c.convention);
    if (!c.out.empty()) {
        cfg.output_dir = c.out;
    } else if (!out_from_config) {
        if (const char* env = std::getenv("FEDLORA_OUT"); env && *env) cfg.output_dir = env;
    }
    return cfg;
}

void print_summary(const ExperimentReport& r) {
    auto line = [](const std::string& name, const MetricsSummary& s) {
        std::printf("  %-10s", name.c_str());
        for (auto id : kAllMetrics) {
            std::printf("  %s %6.2f +- %5.2f", std::string(metric_name(id)).c_str(), s[id].mean, s[id].std);
        }
        std::printf("  (%zu runs)\n", s.runs);
    };
    if (r.central) {
        line(r.central->autoencoder.model, r.central->autoencoder.summary);
        line(r.central->iforest.model, r.central->iforest.summary);
    }
    if (r.federated) {
        line(r.federated->global.model, r.federated->global.summary);
        for (const auto& c : r.federated->clients) line(std::string(machine_name(c.machine)), c.summary);
    }
    for (const auto& s : r.sweep) {
        std::printf("  sweep %-5s F1 %6.2f Acc %6.2f TPR %6.2f TNR %6.2f loss %.5f -> %.5f\n",
                    s.schedule.label().c_str(), s.f1, s.acc, s.tpr, s.tnr, s.initial_loss, s.final_loss);
    }
    if (!r.plan.empty()) std::printf("  lorawan plan: %zu rows\n", r.plan.size());
    for (const auto& c : r.checks) {
        std::printf("  check %-16s %s  %s\n", c.name.c_str(), c.passed ? "PASS" : "FAIL", c.detail.c_str());
    }
}

// Runs the acceptance criteria when --check is given. Returns the exit code.
int finish(const ExperimentConfig& cfg, const Common& c, bool report_ok) {
    if (!c.check) return 0;
    criteria::SuiteOptions opt;
    opt.seed = cfg.seed;
    opt.scratch_dir = (cfg.output_dir / "check_scratch").string();
    bool ok = report_ok;
    for (const auto& o : criteria::run_all(opt)) {
        std::printf("%s\n", criteria::format(o).c_str());
        std::fflush(stdout);
        ok = ok && o.passed;
    }
    kernels::set_parallel_enabled(!cfg.deterministic);
    return ok ? 0 : 1;
}

int run_stages(const ExperimentConfig& cfg, const Common& c, Stages stages) {
    const ExperimentReport report = run_experiment(cfg, stages);
    write_report(report, cfg.output_dir);
    print_summary(report);
    std::printf("wrote %s\n", cfg.output_dir.string().c_str());
    return finish(cfg, c, !c.check || report.all_checks_passed());
}

RecordSet load_records(const std::string& input, std::string format, std::size_t* rejected) {
    if (format == "auto") {
        const auto ext = fs::path(input).extension().string();
        format = (ext == ".json" || ext == ".jsonl") ? "ttn" : "csv";
    }
    if (format == "ttn") return ingest_ttn_file(input);
    CsvIngest ingest = ingest_csv(input);
    if (rejected) *rejected = ingest.rejected.size();
    for (const auto& r : ingest.rejected) std::fprintf(stderr, "line %zu rejected: %s\n", r.line, r.reason.c_str());
    return std::move(ingest.records);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated autoencoder anomaly detection over LoRaWAN: experiment runner"};
    app.require_subcommand(1);
    Common c;

    auto* generate = app.add_subcommand("generate", "write a synthetic telemetry dataset");
    add_common(generate, c);
    std::string gen_format = "csv";
    generate->add_option("--format", gen_format, "csv or ttn (one uplink JSON per line)")
        ->check(CLI::IsMember({"csv", "ttn"}));

    auto* ingest = app.add_subcommand("ingest", "parse and clean a CSV export or TTN uplink JSON");
    add_common(ingest, c);
    std::string input, in_format = "auto";
    ingest->add_option("--input", input, "CSV or TTN JSON file")->required()->check(CLI::ExistingFile);
    ingest->add_option("--format", in_format)->check(CLI::IsMember({"auto", "csv", "ttn"}));

    auto* label = app.add_subcommand("label", "label instances by manufacturer range or IQR");
    add_common(label, c);
    std::string method;
    label->add_option("--input", input, "CSV or TTN JSON file (default: synthetic data from the config)")
        ->check(CLI::ExistingFile);
    label->add_option("--format", in_format)->check(CLI::IsMember({"auto", "csv", "ttn"}));
    label->add_option("--method", method)->check(CLI::IsMember({"range", "iqr"}));

    auto* central = app.add_subcommand("train-central", "centralized autoencoder and isolation forest");
    add_common(central, c);
    auto* federated = app.add_subcommand("train-federated", "federated autoencoder with per-client thresholds");
    add_common(federated, c);
    auto* sweep = app.add_subcommand("sweep", "epoch/round schedule sweep");
    add_common(sweep, c);

    auto* plan = app.add_subcommand("plan-lorawan", "uplink messages and hours per size, SF and rounds");
    add_common(plan, c);
    std::vector<int> sfs;
    std::vector<std::size_t> rounds;
    plan->add_option("--sf", sfs, "spreading factors")->check(CLI::Range(7, 12));
    plan->add_option("--rounds", rounds, "round counts")->check(CLI::PositiveNumber);

    auto* report = app.add_subcommand("report", "print the tables of an existing report.json");
    add_common(report, c);

    auto* run = app.add_subcommand("run", "the whole pipeline");
    add_common(run, c);

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) {
            const ExperimentConfig cfg = resolve(c);
            GenConfig g = cfg.data.synthetic.scaled(cfg.data.scale);
            g.ranges = cfg.labeling.ranges;
            if (c.seed) g.seed = *c.seed;
            const RecordSet rs = generate_synthetic(g);
            fs::create_directories(cfg.output_dir);
            fs::path path;
            if (gen_format == "csv") {
                path = cfg.output_dir / "synthetic.csv";
                write_csv(rs, path);
            } else {
                path = cfg.output_dir / "synthetic.jsonl";
                std::ofstream out(path, std::ios::binary);
                for (const auto& r : rs.records) out << encode_ttn_uplink(r) << '\n';
            }
            std::printf("wrote %zu records to %s\n", rs.size(), path.string().c_str());
            return 0;
        }

        if (ingest->parsed()) {
            const ExperimentConfig cfg = resolve(c);
            std::size_t rejected = 0;
            const RecordSet rs = load_records(input, in_format, &rejected);
            const CleanResult cleaned = clean(rs);
            fs::create_directories(cfg.output_dir);
            write_csv(cleaned.records, cfg.output_dir / "cleaned.csv");
            nlohmann::ordered_json j;
            j["input"] = input;
            j["provenance"] = provenance_name(rs.provenance);
            j["records"] = rs.size();
            j["rejected_rows"] = rejected;
            j["removed_bad_timestamp"] = cleaned.removed_bad_timestamp;
            j["removed_invalid_feature"] = cleaned.removed_invalid_feature;
            j["kept"] = cleaned.records.size();
            std::ofstream(cfg.output_dir / "ingest.json") << j.dump(2) << '\n';
            std::printf("%zu records, %zu rejected rows, %zu removed, %zu kept\n", rs.size(), rejected,
                        cleaned.removed(), cleaned.records.size());
            return 0;
        }

        if (label->parsed()) {
            ExperimentConfig cfg = resolve(c);
            if (method == "iqr") cfg.labeling.method = LabelMethod::Iqr;
            if (method == "range") cfg.labeling.method = LabelMethod::Range;
            RecordSet rs;
            if (!input.empty()) {
                rs = load_records(input, in_format, nullptr);
            } else {
                GenConfig g = cfg.data.synthetic.scaled(cfg.data.scale);
                g.ranges = cfg.labeling.ranges;
                rs = generate_synthetic(g);
            }
            const FeatureFrame frame = select_features(clean(rs).records);
            const LabelVector labels = cfg.labeling.method == LabelMethod::Range
                                           ? label_by_range(frame, cfg.labeling.ranges)
                                           : label_by_iqr(frame, cfg.labeling.iqr_k);
            fs::create_directories(cfg.output_dir);
            std::ofstream out(cfg.output_dir / "labels.csv", std::ios::binary);
            out << "machine_id";
            for (std::size_t f = 0; f < kFeatureCount; ++f) out << ',' << feature_name(static_cast<Feature>(f));
            for (std::size_t f = 0; f < kFeatureCount; ++f) out << ",out_" << feature_name(static_cast<Feature>(f));
            out << ",anomalous\n";
            for (std::size_t i = 0; i < frame.size(); ++i) {
                out << machine_name(frame.machines[i]);
                for (double v : frame.rows[i]) out << ',' << v;
                for (bool b : labels.feature_flags[i]) out << ',' << int(b);
                out << ',' << int(labels.anomalous[i]) << '\n';
            }
            std::printf("%zu instances, %zu anomalous (%.2f%%) by %s\n", labels.size(), labels.anomaly_count(),
                        100.0 * labels.anomaly_fraction(), cfg.labeling.method == LabelMethod::Range ? "range" : "iqr");
            return 0;
        }

        if (central->parsed()) return run_stages(resolve(c), c, {true, false, false, false});
        if (federated->parsed()) return run_stages(resolve(c), c, {false, true, false, false});
        if (sweep->parsed()) {
            ExperimentConfig cfg = resolve(c);
            cfg.sweep.enabled = true;
            return run_stages(cfg, c, {false, false, true, false});
        }
        if (run->parsed()) return run_stages(resolve(c), c, {});

        if (plan->parsed()) {
            ExperimentConfig cfg = resolve(c);
            if (!sfs.empty()) cfg.plan.sfs = sfs;
            if (!rounds.empty()) cfg.plan.rounds = rounds;
            return run_stages(cfg, c, {false, false, false, true});
        }

        if (report->parsed()) {
            const ExperimentConfig cfg = resolve(c);
            const fs::path path = cfg.output_dir / "report.json";
            std::ifstream in(path);
            if (!in) throw Error("report: cannot open " + path.string());
            const auto j = nlohmann::ordered_json::parse(in);
            std::printf("config %s, seeds %s\n", j["provenance"]["config_hash"].get<std::string>().c_str(),
                        j["provenance"]["run_seeds"].dump().c_str());
            auto table = [](const std::string& name, const nlohmann::ordered_json& s) {
                std::printf("  %-10s", name.c_str());
                for (auto id : kAllMetrics) {
                    const auto& m = s[std::string(metric_name(id))];
                    std::printf("  %s %6.2f +- %5.2f", std::string(metric_name(id)).c_str(), m["mean"].get<double>(),
                                m["std"].get<double>());
                }
                std::printf("\n");
            };
            if (j.contains("central")) {
                table("AE", j["central"]["autoencoder"]["summary"]);
                table("IF", j["central"]["iforest"]["summary"]);
            }
            if (j.contains("federated")) {
                table("FL-AE", j["federated"]["global"]["summary"]);
                for (const auto& cl : j["federated"]["clients"]) table(cl["client"].get<std::string>(), cl["summary"]);
            }
            if (j.contains("sweep")) {
                for (const auto& s : j["sweep"]) {
                    std::printf("  sweep %-5s F1 %6.2f Acc %6.2f TPR %6.2f TNR %6.2f\n",
                                s["schedule"].get<std::string>().c_str(), s["F1"].get<double>(), s["Acc"].get<double>(),
                                s["TPR"].get<double>(), s["TNR"].get<double>());
                }
            }
            bool ok = true;
            for (const auto& ch : j["checks"]) {
                std::printf("  check %-16s %s  %s\n", ch["name"].get<std::string>().c_str(),
                            ch["passed"].get<bool>() ? "PASS" : "FAIL", ch["detail"].get<std::string>().c_str());
                ok = ok && ch["passed"].get<bool>();
            }
            return c.check && !ok ? 1 : 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
