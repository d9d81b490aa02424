// mistfed — deterministic simulator of a four-tier (mist/edge/fog/cloud)
// federated intrusion-detection protocol. Subcommands: run, sweep,
// ingest-check, validate-config, version.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mistfed/orchestrator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_for(const mistfed::Error& e) {
    const auto& cat = e.category();
    if (cat == "config" || cat == "usage" || cat == "ingestion") return 2;
    return 1;
}

std::string one_line(std::string s) {
    for (auto& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

void print_error(const std::string& category, const std::string& message) {
    std::cerr << "error: category=" << category << " message=" << one_line(message) << "\n";
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::uint32_t> clients;
    std::optional<std::uint32_t> rounds;
    std::optional<double> mu;
    std::optional<int> epochs;
    std::optional<int> batch;
    std::optional<std::string> select;  // on | off
    std::optional<double> alpha;
    std::optional<double> beta;
    std::optional<std::uint64_t> tau_n;
    std::optional<double> tau_q;
    std::vector<std::string> sets;  // generic key.path=value
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--seed", ov.seed, "Override the experiment seed");
    cmd->add_option("--clients", ov.clients, "Override num_clients");
    cmd->add_option("--rounds", ov.rounds, "Override num_rounds");
    cmd->add_option("--mu", ov.mu, "Override train.mu (proximal coefficient)");
    cmd->add_option("--epochs", ov.epochs, "Override train.local_epochs");
    cmd->add_option("--batch", ov.batch, "Override train.batch_size");
    cmd->add_option("--select", ov.select, "Enable/disable utility selection (on|off)")
        ->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--alpha", ov.alpha, "Override selection.alpha");
    cmd->add_option("--beta", ov.beta, "Override selection.beta");
    cmd->add_option("--tau-n", ov.tau_n, "Override selection.tau_n");
    cmd->add_option("--tau-q", ov.tau_q, "Override selection.tau_q");
    cmd->add_option("--set", ov.sets,
                    "Generic config override as key.path=value (repeatable), e.g. "
                    "--set train.learning_rate=0.005");
}

void set_json_path(json& root, const std::string& dotted, const json& value) {
    json* node = &root;
    std::size_t start = 0;
    for (;;) {
        const std::size_t dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot - start);
        if (key.empty()) throw mistfed::UsageError("--set: empty key segment in '" + dotted + "'");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

json apply_overrides(json cfg, const Overrides& ov) {
    if (ov.seed) cfg["seed"] = *ov.seed;
    if (ov.clients) cfg["num_clients"] = *ov.clients;
    if (ov.rounds) cfg["num_rounds"] = *ov.rounds;
    if (ov.mu) cfg["train"]["mu"] = *ov.mu;
    if (ov.epochs) cfg["train"]["local_epochs"] = *ov.epochs;
    if (ov.batch) cfg["train"]["batch_size"] = *ov.batch;
    if (ov.select) cfg["selection"]["enabled"] = (*ov.select == "on");
    if (ov.alpha) cfg["selection"]["alpha"] = *ov.alpha;
    if (ov.beta) cfg["selection"]["beta"] = *ov.beta;
    if (ov.tau_n) cfg["selection"]["tau_n"] = *ov.tau_n;
    if (ov.tau_q) cfg["selection"]["tau_q"] = *ov.tau_q;
    for (const auto& kv : ov.sets) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw mistfed::UsageError("--set expects key.path=value, got '" + kv + "'");
        }
        const std::string key = kv.substr(0, eq);
        const std::string raw = kv.substr(eq + 1);
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::exception&) {
            value = raw;  // bare strings are taken verbatim
        }
        set_json_path(cfg, key, value);
    }
    return cfg;
}

json load_config_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw mistfed::ConfigError("cannot open config file '" + path + "'");
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw mistfed::ConfigError("config file '" + path + "' is not valid JSON: " +
                                   std::string(e.what()));
    }
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw mistfed::UsageError("cannot open '" + path.string() + "' for writing");
    out << content;
}

void write_rounds_csv(const fs::path& path, const mistfed::ExperimentResult& result) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "round,skipped,active_count,accuracy,precision,recall,f1,roc_auc,pr_auc,"
           "drift_mean,drift_median,anomaly_flags,cloud_version,model_digest\n";
    for (const auto& r : result.rounds) {
        out << r.round << ',' << (r.skipped ? 1 : 0) << ',' << r.active.size() << ',';
        if (r.eval) {
            out << r.eval->accuracy << ',' << r.eval->precision << ',' << r.eval->recall << ','
                << r.eval->f1 << ',' << r.eval->roc_auc << ',' << r.eval->pr_auc << ',';
        } else {
            out << ",,,,,,";
        }
        out << r.drift_mean << ',' << r.drift_median << ',' << r.anomaly_flags << ','
            << r.cloud_version << ',' << r.model_digest << '\n';
    }
    write_text_file(path, out.str());
}

std::vector<std::size_t> parse_grid(const std::string& csv, const char* what) {
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            const long long v = std::stoll(item);
            if (v <= 0) throw std::invalid_argument("non-positive");
            out.push_back(static_cast<std::size_t>(v));
        } catch (...) {
            throw mistfed::UsageError(std::string(what) + ": '" + item +
                                      "' is not a positive integer");
        }
    }
    if (out.empty()) throw mistfed::UsageError(std::string(what) + ": empty grid");
    return out;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, const Overrides& ov,
            const std::string& format, const std::string& checkpoint_path) {
    const json cfg_json = apply_overrides(load_config_json(config_path), ov);
    const auto cfg = mistfed::ExperimentConfig::from_json(cfg_json);

    mistfed::ExperimentState final_state;
    const auto result = mistfed::run_experiment(cfg, &final_state);

    fs::create_directories(out_dir);
    if (format == "csv") {
        write_rounds_csv(fs::path(out_dir) / "rounds.csv", result);
    } else {
        write_text_file(fs::path(out_dir) / "rounds.jsonl", result.jsonl());
    }
    write_text_file(fs::path(out_dir) / "summary.json", result.summary_json().dump(2) + "\n");
    write_text_file(fs::path(out_dir) / "timings.json", result.timings_json().dump(2) + "\n");
    if (!result.curves.empty()) {
        fs::create_directories(fs::path(out_dir) / "curves");
        for (const auto& rc : result.curves) {
            std::ostringstream tag;
            tag << "round_" << std::setw(4) << std::setfill('0') << rc.round;
            mistfed::write_curve_csv(
                (fs::path(out_dir) / "curves" / ("roc_" + tag.str() + ".csv")).string(),
                rc.roc.points);
            mistfed::write_curve_csv(
                (fs::path(out_dir) / "curves" / ("pr_" + tag.str() + ".csv")).string(),
                rc.pr.points);
        }
    }
    if (!checkpoint_path.empty()) {
        mistfed::save_checkpoint(checkpoint_path, mistfed::make_checkpoint(final_state));
    }

    if (const auto* fin = result.final_round(); fin != nullptr && fin->eval) {
        std::cout << "final round " << fin->round << ": accuracy=" << fin->eval->accuracy
                  << " f1=" << fin->eval->f1 << " roc_auc=" << fin->eval->roc_auc
                  << " pr_auc=" << fin->eval->pr_auc << "\n";
    }
    std::cout << "reports written to " << out_dir << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, const Overrides& ov,
              const std::string& clients_csv, const std::string& rounds_csv) {
    const json cfg_json = apply_overrides(load_config_json(config_path), ov);
    const auto base = mistfed::ExperimentConfig::from_json(cfg_json);
    const auto clients_grid = parse_grid(clients_csv, "--clients");
    const auto rounds_grid = parse_grid(rounds_csv, "--rounds");

    const auto report = mistfed::run_sweep(base, clients_grid, rounds_grid);

    fs::create_directories(out_dir);
    write_text_file(fs::path(out_dir) / "sweep.json", report.to_json().dump(2) + "\n");
    write_text_file(fs::path(out_dir) / "timings.json", report.timings_json().dump(2) + "\n");

    std::size_t failed = 0;
    for (const auto& cell : report.cells) failed += cell.ok ? 0u : 1u;
    std::cout << "sweep: " << report.cells.size() << " cells, " << failed << " failed; report in "
              << out_dir << "\n";
    return 0;
}

int cmd_ingest_check(const std::string& csv_path, const std::string& schema_path,
                     const std::string& modality_id, const std::string& kind) {
    const auto schema = mistfed::CsvSchema::from_file(schema_path);
    mistfed::ModalitySpec spec;
    spec.modality_id = modality_id.empty() ? csv_path : modality_id;
    spec.kind = mistfed::modality_kind_from_string(kind);
    const auto ingest = mistfed::load_csv(csv_path, schema, spec);

    json j;
    j["path"] = csv_path;
    j["rows_total"] = ingest.stats.rows_total;
    j["rows_ingested"] = ingest.stats.rows_ingested;
    j["rows_invalid"] = ingest.stats.rows_invalid;
    j["rows_unparseable"] = ingest.stats.rows_unparseable;
    j["unparseable_rows"] = ingest.stats.unparseable_rows;
    j["feature_dim"] = ingest.stats.feature_dim;
    j["feature_names"] = ingest.stats.feature_names;
    j["label_mapping"] = ingest.stats.label_mapping;
    j["num_classes"] = ingest.num_classes;
    std::cout << j.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mistfed: deterministic mist/edge/fog/cloud federated IDS simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", format = "jsonl", checkpoint_path;
    Overrides ov;

    auto* run = app.add_subcommand("run", "Run one experiment and emit round reports");
    run->add_option("--config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--out", out_dir, "Output directory")->capture_default_str();
    run->add_option("--format", format, "Round report format")
        ->check(CLI::IsMember({"jsonl", "csv"}))
        ->capture_default_str();
    run->add_option("--save-checkpoint", checkpoint_path,
                    "Write a model checkpoint to this path after the last round");
    add_override_flags(run, ov);

    std::string clients_csv = "10,20,30,40,50,60,70,80,90,100";
    std::string rounds_csv = "50,100,150,200";
    auto* sweep = app.add_subcommand("sweep", "Run a clients x rounds grid of experiments");
    sweep->add_option("--config", config_path, "Base experiment config (JSON)")->required();
    sweep->add_option("--out", out_dir, "Output directory")->capture_default_str();
    sweep->add_option("--clients", clients_csv, "Comma list of client counts")
        ->capture_default_str();
    sweep->add_option("--rounds", rounds_csv, "Comma list of round counts")->capture_default_str();
    add_override_flags(sweep, ov);

    std::string csv_path, schema_path, modality_id, kind = "network_flow";
    auto* ingest = app.add_subcommand("ingest-check", "Parse a CSV source and report its shape");
    ingest->add_option("--csv", csv_path, "CSV file")->required();
    ingest->add_option("--schema", schema_path, "Column-role schema (JSON)")->required();
    ingest->add_option("--modality-id", modality_id, "Modality identifier (defaults to the path)");
    ingest->add_option("--kind", kind, "Modality kind")
        ->check(CLI::IsMember({"telemetry", "network_flow", "system_log_numeric"}))
        ->capture_default_str();

    auto* validate = app.add_subcommand("validate-config", "Parse and validate a config file");
    validate->add_option("--config", config_path, "Experiment config (JSON)")->required();

    auto* version = app.add_subcommand("version", "Print the version string");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what());
        return 2;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, out_dir, ov, format, checkpoint_path);
        if (sweep->parsed()) return cmd_sweep(config_path, out_dir, ov, clients_csv, rounds_csv);
        if (ingest->parsed()) return cmd_ingest_check(csv_path, schema_path, modality_id, kind);
        if (validate->parsed()) {
            const json cfg_json = apply_overrides(load_config_json(config_path), ov);
            (void)mistfed::ExperimentConfig::from_json(cfg_json);
            std::cout << "ok: " << config_path << "\n";
            return 0;
        }
        if (version->parsed()) {
            std::cout << mistfed::kProjectName << " " << mistfed::kVersion << "\n";
            return 0;
        }
    } catch (const mistfed::Error& e) {
        print_error(e.category(), e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 1;
    }
    return 0;
}
