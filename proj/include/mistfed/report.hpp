#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mistfed/metrics.hpp"

namespace mistfed {

struct ClientRoundStat {
    std::uint32_t client_id = 0;
    std::size_t num_samples = 0;      // train-split size used as the weight
    double local_loss_final = 0.0;
    double drift = 0.0;
};

struct EvalMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double roc_auc = 0.0;
    double pr_auc = 0.0;
    bool degenerate = false;
};

/// One federated round. Serialization is deterministic: wall_seconds is
/// reported separately through the timings file, never in the JSON here.
struct RoundReport {
    std::uint32_t round = 0;
    bool skipped = false;
    std::vector<std::uint32_t> active;
    std::vector<ClientRoundStat> clients;
    std::optional<EvalMetrics> eval;
    double drift_mean = 0.0;
    double drift_median = 0.0;
    std::size_t anomaly_flags = 0;
    std::uint64_t cloud_version = 0;
    std::string model_digest;
    double wall_seconds = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["round"] = round;
        j["skipped"] = skipped;
        j["active"] = active;
        nlohmann::json clients_json = nlohmann::json::array();
        for (const auto& c : clients) {
            clients_json.push_back({{"client_id", c.client_id},
                                    {"num_samples", c.num_samples},
                                    {"local_loss_final", c.local_loss_final},
                                    {"drift", c.drift}});
        }
        j["clients"] = clients_json;
        if (eval) {
            j["eval"] = {{"accuracy", eval->accuracy}, {"precision", eval->precision},
                         {"recall", eval->recall},     {"f1", eval->f1},
                         {"roc_auc", eval->roc_auc},   {"pr_auc", eval->pr_auc},
                         {"degenerate", eval->degenerate}};
        } else {
            j["eval"] = nullptr;
        }
        j["drift"] = {{"mean", drift_mean}, {"median", drift_median}};
        j["anomaly_flags"] = anomaly_flags;
        j["cloud_version"] = cloud_version;
        j["model_digest"] = model_digest;
        return j;
    }
};

struct RoundCurves {
    std::uint32_t round = 0;
    RocCurve roc;
    PrCurve pr;
};

struct ExperimentResult {
    std::vector<RoundReport> rounds;
    std::vector<RoundCurves> curves;
    nlohmann::json config_echo;
    std::map<std::string, int> label_mapping;
    std::size_t num_classes = 0;
    std::string version_string;
    std::uint64_t config_digest = 0;
    std::vector<double> round_wall_seconds;
    double total_wall_seconds = 0.0;

    /// One JSON object per round, newline-terminated; byte-stable per seed.
    std::string jsonl() const {
        std::string out;
        for (const auto& r : rounds) {
            out += r.to_json().dump();
            out += '\n';
        }
        return out;
    }

    const RoundReport* final_round() const {
        for (auto it = rounds.rbegin(); it != rounds.rend(); ++it) {
            if (!it->skipped) return &*it;
        }
        return rounds.empty() ? nullptr : &rounds.back();
    }

    double best_accuracy() const {
        double best = 0.0;
        for (const auto& r : rounds) {
            if (r.eval) best = std::max(best, r.eval->accuracy);
        }
        return best;
    }

    nlohmann::json summary_json() const {
        nlohmann::json j;
        j["config"] = config_echo;
        j["config_digest"] = digest_hex(config_digest);
        j["version"] = version_string;
        j["num_classes"] = num_classes;
        j["label_mapping"] = label_mapping;
        j["rounds_completed"] = rounds.size();
        std::size_t skipped = 0;
        for (const auto& r : rounds) skipped += r.skipped ? 1u : 0u;
        j["rounds_skipped"] = skipped;
        j["best_accuracy"] = best_accuracy();
        if (const auto* fin = final_round()) {
            j["final"] = fin->to_json();
        } else {
            j["final"] = nullptr;
        }
        return j;
    }

    nlohmann::json timings_json() const {
        nlohmann::json j;
        j["round_wall_seconds"] = round_wall_seconds;
        j["total_wall_seconds"] = total_wall_seconds;
        if (!round_wall_seconds.empty()) {
            const auto stats = runtime_stats(round_wall_seconds);
            j["round_stats"] = {{"mean", stats.mean},
                                {"median", stats.median},
                                {"min", stats.min},
                                {"max", stats.max}};
        }
        return j;
    }
};

struct SweepCell {
    std::size_t clients = 0;
    std::size_t rounds = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    nlohmann::json final_summary;  // final-round metrics, deterministic
    double wall_seconds = 0.0;
};

struct SweepReport {
    std::vector<std::size_t> clients_grid;
    std::vector<std::size_t> rounds_grid;
    std::uint64_t base_seed = 0;
    std::vector<SweepCell> cells;
    double total_wall_seconds = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["clients_grid"] = clients_grid;
        j["rounds_grid"] = rounds_grid;
        j["base_seed"] = base_seed;
        nlohmann::json cells_json = nlohmann::json::array();
        for (const auto& c : cells) {
            nlohmann::json cj = {{"clients", c.clients},
                                 {"rounds", c.rounds},
                                 {"seed", c.seed},
                                 {"ok", c.ok}};
            if (c.ok) cj["final"] = c.final_summary;
            else cj["error"] = c.error;
            cells_json.push_back(cj);
        }
        j["cells"] = cells_json;
        return j;
    }

    nlohmann::json timings_json() const {
        nlohmann::json j;
        std::vector<double> walls;
        for (const auto& c : cells) walls.push_back(c.wall_seconds);
        j["cell_wall_seconds"] = walls;
        j["total_wall_seconds"] = total_wall_seconds;
        return j;
    }
};

}  // namespace mistfed
