#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mistfed/data.hpp"
#include "mistfed/digest.hpp"
#include "mistfed/encoder.hpp"
#include "mistfed/errors.hpp"
#include "mistfed/hierarchy.hpp"
#include "mistfed/model.hpp"

namespace mistfed {

struct TopologyConfig {
    std::size_t clients_per_edge = 5;
    std::size_t edges_per_fog = 2;
};

struct EncoderConfig {
    std::size_t k = 64;
    double pretrain_fraction = 0.05;
    std::size_t pretrain_cap = 500;
    int pretrain_epochs = 40;
    Nonlinearity nonlinearity = Nonlinearity::tanh;
    bool finetune_enabled = false;
    int finetune_steps = 10;
    std::size_t finetune_shots = 10;
};

struct EvaluationConfig {
    int cadence = 1;               // evaluate every N rounds (final round always)
    double anomaly_threshold = 0.9;
    int positive_class = 1;
    std::string curves = "final";  // none | final | all
};

struct QualityConfig {
    int num_bins = 16;
    double valid_weight = 0.5;
};

struct CsvSourceConfig {
    std::string path;
    std::string schema_path;
    std::string modality_id;
    ModalityKind kind = ModalityKind::network_flow;
};

struct DataConfig {
    std::string source = "synthetic";  // synthetic | csv
    SyntheticSpec synthetic = SyntheticSpec::defaults();
    std::vector<CsvSourceConfig> csv_sources;
    bool per_client_scaling = false;
};

struct ModelConfig {
    std::vector<std::size_t> hidden_dims{64, 32};
    double dropout_rate = 0.1;
};

struct PartitionSettings {
    SkewMode skew_mode = SkewMode::dirichlet;
    double dirichlet_alpha = 0.3;
};

/// Full experiment description. Defaults mirror the benchmark protocol:
/// mu = 0.01, 5 local epochs, batch 32, k = 64, selection available but off.
struct ExperimentConfig {
    std::uint64_t seed = 42;
    std::uint32_t num_clients = 10;
    std::uint32_t num_rounds = 50;
    TopologyConfig topology;
    TrainHyper train;
    ModelConfig model;
    SelectionConfig selection;
    PartitionSettings partition;
    DataConfig data;
    EncoderConfig encoder;
    EvaluationConfig evaluation;
    QualityConfig quality;
    bool uniform_cloud_weights = false;

    void validate() const;
    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load_file(const std::string& path);

    std::uint64_t digest() const { return fnv1a64(to_json().dump()); }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const char* section,
                                std::initializer_list<const char*> known) {
    if (!j.is_object()) {
        throw ConfigError(std::string("config section '") + section + "' must be an object");
    }
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (key == k) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw ConfigError(std::string("unknown key '") + key + "' in config section '" +
                              section + "'");
        }
    }
}

template <typename T>
void get_if_present(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
    if (num_clients == 0) throw ConfigError("num_clients must be positive");
    if (topology.clients_per_edge == 0 || topology.edges_per_fog == 0) {
        throw ConfigError("topology fan-outs must be positive");
    }
    if (train.local_epochs < 1) throw ConfigError("train.local_epochs must be >= 1");
    if (train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(train.mu >= 0.0)) throw ConfigError("train.mu must be non-negative");
    if (!(train.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
    if (!(model.dropout_rate >= 0.0 && model.dropout_rate < 1.0)) {
        throw ConfigError("model.dropout_rate must lie in [0, 1)");
    }
    for (std::size_t h : model.hidden_dims) {
        if (h == 0) throw ConfigError("model.hidden_dims entries must be positive");
    }
    if (selection.enabled && !(selection.alpha + selection.beta > 0.0)) {
        throw ConfigError("selection.alpha + selection.beta must be positive when enabled");
    }
    if (!(selection.tau_q >= 0.0 && selection.tau_q <= 1.0)) {
        throw ConfigError("selection.tau_q must lie in [0, 1]");
    }
    if (partition.skew_mode == SkewMode::dirichlet && !(partition.dirichlet_alpha > 0.0)) {
        throw ConfigError("partition.dirichlet_alpha must be positive");
    }
    if (data.source != "synthetic" && data.source != "csv") {
        throw ConfigError("data.source must be 'synthetic' or 'csv'");
    }
    if (data.source == "csv" && data.csv_sources.empty()) {
        throw ConfigError("data.source is 'csv' but data.csv defines no sources");
    }
    if (data.source == "synthetic") {
        if (data.synthetic.modalities.empty()) {
            throw ConfigError("data.synthetic.modalities must be non-empty");
        }
        if (data.synthetic.num_classes < 2) {
            throw ConfigError("data.synthetic.num_classes must be >= 2");
        }
    }
    if (encoder.k == 0) throw ConfigError("encoder.k must be positive");
    if (!(encoder.pretrain_fraction > 0.0 && encoder.pretrain_fraction <= 1.0)) {
        throw ConfigError("encoder.pretrain_fraction must lie in (0, 1]");
    }
    if (encoder.pretrain_epochs < 0) throw ConfigError("encoder.pretrain_epochs must be >= 0");
    if (evaluation.cadence < 1) throw ConfigError("evaluation.cadence must be >= 1");
    if (!(evaluation.anomaly_threshold >= 0.0 && evaluation.anomaly_threshold <= 1.0)) {
        throw ConfigError("evaluation.anomaly_threshold must lie in [0, 1]");
    }
    if (evaluation.curves != "none" && evaluation.curves != "final" &&
        evaluation.curves != "all") {
        throw ConfigError("evaluation.curves must be one of none|final|all");
    }
    if (quality.num_bins < 2) throw ConfigError("quality.num_bins must be >= 2");
}

inline nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["num_clients"] = num_clients;
    j["num_rounds"] = num_rounds;
    j["topology"] = {{"clients_per_edge", topology.clients_per_edge},
                     {"edges_per_fog", topology.edges_per_fog}};
    j["train"] = {{"mu", train.mu},
                  {"local_epochs", train.local_epochs},
                  {"batch_size", train.batch_size},
                  {"learning_rate", train.learning_rate},
                  {"optimizer", train.optimizer == OptimizerKind::adam ? "adam" : "gd"}};
    j["model"] = {{"hidden_dims", model.hidden_dims}, {"dropout_rate", model.dropout_rate}};
    nlohmann::json sel = {{"enabled", selection.enabled}, {"alpha", selection.alpha},
                          {"beta", selection.beta},       {"tau_n", selection.tau_n},
                          {"tau_q", selection.tau_q}};
    if (selection.top_m) sel["top_m"] = *selection.top_m;
    else sel["top_m"] = "all";
    j["selection"] = sel;
    j["partition"] = {{"skew_mode", to_string(partition.skew_mode)},
                      {"dirichlet_alpha", partition.dirichlet_alpha}};
    nlohmann::json modalities = nlohmann::json::array();
    for (const auto& m : data.synthetic.modalities) {
        modalities.push_back({{"id", m.modality_id},
                              {"raw_dim", m.raw_dim},
                              {"kind", to_string(m.kind)}});
    }
    nlohmann::json csv_sources = nlohmann::json::array();
    for (const auto& s : data.csv_sources) {
        csv_sources.push_back({{"path", s.path},
                               {"schema", s.schema_path},
                               {"modality_id", s.modality_id},
                               {"kind", to_string(s.kind)}});
    }
    j["data"] = {{"source", data.source},
                 {"synthetic",
                  {{"modalities", modalities},
                   {"samples_per_modality", data.synthetic.samples_per_modality},
                   {"num_classes", data.synthetic.num_classes},
                   {"class_separation", data.synthetic.class_separation},
                   {"corrupt_fraction", data.synthetic.corrupt_fraction}}},
                 {"csv", csv_sources},
                 {"per_client_scaling", data.per_client_scaling}};
    j["encoder"] = {{"k", encoder.k},
                    {"pretrain_fraction", encoder.pretrain_fraction},
                    {"pretrain_cap", encoder.pretrain_cap},
                    {"pretrain_epochs", encoder.pretrain_epochs},
                    {"nonlinearity", to_string(encoder.nonlinearity)},
                    {"finetune",
                     {{"enabled", encoder.finetune_enabled},
                      {"steps", encoder.finetune_steps},
                      {"shots", encoder.finetune_shots}}}};
    j["evaluation"] = {{"cadence", evaluation.cadence},
                       {"anomaly_threshold", evaluation.anomaly_threshold},
                       {"positive_class", evaluation.positive_class},
                       {"curves", evaluation.curves}};
    j["quality"] = {{"num_bins", quality.num_bins}, {"valid_weight", quality.valid_weight}};
    j["uniform_cloud_weights"] = uniform_cloud_weights;
    return j;
}

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    using detail::get_if_present;
    using detail::reject_unknown_keys;
    ExperimentConfig cfg;
    reject_unknown_keys(j, "root",
                        {"seed", "num_clients", "num_rounds", "topology", "train", "model",
                         "selection", "partition", "data", "encoder", "evaluation", "quality",
                         "uniform_cloud_weights"});
    get_if_present(j, "seed", cfg.seed);
    get_if_present(j, "num_clients", cfg.num_clients);
    get_if_present(j, "num_rounds", cfg.num_rounds);
    get_if_present(j, "uniform_cloud_weights", cfg.uniform_cloud_weights);

    if (j.contains("topology")) {
        const auto& t = j.at("topology");
        reject_unknown_keys(t, "topology", {"clients_per_edge", "edges_per_fog"});
        get_if_present(t, "clients_per_edge", cfg.topology.clients_per_edge);
        get_if_present(t, "edges_per_fog", cfg.topology.edges_per_fog);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        reject_unknown_keys(t, "train",
                            {"mu", "local_epochs", "batch_size", "learning_rate", "optimizer"});
        get_if_present(t, "mu", cfg.train.mu);
        get_if_present(t, "local_epochs", cfg.train.local_epochs);
        get_if_present(t, "batch_size", cfg.train.batch_size);
        get_if_present(t, "learning_rate", cfg.train.learning_rate);
        if (t.contains("optimizer")) {
            const auto name = t.at("optimizer").get<std::string>();
            if (name == "adam") cfg.train.optimizer = OptimizerKind::adam;
            else if (name == "gd") cfg.train.optimizer = OptimizerKind::gd;
            else throw ConfigError("train.optimizer must be 'adam' or 'gd'");
        }
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        reject_unknown_keys(m, "model", {"hidden_dims", "dropout_rate"});
        get_if_present(m, "hidden_dims", cfg.model.hidden_dims);
        get_if_present(m, "dropout_rate", cfg.model.dropout_rate);
    }
    if (j.contains("selection")) {
        const auto& s = j.at("selection");
        reject_unknown_keys(s, "selection", {"enabled", "alpha", "beta", "tau_n", "tau_q", "top_m"});
        get_if_present(s, "enabled", cfg.selection.enabled);
        get_if_present(s, "alpha", cfg.selection.alpha);
        get_if_present(s, "beta", cfg.selection.beta);
        get_if_present(s, "tau_n", cfg.selection.tau_n);
        get_if_present(s, "tau_q", cfg.selection.tau_q);
        if (s.contains("top_m")) {
            const auto& tm = s.at("top_m");
            if (tm.is_string()) {
                if (tm.get<std::string>() != "all") {
                    throw ConfigError("selection.top_m must be an integer or \"all\"");
                }
                cfg.selection.top_m.reset();
            } else if (tm.is_number_unsigned() || tm.is_number_integer()) {
                const auto v = tm.get<long long>();
                if (v <= 0) cfg.selection.top_m.reset();
                else cfg.selection.top_m = static_cast<std::size_t>(v);
            } else {
                throw ConfigError("selection.top_m must be an integer or \"all\"");
            }
        }
    }
    if (j.contains("partition")) {
        const auto& p = j.at("partition");
        reject_unknown_keys(p, "partition", {"skew_mode", "dirichlet_alpha"});
        if (p.contains("skew_mode")) {
            cfg.partition.skew_mode = skew_mode_from_string(p.at("skew_mode").get<std::string>());
        }
        get_if_present(p, "dirichlet_alpha", cfg.partition.dirichlet_alpha);
    }
    if (j.contains("data")) {
        const auto& d = j.at("data");
        reject_unknown_keys(d, "data", {"source", "synthetic", "csv", "per_client_scaling"});
        get_if_present(d, "source", cfg.data.source);
        get_if_present(d, "per_client_scaling", cfg.data.per_client_scaling);
        if (d.contains("synthetic")) {
            const auto& s = d.at("synthetic");
            reject_unknown_keys(s, "data.synthetic",
                                {"modalities", "samples_per_modality", "num_classes",
                                 "class_separation", "corrupt_fraction"});
            if (s.contains("modalities")) {
                cfg.data.synthetic.modalities.clear();
                for (const auto& m : s.at("modalities")) {
                    reject_unknown_keys(m, "data.synthetic.modalities[]",
                                        {"id", "raw_dim", "kind"});
                    ModalitySpec spec;
                    spec.modality_id = m.at("id").get<std::string>();
                    spec.raw_dim = m.at("raw_dim").get<std::size_t>();
                    if (m.contains("kind")) {
                        spec.kind = modality_kind_from_string(m.at("kind").get<std::string>());
                    }
                    cfg.data.synthetic.modalities.push_back(std::move(spec));
                }
            }
            get_if_present(s, "samples_per_modality", cfg.data.synthetic.samples_per_modality);
            get_if_present(s, "num_classes", cfg.data.synthetic.num_classes);
            get_if_present(s, "class_separation", cfg.data.synthetic.class_separation);
            get_if_present(s, "corrupt_fraction", cfg.data.synthetic.corrupt_fraction);
        }
        if (d.contains("csv")) {
            cfg.data.csv_sources.clear();
            for (const auto& s : d.at("csv")) {
                reject_unknown_keys(s, "data.csv[]", {"path", "schema", "modality_id", "kind"});
                CsvSourceConfig src;
                src.path = s.at("path").get<std::string>();
                src.schema_path = s.at("schema").get<std::string>();
                if (s.contains("modality_id")) {
                    src.modality_id = s.at("modality_id").get<std::string>();
                } else {
                    src.modality_id = src.path;
                }
                if (s.contains("kind")) {
                    src.kind = modality_kind_from_string(s.at("kind").get<std::string>());
                }
                cfg.data.csv_sources.push_back(std::move(src));
            }
        }
    }
    if (j.contains("encoder")) {
        const auto& e = j.at("encoder");
        reject_unknown_keys(e, "encoder",
                            {"k", "pretrain_fraction", "pretrain_cap", "pretrain_epochs",
                             "nonlinearity", "finetune"});
        get_if_present(e, "k", cfg.encoder.k);
        get_if_present(e, "pretrain_fraction", cfg.encoder.pretrain_fraction);
        get_if_present(e, "pretrain_cap", cfg.encoder.pretrain_cap);
        get_if_present(e, "pretrain_epochs", cfg.encoder.pretrain_epochs);
        if (e.contains("nonlinearity")) {
            cfg.encoder.nonlinearity =
                nonlinearity_from_string(e.at("nonlinearity").get<std::string>());
        }
        if (e.contains("finetune")) {
            const auto& f = e.at("finetune");
            reject_unknown_keys(f, "encoder.finetune", {"enabled", "steps", "shots"});
            get_if_present(f, "enabled", cfg.encoder.finetune_enabled);
            get_if_present(f, "steps", cfg.encoder.finetune_steps);
            get_if_present(f, "shots", cfg.encoder.finetune_shots);
        }
    }
    if (j.contains("evaluation")) {
        const auto& e = j.at("evaluation");
        reject_unknown_keys(e, "evaluation",
                            {"cadence", "anomaly_threshold", "positive_class", "curves"});
        get_if_present(e, "cadence", cfg.evaluation.cadence);
        get_if_present(e, "anomaly_threshold", cfg.evaluation.anomaly_threshold);
        get_if_present(e, "positive_class", cfg.evaluation.positive_class);
        get_if_present(e, "curves", cfg.evaluation.curves);
    }
    if (j.contains("quality")) {
        const auto& q = j.at("quality");
        reject_unknown_keys(q, "quality", {"num_bins", "valid_weight"});
        get_if_present(q, "num_bins", cfg.quality.num_bins);
        get_if_present(q, "valid_weight", cfg.quality.valid_weight);
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig ExperimentConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return from_json(j);
}

}  // namespace mistfed
