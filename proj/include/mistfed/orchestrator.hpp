#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mistfed/checkpoint.hpp"
#include "mistfed/config.hpp"
#include "mistfed/csv.hpp"
#include "mistfed/data.hpp"
#include "mistfed/encoder.hpp"
#include "mistfed/hierarchy.hpp"
#include "mistfed/metrics.hpp"
#include "mistfed/model.hpp"
#include "mistfed/parallel.hpp"
#include "mistfed/report.hpp"
#include "mistfed/rng.hpp"
#include "mistfed/version.hpp"

namespace mistfed {

/// Purpose tags for derive_stream; every random decision in an experiment
/// hangs off (experiment seed, tag, ...) so runs replay exactly.
namespace stream_tag {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kPartition = 2;
inline constexpr std::uint64_t kEncoder = 3;
inline constexpr std::uint64_t kModelInit = 4;
inline constexpr std::uint64_t kTrain = 5;
inline constexpr std::uint64_t kFinetune = 6;
inline constexpr std::uint64_t kSweepCell = 7;
}  // namespace stream_tag

/// Mutable state of one running experiment.
struct ExperimentState {
    ExperimentConfig cfg;
    Topology topology;
    std::vector<ClientDataset> clients;
    std::map<std::string, EncoderParams> encoders;      // by modality_id
    std::vector<EncoderParams> client_encoders;         // per client (fine-tuned copies)
    std::vector<std::vector<Example>> train_features;   // per client, encoded
    std::vector<std::vector<Example>> val_features;     // per client, encoded
    std::vector<Example> pooled_validation;             // union, ascending client order
    std::vector<ClientMetadata> metadata;
    MlpConfig model_config;
    CloudState cloud;
    std::size_t num_classes = 2;
    std::map<std::string, int> label_mapping;
    std::uint32_t next_round = 1;
};

/// Deterministic per-cell seed for sweeps: FNV-1a chain over
/// (base seed, cell tag, clients, rounds).
inline std::uint64_t sweep_cell_seed(std::uint64_t base_seed, std::size_t clients,
                                     std::size_t rounds) {
    std::uint64_t h = fnv1a64_u64(base_seed);
    h = fnv1a64_u64(stream_tag::kSweepCell, h);
    h = fnv1a64_u64(clients, h);
    h = fnv1a64_u64(rounds, h);
    return h;
}

/// File-spanning label mapping used by the CSV path; exposed for ingest-check.
inline std::map<std::string, int> csv_label_mapping(const std::set<std::string>& values) {
    return detail::build_label_mapping(values);
}

namespace detail {

inline PooledDataset build_pooled_dataset(const ExperimentConfig& cfg) {
    if (cfg.data.source == "synthetic") {
        return generate_synthetic(cfg.data.synthetic, derive_stream(cfg.seed, stream_tag::kData));
    }
    // CSV path: one modality per file, then a file-spanning label mapping so
    // classes agree across sources.
    PooledDataset pooled;
    std::vector<std::vector<std::string>> raw_labels;
    std::set<std::string> label_values;
    for (const auto& src : cfg.data.csv_sources) {
        const CsvSchema schema = CsvSchema::from_file(src.schema_path);
        ModalitySpec spec;
        spec.modality_id = src.modality_id;
        spec.kind = src.kind;
        auto ingest = load_csv(src.path, schema, spec);
        label_values.insert(ingest.raw_labels.begin(), ingest.raw_labels.end());
        raw_labels.push_back(std::move(ingest.raw_labels));
        pooled.blocks.push_back(std::move(ingest.block));
    }
    pooled.label_mapping = csv_label_mapping(label_values);
    if (pooled.label_mapping.size() < 2) {
        throw DataError("CSV ingestion produced fewer than two classes");
    }
    pooled.num_classes = pooled.label_mapping.size();
    for (std::size_t b = 0; b < pooled.blocks.size(); ++b) {
        for (std::size_t s = 0; s < pooled.blocks[b].samples.size(); ++s) {
            pooled.blocks[b].samples[s].label = pooled.label_mapping.at(raw_labels[b][s]);
        }
    }
    return pooled;
}

/// Min-max rescale of each client's raw features over its own samples.
inline void rescale_per_client(std::vector<ClientDataset>& clients) {
    for (auto& client : clients) {
        const std::size_t dim = client.modality.raw_dim;
        std::vector<double> lo(dim), hi(dim);
        bool first = true;
        auto visit = [&](const std::vector<RawSample>& part) {
            for (const auto& s : part) {
                for (std::size_t j = 0; j < dim; ++j) {
                    if (first) {
                        lo[j] = hi[j] = s.x[j];
                    } else {
                        lo[j] = std::min(lo[j], s.x[j]);
                        hi[j] = std::max(hi[j], s.x[j]);
                    }
                }
                first = false;
            }
        };
        visit(client.train);
        visit(client.validation);
        auto scale = [&](std::vector<RawSample>& part) {
            for (auto& s : part) {
                for (std::size_t j = 0; j < dim; ++j) {
                    s.x[j] = hi[j] > lo[j] ? (s.x[j] - lo[j]) / (hi[j] - lo[j]) : 0.0;
                }
            }
        };
        scale(client.train);
        scale(client.validation);
    }
}

}  // namespace detail

/// Builds everything a round needs: data, partition, topology, pretrained
/// encoders, cached features, quality metadata and the seed-initialized
/// model.
inline ExperimentState setup_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentState state;
    state.cfg = cfg;

    PooledDataset pooled = detail::build_pooled_dataset(cfg);
    state.num_classes = pooled.num_classes;
    state.label_mapping = pooled.label_mapping;

    PartitionConfig pcfg;
    pcfg.num_clients = cfg.num_clients;
    pcfg.skew_mode = cfg.partition.skew_mode;
    pcfg.dirichlet_alpha = cfg.partition.dirichlet_alpha;
    pcfg.seed = cfg.seed;
    state.clients =
        partition_non_iid(pooled, pcfg, derive_stream(cfg.seed, stream_tag::kPartition));
    if (cfg.data.per_client_scaling) detail::rescale_per_client(state.clients);

    state.topology =
        Topology::build(cfg.num_clients, cfg.topology.clients_per_edge, cfg.topology.edges_per_fog);
    state.topology.validate();

    // Fog-side encoder pretraining on a representative slice of each
    // modality's pooled training data (fraction capped at pretrain_cap).
    for (std::size_t b = 0; b < pooled.blocks.size(); ++b) {
        const auto& modality = pooled.blocks[b].modality;
        std::vector<std::vector<double>> modality_train;
        for (const auto& client : state.clients) {
            if (client.modality.modality_id != modality.modality_id) continue;
            for (const auto& s : client.train) modality_train.push_back(s.x);
        }
        if (modality_train.empty()) {
            throw ProtocolError("no training data for modality '" + modality.modality_id + "'");
        }
        auto rng = derive_stream(cfg.seed, stream_tag::kEncoder, b);
        std::size_t take = static_cast<std::size_t>(std::ceil(
            cfg.encoder.pretrain_fraction * static_cast<double>(modality_train.size())));
        take = std::clamp<std::size_t>(take, std::min<std::size_t>(2, modality_train.size()),
                                       std::min(cfg.encoder.pretrain_cap, modality_train.size()));
        std::vector<std::size_t> idx(modality_train.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(idx));
        std::vector<std::vector<double>> representative;
        representative.reserve(take);
        for (std::size_t i = 0; i < take; ++i) representative.push_back(modality_train[idx[i]]);
        state.encoders[modality.modality_id] =
            pretrain_encoder(modality, representative, cfg.encoder.k, cfg.encoder.pretrain_epochs,
                             rng, cfg.encoder.nonlinearity);
    }

    // Per-client encoder copies, optionally few-shot fine-tuned.
    state.client_encoders.reserve(state.clients.size());
    for (const auto& client : state.clients) {
        EncoderParams enc = state.encoders.at(client.modality.modality_id);
        if (cfg.encoder.finetune_enabled) {
            std::vector<std::vector<double>> shots;
            const std::size_t want = std::min(cfg.encoder.finetune_shots, client.train.size());
            for (std::size_t i = 0; i < want; ++i) shots.push_back(client.train[i].x);
            auto rng = derive_stream(cfg.seed, stream_tag::kFinetune, client.client_id);
            enc = finetune_encoder(enc, shots, cfg.encoder.finetune_steps, rng).encoder;
        }
        state.client_encoders.push_back(std::move(enc));
    }

    // Feature cache: encoders are frozen during rounds, so encode once.
    state.train_features.resize(state.clients.size());
    state.val_features.resize(state.clients.size());
    for (std::size_t c = 0; c < state.clients.size(); ++c) {
        const auto& enc = state.client_encoders[c];
        auto encode_part = [&](const std::vector<RawSample>& part, std::vector<Example>& out) {
            out.reserve(part.size());
            for (const auto& s : part) out.push_back({encode(enc, s.x), s.label});
        };
        encode_part(state.clients[c].train, state.train_features[c]);
        encode_part(state.clients[c].validation, state.val_features[c]);
    }
    for (std::size_t c = 0; c < state.clients.size(); ++c) {
        for (const auto& ex : state.val_features[c]) state.pooled_validation.push_back(ex);
    }

    state.metadata.reserve(state.clients.size());
    for (const auto& client : state.clients) {
        ClientMetadata meta;
        meta.client_id = client.client_id;
        meta.n = client.n();
        meta.quality = data_quality(client, cfg.quality.num_bins, cfg.quality.valid_weight);
        state.metadata.push_back(meta);
    }

    state.model_config.input_dim = cfg.encoder.k;
    state.model_config.hidden_dims = cfg.model.hidden_dims;
    state.model_config.num_classes = state.num_classes;
    state.model_config.dropout_rate = cfg.model.dropout_rate;

    auto init_rng = derive_stream(cfg.seed, stream_tag::kModelInit);
    state.cloud.global_model = init_params(state.model_config, init_rng);
    return state;
}

/// Global-model evaluation on an encoded sample set: argmax predictions for
/// the confusion metrics, positive-class probabilities for the binary
/// ROC/PR curves (macro one-vs-rest beyond two classes).
inline EvalMetrics evaluate_model(const MlpConfig& cfg, const ParamVector& params,
                                  std::span<const Example> eval_set, int positive_class,
                                  RocCurve* roc_out = nullptr, PrCurve* pr_out = nullptr) {
    if (eval_set.empty()) throw UsageError("evaluate_model: empty evaluation set");
    std::vector<int> predictions(eval_set.size());
    std::vector<int> labels(eval_set.size());
    std::vector<std::vector<double>> probabilities(eval_set.size());
    for (std::size_t i = 0; i < eval_set.size(); ++i) {
        probabilities[i] = forward(params, cfg, eval_set[i].features);
        const auto& p = probabilities[i];
        predictions[i] =
            static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        labels[i] = eval_set[i].label;
    }
    const auto cls = classification_metrics(predictions, labels, positive_class);
    EvalMetrics metrics;
    metrics.accuracy = cls.accuracy;
    metrics.precision = cls.precision;
    metrics.recall = cls.recall;
    metrics.f1 = cls.f1;
    metrics.degenerate = cls.degenerate;
    if (cfg.num_classes == 2) {
        std::vector<double> scores(eval_set.size());
        for (std::size_t i = 0; i < eval_set.size(); ++i) {
            scores[i] = probabilities[i][static_cast<std::size_t>(positive_class)];
        }
        const auto roc = roc_auc(scores, labels, positive_class);
        const auto pr = pr_auc(scores, labels, positive_class);
        metrics.roc_auc = roc.auc;
        metrics.pr_auc = pr.auc;
        if (roc_out) *roc_out = roc;
        if (pr_out) *pr_out = pr;
    } else {
        metrics.roc_auc = macro_ovr_roc_auc(probabilities, labels);
        metrics.pr_auc = macro_ovr_pr_auc(probabilities, labels);
    }
    return metrics;
}

/// One synchronous round: per-edge selection, dissemination, parallel local
/// training, per-fog aggregation, cloud consolidation and evaluation. An
/// empty active set records a skipped round and carries the model forward.
inline RoundReport run_round(ExperimentState& state) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& cfg = state.cfg;
    const std::uint32_t round = state.next_round;
    RoundReport report;
    report.round = round;

    // Edge-level selection over each edge's own clients.
    std::vector<std::uint32_t> active;
    for (const auto& edge_clients : state.topology.clients_by_edge()) {
        if (edge_clients.empty()) continue;
        std::vector<ClientMetadata> metas;
        metas.reserve(edge_clients.size());
        for (std::uint32_t c : edge_clients) metas.push_back(state.metadata[c]);
        try {
            const auto selected = select_clients(metas, cfg.selection);
            active.insert(active.end(), selected.begin(), selected.end());
        } catch (const ProtocolError&) {
            // this edge has no eligible clients this round
        }
    }
    std::sort(active.begin(), active.end());

    state.next_round += 1;
    report.cloud_version = state.cloud.version;
    report.model_digest = digest_hex(param_digest(state.cloud.global_model));
    if (active.empty()) {
        report.skipped = true;
        report.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return report;
    }
    report.active = active;

    // Model flows down unchanged; the received copy is the FedProx anchor.
    const ParamVector reference = state.cloud.global_model;
    auto copies = disseminate(state.cloud, state.topology, active);

    std::vector<ClientUpdate> updates(active.size());
    parallel_for(active.size(), [&](std::size_t i) {
        const std::uint32_t c = active[i];
        auto rng = derive_stream(cfg.seed, stream_tag::kTrain, round, c);
        updates[i] = local_train(copies.at(c), copies.at(c), state.model_config, cfg.train,
                                 state.train_features[c], rng, c);
    });

    // Per-fog aggregation in ascending fog order, then cloud consolidation.
    std::map<std::uint32_t, std::vector<ClientUpdate>> per_fog;
    for (std::size_t i = 0; i < active.size(); ++i) {
        per_fog[state.topology.fog_of_client(active[i])].push_back(updates[i]);
    }
    std::vector<FogModel> fog_models;
    fog_models.reserve(per_fog.size());
    for (const auto& [fog_id, fog_updates] : per_fog) {
        FogModel fm;
        fm.fog_id = fog_id;
        fm.model = fog_aggregate(fog_updates, reference);
        fm.total_samples = 0;
        for (const auto& u : fog_updates) fm.total_samples += u.num_samples;
        fog_models.push_back(std::move(fm));
    }
    state.cloud =
        cloud_consolidate(fog_models, std::move(state.cloud), round, cfg.uniform_cloud_weights);
    report.cloud_version = state.cloud.version;
    report.model_digest = digest_hex(param_digest(state.cloud.global_model));

    // Metadata bookkeeping for the next round's selection.
    for (std::uint32_t c : active) {
        state.metadata[c].rounds_participated += 1;
        state.metadata[c].last_selected_round = round;
    }

    // Client drift against the disseminated reference.
    std::vector<ParamVector> post_models;
    post_models.reserve(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) {
        post_models.push_back(reference + updates[i].delta);
    }
    const auto drift = model_drift(post_models, reference);
    report.drift_mean = drift.mean;
    report.drift_median = drift.median;
    report.clients.reserve(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) {
        report.clients.push_back({active[i], updates[i].num_samples,
                                  updates[i].local_loss_final, drift.per_client[i]});
    }

    // Mist-level anomaly flags on each active client's validation slice,
    // using the model it received this round.
    std::size_t flags = 0;
    for (std::uint32_t c : active) {
        for (const auto& ex : state.val_features[c]) {
            if (mist_anomaly_flag(reference, state.model_config, ex.features,
                                  cfg.evaluation.anomaly_threshold)
                    .flagged) {
                ++flags;
            }
        }
    }
    report.anomaly_flags = flags;

    const bool evaluate = (round % static_cast<std::uint32_t>(cfg.evaluation.cadence) == 0) ||
                          round == cfg.num_rounds;
    if (evaluate) {
        report.eval = evaluate_model(state.model_config, state.cloud.global_model,
                                     state.pooled_validation, cfg.evaluation.positive_class);
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

/// Pretrain, partition, initialize, then run num_rounds rounds. The final
/// state is copied out when requested (for checkpointing).
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       ExperimentState* final_state = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentState state = setup_experiment(cfg);
    ExperimentResult result;
    result.config_echo = cfg.to_json();
    result.config_digest = cfg.digest();
    result.version_string = std::string(kProjectName) + " " + std::string(kVersion);
    result.label_mapping = state.label_mapping;
    result.num_classes = state.num_classes;
    for (std::uint32_t r = 1; r <= cfg.num_rounds; ++r) {
        RoundReport report = run_round(state);
        result.round_wall_seconds.push_back(report.wall_seconds);
        const bool want_curves =
            cfg.evaluation.curves == "all" ||
            (cfg.evaluation.curves == "final" && r == cfg.num_rounds);
        if (want_curves && report.eval && state.num_classes == 2) {
            RoundCurves rc;
            rc.round = report.round;
            evaluate_model(state.model_config, state.cloud.global_model,
                           state.pooled_validation, cfg.evaluation.positive_class, &rc.roc,
                           &rc.pr);
            result.curves.push_back(std::move(rc));
        }
        result.rounds.push_back(std::move(report));
    }
    result.total_wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (final_state != nullptr) *final_state = std::move(state);
    return result;
}

/// Independent experiments over the clients x rounds grid; cell seeds are
/// derived from the base seed so cells are reproducible in isolation and may
/// run concurrently. A failing cell is recorded in place.
inline SweepReport run_sweep(const ExperimentConfig& base,
                             std::span<const std::size_t> clients_grid,
                             std::span<const std::size_t> rounds_grid) {
    if (clients_grid.empty() || rounds_grid.empty()) {
        throw UsageError("run_sweep: grids must be non-empty");
    }
    const auto t0 = std::chrono::steady_clock::now();
    SweepReport report;
    report.clients_grid.assign(clients_grid.begin(), clients_grid.end());
    report.rounds_grid.assign(rounds_grid.begin(), rounds_grid.end());
    report.base_seed = base.seed;
    report.cells.resize(clients_grid.size() * rounds_grid.size());

    parallel_for(report.cells.size(), [&](std::size_t i) {
        const std::size_t ci = i / rounds_grid.size();
        const std::size_t ri = i % rounds_grid.size();
        SweepCell& cell = report.cells[i];
        cell.clients = clients_grid[ci];
        cell.rounds = rounds_grid[ri];
        cell.seed = sweep_cell_seed(base.seed, cell.clients, cell.rounds);
        const auto c0 = std::chrono::steady_clock::now();
        try {
            ExperimentConfig cfg = base;
            cfg.num_clients = static_cast<std::uint32_t>(cell.clients);
            cfg.num_rounds = static_cast<std::uint32_t>(cell.rounds);
            cfg.seed = cell.seed;
            cfg.evaluation.curves = "none";
            const auto result = run_experiment(cfg);
            if (const auto* fin = result.final_round()) {
                cell.final_summary = fin->to_json();
            }
            cell.ok = true;
        } catch (const std::exception& e) {
            cell.ok = false;
            cell.error = e.what();
        }
        cell.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - c0).count();
    });
    report.total_wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

/// Checkpoint of the current global model plus the encoders that produced
/// its feature space.
inline Checkpoint make_checkpoint(const ExperimentState& state) {
    Checkpoint ckpt;
    ckpt.config_digest = state.cfg.digest();
    ckpt.model_version = state.cloud.version;
    ckpt.round = state.next_round - 1;
    ckpt.model_config = state.model_config;
    ckpt.global_model = state.cloud.global_model;
    for (const auto& [id, enc] : state.encoders) ckpt.encoders.push_back(enc);
    return ckpt;
}

/// Resumed evaluation: rebuilds the data pipeline from the config, encodes
/// the pooled validation split with the checkpointed encoders, and evaluates
/// the checkpointed model. With the matching config this reproduces the
/// run's final evaluation exactly.
inline EvalMetrics evaluate_checkpoint(const ExperimentConfig& cfg, const Checkpoint& ckpt) {
    if (ckpt.config_digest != cfg.digest()) {
        throw ConfigError("evaluate_checkpoint: checkpoint was produced by a different config");
    }
    if (cfg.encoder.finetune_enabled) {
        throw UsageError("evaluate_checkpoint: resumed evaluation requires frozen encoders");
    }
    cfg.validate();
    PooledDataset pooled = detail::build_pooled_dataset(cfg);
    PartitionConfig pcfg;
    pcfg.num_clients = cfg.num_clients;
    pcfg.skew_mode = cfg.partition.skew_mode;
    pcfg.dirichlet_alpha = cfg.partition.dirichlet_alpha;
    pcfg.seed = cfg.seed;
    auto clients = partition_non_iid(pooled, pcfg, derive_stream(cfg.seed, stream_tag::kPartition));
    if (cfg.data.per_client_scaling) detail::rescale_per_client(clients);

    std::map<std::string, const EncoderParams*> by_modality;
    for (const auto& enc : ckpt.encoders) by_modality[enc.modality_id] = &enc;
    std::vector<Example> pooled_validation;
    for (const auto& client : clients) {
        const auto it = by_modality.find(client.modality.modality_id);
        if (it == by_modality.end()) {
            throw ConfigError("evaluate_checkpoint: checkpoint lacks an encoder for modality '" +
                              client.modality.modality_id + "'");
        }
        for (const auto& s : client.validation) {
            pooled_validation.push_back({encode(*it->second, s.x), s.label});
        }
    }
    return evaluate_model(ckpt.model_config, ckpt.global_model, pooled_validation,
                          cfg.evaluation.positive_class);
}

}  // namespace mistfed
