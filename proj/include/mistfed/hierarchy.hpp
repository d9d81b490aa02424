#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mistfed/errors.hpp"
#include "mistfed/model.hpp"
#include "mistfed/param_vector.hpp"

namespace mistfed {

/// Client -> edge -> fog wiring. Built contiguously from fan-out settings;
/// every client maps to exactly one edge, every edge to exactly one fog, and
/// no fog group is empty.
struct Topology {
    std::vector<std::uint32_t> client_to_edge;
    std::vector<std::uint32_t> edge_to_fog;

    static Topology build(std::size_t num_clients, std::size_t clients_per_edge,
                          std::size_t edges_per_fog) {
        if (num_clients == 0) throw ConfigError("Topology: need at least one client");
        if (clients_per_edge == 0 || edges_per_fog == 0) {
            throw ConfigError("Topology: fan-outs must be positive");
        }
        Topology topo;
        topo.client_to_edge.resize(num_clients);
        for (std::size_t c = 0; c < num_clients; ++c) {
            topo.client_to_edge[c] = static_cast<std::uint32_t>(c / clients_per_edge);
        }
        const std::size_t num_edges = (num_clients + clients_per_edge - 1) / clients_per_edge;
        topo.edge_to_fog.resize(num_edges);
        for (std::size_t e = 0; e < num_edges; ++e) {
            topo.edge_to_fog[e] = static_cast<std::uint32_t>(e / edges_per_fog);
        }
        return topo;
    }

    std::size_t num_clients() const { return client_to_edge.size(); }
    std::size_t num_edges() const { return edge_to_fog.size(); }
    std::size_t num_fogs() const {
        if (edge_to_fog.empty()) return 0;
        return static_cast<std::size_t>(*std::max_element(edge_to_fog.begin(),
                                                          edge_to_fog.end())) + 1;
    }

    std::uint32_t fog_of_client(std::uint32_t client) const {
        return edge_to_fog[client_to_edge[client]];
    }

    std::vector<std::vector<std::uint32_t>> clients_by_edge() const {
        std::vector<std::vector<std::uint32_t>> groups(num_edges());
        for (std::uint32_t c = 0; c < client_to_edge.size(); ++c) {
            groups[client_to_edge[c]].push_back(c);
        }
        return groups;
    }

    void validate() const {
        if (client_to_edge.empty()) throw ConfigError("Topology: no clients");
        for (std::uint32_t e : client_to_edge) {
            if (e >= edge_to_fog.size()) throw ConfigError("Topology: client maps to missing edge");
        }
        std::vector<bool> edge_used(num_edges(), false);
        for (std::uint32_t e : client_to_edge) edge_used[e] = true;
        std::vector<bool> fog_used(num_fogs(), false);
        for (std::size_t e = 0; e < edge_to_fog.size(); ++e) {
            if (edge_used[e]) fog_used[edge_to_fog[e]] = true;
        }
        for (bool used : fog_used) {
            if (!used) throw ConfigError("Topology: empty fog group");
        }
    }
};

/// What a Mist client reports upward for selection.
struct ClientMetadata {
    std::uint32_t client_id = 0;
    std::size_t n = 0;          // |D_i|, train + validation
    double quality = 0.0;       // Q_i in [0, 1]
    std::uint32_t rounds_participated = 0;
    std::optional<std::uint32_t> last_selected_round;
};

struct SelectionConfig {
    bool enabled = false;
    double alpha = 0.01;
    double beta = 1.0;
    std::size_t tau_n = 0;
    double tau_q = 0.0;
    std::optional<std::size_t> top_m;  // nullopt = keep all eligible
};

/// Composite utility U_i = alpha * n_i + beta * Q_i.
inline double utility_score(const ClientMetadata& meta, const SelectionConfig& sel) {
    return sel.alpha * static_cast<double>(meta.n) + sel.beta * meta.quality;
}

/// The active set: clients passing both thresholds, ranked by utility
/// descending with ascending-id tie-break, truncated to top_m. With
/// selection disabled every client is returned (ascending id).
inline std::vector<std::uint32_t> select_clients(std::span<const ClientMetadata> metas,
                                                 const SelectionConfig& sel) {
    if (metas.empty()) throw UsageError("select_clients: no client metadata");
    std::vector<std::uint32_t> ids;
    if (!sel.enabled) {
        ids.reserve(metas.size());
        for (const auto& m : metas) ids.push_back(m.client_id);
        std::sort(ids.begin(), ids.end());
        return ids;
    }
    if (!(sel.alpha >= 0.0 && sel.beta >= 0.0) || !(sel.alpha + sel.beta > 0.0)) {
        throw ConfigError("select_clients: alpha/beta must be non-negative, not both zero");
    }
    std::vector<const ClientMetadata*> eligible;
    for (const auto& m : metas) {
        if (m.n >= sel.tau_n && m.quality >= sel.tau_q) eligible.push_back(&m);
    }
    if (eligible.empty()) throw ProtocolError("no eligible clients");
    std::sort(eligible.begin(), eligible.end(),
              [&](const ClientMetadata* a, const ClientMetadata* b) {
                  const double ua = utility_score(*a, sel);
                  const double ub = utility_score(*b, sel);
                  if (ua != ub) return ua > ub;
                  return a->client_id < b->client_id;
              });
    if (sel.top_m && *sel.top_m < eligible.size()) eligible.resize(*sel.top_m);
    ids.reserve(eligible.size());
    for (const auto* m : eligible) ids.push_back(m->client_id);
    return ids;
}

/// Sample-weighted aggregation of client updates around the fog model:
/// w_fog' = fog_model + sum_i (n_i / N) * delta_i, reduced in ascending
/// client_id order so the result is bitwise deterministic.
inline ParamVector fog_aggregate(std::span<const ClientUpdate> updates,
                                 const ParamVector& fog_model) {
    if (updates.empty()) throw ProtocolError("fog_aggregate: no updates to aggregate");
    std::vector<std::size_t> order(updates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return updates[a].client_id < updates[b].client_id;
    });
    double total = 0.0;
    for (const auto& u : updates) {
        if (u.num_samples == 0) {
            throw ProtocolError("fog_aggregate: client " + std::to_string(u.client_id) +
                                " reports zero samples");
        }
        if (u.delta.size() != fog_model.size()) {
            throw ConfigError("fog_aggregate: update length of client " +
                              std::to_string(u.client_id) + " differs from the fog model");
        }
        total += static_cast<double>(u.num_samples);
    }
    double weight_sum = 0.0;
    ParamVector result = fog_model;
    for (std::size_t i : order) {
        const double w = static_cast<double>(updates[i].num_samples) / total;
        weight_sum += w;
        result.axpy(w, updates[i].delta);
    }
    if (std::abs(weight_sum - 1.0) > 1e-12) {
        throw NumericError("fog_aggregate: weights sum to " + std::to_string(weight_sum));
    }
    return result;
}

/// Versioned global model held at the Cloud.
struct CloudState {
    ParamVector global_model;
    std::uint64_t version = 0;

    struct HistoryEntry {
        std::uint64_t version;
        std::uint32_t round;
        std::uint64_t digest;
    };
    std::vector<HistoryEntry> history;
};

struct FogModel {
    std::uint32_t fog_id = 0;
    ParamVector model;
    std::size_t total_samples = 0;
};

/// Consolidates fog models into the next global model (sample-count weights
/// by default, uniform on request), bumps the version and appends to the
/// history. Computed as base + sum w_f (m_f - base) so that identical fog
/// models reproduce themselves exactly.
inline CloudState cloud_consolidate(std::span<const FogModel> fog_models, CloudState state,
                                    std::uint32_t round, bool uniform_weights = false) {
    if (fog_models.empty()) throw ProtocolError("cloud_consolidate: no fog models");
    std::vector<std::size_t> order(fog_models.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return fog_models[a].fog_id < fog_models[b].fog_id;
    });
    const std::size_t len = fog_models.front().model.size();
    double total = 0.0;
    for (const auto& f : fog_models) {
        if (f.model.size() != len) {
            throw ProtocolError("cloud_consolidate: fog model lengths differ");
        }
        total += uniform_weights ? 1.0 : static_cast<double>(f.total_samples);
    }
    if (!(total > 0.0)) throw ProtocolError("cloud_consolidate: zero total sample mass");

    const ParamVector& base = fog_models[order.front()].model;
    ParamVector global = base;
    for (std::size_t i : order) {
        const double w =
            (uniform_weights ? 1.0 : static_cast<double>(fog_models[i].total_samples)) / total;
        for (std::size_t j = 0; j < len; ++j) {
            global[j] += w * (fog_models[i].model[j] - base[j]);
        }
    }
    state.global_model = std::move(global);
    state.version += 1;
    state.history.push_back({state.version, round, param_digest(state.global_model)});
    return state;
}

/// Value-equal copies of the global model for every active client. Edges
/// pass the model through unchanged; the received copy doubles as the fog
/// anchor for the proximal term.
inline std::map<std::uint32_t, ParamVector> disseminate(const CloudState& state,
                                                        const Topology& topology,
                                                        std::span<const std::uint32_t> active) {
    if (state.global_model.empty()) throw ProtocolError("disseminate: no global model yet");
    std::map<std::uint32_t, ParamVector> copies;
    for (std::uint32_t c : active) {
        if (c >= topology.num_clients()) {
            throw ProtocolError("disseminate: unknown client " + std::to_string(c));
        }
        copies.emplace(c, state.global_model);
    }
    return copies;
}

struct AnomalyResult {
    bool flagged = false;
    double attack_probability = 0.0;
};

/// Mist-side check: flag when the predicted attack mass 1 - P(normal)
/// reaches the threshold.
inline AnomalyResult mist_anomaly_flag(const ParamVector& model, const MlpConfig& cfg,
                                       std::span<const double> z, double threshold = 0.9) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw UsageError("mist_anomaly_flag: threshold must lie in [0, 1]");
    }
    const auto probs = forward(model, cfg, z);
    const double attack = 1.0 - probs[0];
    return {attack >= threshold, attack};
}

}  // namespace mistfed
