#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mistfed/encoder.hpp"
#include "mistfed/errors.hpp"
#include "mistfed/rng.hpp"

namespace mistfed {

/// One raw-modality sample. Label 0 is the normal class, >= 1 attack types.
struct RawSample {
    std::vector<double> x;
    int label = 0;
    bool valid = true;
};

struct ModalityBlock {
    ModalitySpec modality;
    std::vector<RawSample> samples;
};

struct PooledDataset {
    std::vector<ModalityBlock> blocks;
    std::size_t num_classes = 2;
    std::map<std::string, int> label_mapping;

    std::size_t total_samples() const {
        std::size_t n = 0;
        for (const auto& b : blocks) n += b.samples.size();
        return n;
    }
};

struct SyntheticSpec {
    std::vector<ModalitySpec> modalities;
    std::size_t samples_per_modality = 600;
    std::size_t num_classes = 2;
    double class_separation = 4.0;
    double corrupt_fraction = 0.02;

    /// Three heterogeneous modalities: telemetry (d=8), network flow (d=16),
    /// numeric system logs (d=12).
    static SyntheticSpec defaults() {
        SyntheticSpec s;
        s.modalities = {
            {"telemetry", 8, ModalityKind::telemetry},
            {"network_flow", 16, ModalityKind::network_flow},
            {"system_log", 12, ModalityKind::system_log_numeric},
        };
        return s;
    }
};

namespace detail {

/// Class mean directions: mutually orthonormal where the dimension allows,
/// scaled by `separation`, so pairwise mean distances scale linearly with it.
inline std::vector<std::vector<double>> class_means(std::size_t dim, std::size_t num_classes,
                                                    double separation, RngStream& rng) {
    std::vector<std::vector<double>> means(num_classes, std::vector<double>(dim, 0.0));
    std::vector<std::vector<double>> basis;
    for (std::size_t c = 0; c < num_classes; ++c) {
        std::vector<double> v(dim);
        for (auto& x : v) x = rng.next_gaussian();
        for (const auto& u : basis) {
            double proj = 0.0;
            for (std::size_t i = 0; i < dim; ++i) proj += u[i] * v[i];
            for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * u[i];
        }
        double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        if (norm < 1e-9) {
            // dimension exhausted (more classes than dims): reuse a random direction
            for (auto& x : v) x = rng.next_gaussian();
            norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        }
        for (auto& x : v) x /= norm;
        if (basis.size() < dim) basis.push_back(v);
        for (std::size_t i = 0; i < dim; ++i) means[c][i] = separation * v[i];
    }
    return means;
}

}  // namespace detail

/// Per modality and class, samples are unit-variance Gaussians around
/// class-specific means whose pairwise distance scales with
/// class_separation. Labels are balanced within each modality, and a
/// corrupt_fraction of samples is marked invalid with heavy (NaN-free)
/// noise injected.
inline PooledDataset generate_synthetic(const SyntheticSpec& spec, RngStream rng) {
    if (spec.modalities.empty()) throw UsageError("generate_synthetic: no modalities given");
    if (spec.num_classes < 2) throw UsageError("generate_synthetic: need at least 2 classes");
    if (spec.samples_per_modality < spec.num_classes) {
        throw UsageError("generate_synthetic: samples_per_modality must be >= num_classes");
    }
    if (!(spec.class_separation >= 0.0)) {
        throw UsageError("generate_synthetic: class_separation must be non-negative");
    }
    if (!(spec.corrupt_fraction >= 0.0 && spec.corrupt_fraction < 1.0)) {
        throw UsageError("generate_synthetic: corrupt_fraction must lie in [0, 1)");
    }
    for (const auto& m : spec.modalities) {
        if (m.raw_dim == 0) throw UsageError("generate_synthetic: raw_dim must be positive");
    }

    PooledDataset pooled;
    pooled.num_classes = spec.num_classes;
    if (spec.num_classes == 2) {
        pooled.label_mapping = {{"normal", 0}, {"attack", 1}};
    } else {
        pooled.label_mapping["normal"] = 0;
        for (std::size_t c = 1; c < spec.num_classes; ++c) {
            pooled.label_mapping["attack_" + std::to_string(c)] = static_cast<int>(c);
        }
    }

    for (const auto& modality : spec.modalities) {
        ModalityBlock block;
        block.modality = modality;
        const auto means =
            detail::class_means(modality.raw_dim, spec.num_classes, spec.class_separation, rng);
        const std::size_t base = spec.samples_per_modality / spec.num_classes;
        const std::size_t rem = spec.samples_per_modality % spec.num_classes;
        for (std::size_t c = 0; c < spec.num_classes; ++c) {
            const std::size_t count = base + (c < rem ? 1 : 0);
            for (std::size_t s = 0; s < count; ++s) {
                RawSample sample;
                sample.label = static_cast<int>(c);
                sample.x.resize(modality.raw_dim);
                for (std::size_t i = 0; i < modality.raw_dim; ++i) {
                    sample.x[i] = means[c][i] + rng.next_gaussian();
                }
                block.samples.push_back(std::move(sample));
            }
        }
        // corruption pass: pick indices, inject large noise, clear the flag
        const auto n_corrupt = static_cast<std::size_t>(
            std::llround(spec.corrupt_fraction * static_cast<double>(block.samples.size())));
        if (n_corrupt > 0) {
            std::vector<std::size_t> idx(block.samples.size());
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            rng.shuffle(std::span<std::size_t>(idx));
            for (std::size_t j = 0; j < n_corrupt; ++j) {
                auto& sample = block.samples[idx[j]];
                for (auto& x : sample.x) x += 10.0 * rng.next_gaussian();
                sample.valid = false;
            }
        }
        pooled.blocks.push_back(std::move(block));
    }
    return pooled;
}

enum class SkewMode { by_source_type, dirichlet };

inline std::string to_string(SkewMode mode) {
    return mode == SkewMode::by_source_type ? "by_source_type" : "dirichlet";
}

inline SkewMode skew_mode_from_string(const std::string& s) {
    if (s == "by_source_type") return SkewMode::by_source_type;
    if (s == "dirichlet") return SkewMode::dirichlet;
    throw ConfigError("unknown skew_mode '" + s + "'");
}

struct PartitionConfig {
    std::uint32_t num_clients = 10;
    SkewMode skew_mode = SkewMode::dirichlet;
    double dirichlet_alpha = 0.3;
    std::uint64_t seed = 0;  // informational; the caller seeds the passed stream from it
};

/// One client's local data: a single modality, split 80/20 into train and
/// validation (validation count floored).
struct ClientDataset {
    std::uint32_t client_id = 0;
    ModalitySpec modality;
    std::vector<RawSample> train;
    std::vector<RawSample> validation;

    std::size_t n() const { return train.size() + validation.size(); }
};

namespace detail {

/// Largest-remainder rounding of proportions to integer counts summing to n.
inline std::vector<std::size_t> proportional_counts(std::span<const double> proportions,
                                                    std::size_t n) {
    std::vector<std::size_t> counts(proportions.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < proportions.size(); ++i) {
        const double exact = proportions[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t j = 0; assigned < n; ++j, ++assigned) {
        counts[remainders[j % remainders.size()].second] += 1;
    }
    return counts;
}

}  // namespace detail

/// Partitions the pool across clients with no loss and no duplication.
///
/// Clients are first assigned one modality each, round-robin (client c gets
/// block c mod M), which keeps every client single-modality. Within a
/// modality group, by_source_type deals a shuffled pile evenly while
/// dirichlet draws per-class proportions over the group's clients from
/// Dirichlet(alpha) and assigns class piles accordingly. Each client is then
/// split 80/20 (validation floored) with a per-client substream.
inline std::vector<ClientDataset> partition_non_iid(const PooledDataset& pooled,
                                                    const PartitionConfig& config,
                                                    RngStream rng) {
    if (pooled.blocks.empty() || pooled.total_samples() == 0) {
        throw UsageError("partition_non_iid: pooled dataset is empty");
    }
    if (config.num_clients == 0) throw UsageError("partition_non_iid: need at least one client");
    if (config.num_clients > pooled.total_samples()) {
        throw UsageError("partition_non_iid: more clients than samples");
    }
    const std::size_t num_modalities = pooled.blocks.size();
    if (num_modalities > 1 && config.num_clients < num_modalities) {
        throw ConfigError("partition_non_iid: num_clients (" +
                          std::to_string(config.num_clients) +
                          ") must be >= the number of modalities (" +
                          std::to_string(num_modalities) +
                          ") so each client holds exactly one modality");
    }
    if (config.skew_mode == SkewMode::dirichlet && !(config.dirichlet_alpha > 0.0)) {
        throw ConfigError("partition_non_iid: dirichlet_alpha must be positive");
    }

    std::vector<ClientDataset> clients(config.num_clients);
    std::vector<std::vector<std::size_t>> assigned(config.num_clients);
    for (std::uint32_t c = 0; c < config.num_clients; ++c) {
        clients[c].client_id = c;
        clients[c].modality = pooled.blocks[c % num_modalities].modality;
    }

    for (std::size_t m = 0; m < num_modalities; ++m) {
        const auto& block = pooled.blocks[m];
        std::vector<std::uint32_t> group;
        for (std::uint32_t c = 0; c < config.num_clients; ++c) {
            if (c % num_modalities == m) group.push_back(c);
        }
        if (group.empty()) continue;

        if (config.skew_mode == SkewMode::by_source_type) {
            std::vector<std::size_t> idx(block.samples.size());
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            rng.shuffle(std::span<std::size_t>(idx));
            for (std::size_t j = 0; j < idx.size(); ++j) {
                assigned[group[j % group.size()]].push_back(idx[j]);
            }
        } else {
            std::map<int, std::vector<std::size_t>> by_class;
            for (std::size_t j = 0; j < block.samples.size(); ++j) {
                by_class[block.samples[j].label].push_back(j);
            }
            for (auto& [label, pile] : by_class) {
                rng.shuffle(std::span<std::size_t>(pile));
                const auto props = rng.dirichlet(config.dirichlet_alpha, group.size());
                const auto counts = detail::proportional_counts(props, pile.size());
                std::size_t cursor = 0;
                for (std::size_t g = 0; g < group.size(); ++g) {
                    for (std::size_t t = 0; t < counts[g]; ++t) {
                        assigned[group[g]].push_back(pile[cursor++]);
                    }
                }
            }
        }

        // starvation guard: every client must end with at least one sample
        for (std::uint32_t c : group) {
            if (!assigned[c].empty()) continue;
            std::uint32_t donor = group.front();
            for (std::uint32_t g : group) {
                if (assigned[g].size() > assigned[donor].size()) donor = g;
            }
            if (assigned[donor].size() < 2) {
                throw ConfigError("partition_non_iid: modality '" + block.modality.modality_id +
                                  "' has too few samples for its client group");
            }
            assigned[c].push_back(assigned[donor].back());
            assigned[donor].pop_back();
            std::cerr << "warning: client " << c << " received no samples; reassigned one from client "
                      << donor << "\n";
        }
    }

    // materialize and split 80/20 per client
    for (std::uint32_t c = 0; c < config.num_clients; ++c) {
        const auto& block = pooled.blocks[c % num_modalities];
        auto& idx = assigned[c];
        std::sort(idx.begin(), idx.end());
        RngStream split_rng = rng.split(0x80000000ull + c);
        split_rng.shuffle(std::span<std::size_t>(idx));
        const std::size_t n = idx.size();
        const auto val_count = static_cast<std::size_t>(
            std::floor(0.2 * static_cast<double>(n)));
        for (std::size_t j = 0; j < n; ++j) {
            const auto& sample = block.samples[idx[j]];
            if (j < n - val_count) clients[c].train.push_back(sample);
            else clients[c].validation.push_back(sample);
        }
    }
    return clients;
}

/// Data-quality indicator in [0, 1]:
///   Q = valid_weight * valid_ratio + (1 - valid_weight) * mean_entropy,
/// where mean_entropy averages, over the modality's features, the Shannon
/// entropy of an equal-width histogram over [min, max] normalized by
/// log(num_bins). Constant features contribute entropy 0.
inline double data_quality(const ClientDataset& ds, int num_bins = 16,
                           double valid_weight = 0.5) {
    const std::size_t n = ds.n();
    if (n == 0) throw UsageError("data_quality: client dataset is empty");
    if (num_bins < 2) throw UsageError("data_quality: num_bins must be >= 2");
    if (!(valid_weight >= 0.0 && valid_weight <= 1.0)) {
        throw UsageError("data_quality: valid_weight must lie in [0, 1]");
    }

    std::vector<const RawSample*> all;
    all.reserve(n);
    for (const auto& s : ds.train) all.push_back(&s);
    for (const auto& s : ds.validation) all.push_back(&s);

    std::size_t valid = 0;
    for (const auto* s : all) valid += s->valid ? 1u : 0u;
    const double valid_ratio = static_cast<double>(valid) / static_cast<double>(n);

    const std::size_t dim = ds.modality.raw_dim;
    double entropy_sum = 0.0;
    std::vector<std::size_t> hist(static_cast<std::size_t>(num_bins));
    for (std::size_t j = 0; j < dim; ++j) {
        double lo = all.front()->x[j], hi = lo;
        for (const auto* s : all) {
            lo = std::min(lo, s->x[j]);
            hi = std::max(hi, s->x[j]);
        }
        if (!(hi > lo)) continue;  // constant feature: entropy 0
        std::fill(hist.begin(), hist.end(), 0u);
        const double width = (hi - lo) / static_cast<double>(num_bins);
        for (const auto* s : all) {
            auto bin = static_cast<std::size_t>((s->x[j] - lo) / width);
            bin = std::min(bin, static_cast<std::size_t>(num_bins - 1));
            hist[bin] += 1;
        }
        double h = 0.0;
        for (std::size_t count : hist) {
            if (count == 0) continue;
            const double p = static_cast<double>(count) / static_cast<double>(n);
            h -= p * std::log(p);
        }
        entropy_sum += h / std::log(static_cast<double>(num_bins));
    }
    const double mean_entropy = entropy_sum / static_cast<double>(dim);
    return valid_weight * valid_ratio + (1.0 - valid_weight) * mean_entropy;
}

}  // namespace mistfed
