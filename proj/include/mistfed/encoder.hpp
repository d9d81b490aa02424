#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mistfed/errors.hpp"
#include "mistfed/optim.hpp"
#include "mistfed/param_vector.hpp"
#include "mistfed/rng.hpp"

namespace mistfed {

enum class ModalityKind { telemetry, network_flow, system_log_numeric };

inline std::string to_string(ModalityKind kind) {
    switch (kind) {
        case ModalityKind::telemetry: return "telemetry";
        case ModalityKind::network_flow: return "network_flow";
        case ModalityKind::system_log_numeric: return "system_log_numeric";
    }
    return "telemetry";
}

inline ModalityKind modality_kind_from_string(const std::string& s) {
    if (s == "telemetry") return ModalityKind::telemetry;
    if (s == "network_flow") return ModalityKind::network_flow;
    if (s == "system_log_numeric") return ModalityKind::system_log_numeric;
    throw ConfigError("unknown modality kind '" + s + "'");
}

/// One raw data modality: its identifier, native dimensionality and kind.
struct ModalitySpec {
    std::string modality_id;
    std::size_t raw_dim = 1;
    ModalityKind kind = ModalityKind::telemetry;
};

enum class Nonlinearity { tanh, identity };

inline std::string to_string(Nonlinearity nl) {
    return nl == Nonlinearity::tanh ? "tanh" : "identity";
}

inline Nonlinearity nonlinearity_from_string(const std::string& s) {
    if (s == "tanh") return Nonlinearity::tanh;
    if (s == "identity") return Nonlinearity::identity;
    throw ConfigError("unknown nonlinearity '" + s + "'");
}

/// Per-modality feature abstractor: z = act(W x + b), mapping raw_dim inputs
/// to the shared k-dimensional space. `weights` holds W (k x raw_dim,
/// row-major) followed by b (k). `decoder_weights` keeps the decoder half
/// from pretraining (raw_dim x k plus raw_dim biases) so few-shot
/// fine-tuning can rebuild its reconstruction objective; it may be empty for
/// hand-built encoders.
struct EncoderParams {
    std::string modality_id;
    std::size_t raw_dim = 0;
    std::size_t k = 64;
    Nonlinearity nonlinearity = Nonlinearity::tanh;
    ParamVector weights;
    ParamVector decoder_weights;

    std::size_t encoder_len() const { return k * raw_dim + k; }
    std::size_t decoder_len() const { return raw_dim * k + raw_dim; }

    void validate() const {
        if (raw_dim == 0 || k == 0) throw ConfigError("EncoderParams: raw_dim and k must be positive");
        if (weights.size() != encoder_len()) {
            throw ConfigError("EncoderParams: weight length " + std::to_string(weights.size()) +
                              " does not match k*raw_dim+k = " + std::to_string(encoder_len()));
        }
        if (!decoder_weights.empty() && decoder_weights.size() != decoder_len()) {
            throw ConfigError("EncoderParams: decoder length does not match raw_dim*k+raw_dim");
        }
        weights.check_finite("EncoderParams");
    }
};

/// z = act(W x + b). Pure and deterministic.
inline std::vector<double> encode(const EncoderParams& enc, std::span<const double> x) {
    enc.validate();
    if (x.size() != enc.raw_dim) {
        throw ConfigError("encode: input length " + std::to_string(x.size()) +
                          " does not match raw_dim " + std::to_string(enc.raw_dim) +
                          " of modality '" + enc.modality_id + "'");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) {
            throw DataError("encode: non-finite input at dimension " + std::to_string(i) +
                            " of modality '" + enc.modality_id + "'");
        }
    }
    std::vector<double> z(enc.k);
    const std::size_t b_off = enc.k * enc.raw_dim;
    for (std::size_t o = 0; o < enc.k; ++o) {
        double acc = enc.weights[b_off + o];
        const std::size_t row = o * enc.raw_dim;
        for (std::size_t i = 0; i < enc.raw_dim; ++i) acc += enc.weights[row + i] * x[i];
        z[o] = (enc.nonlinearity == Nonlinearity::tanh) ? std::tanh(acc) : acc;
    }
    return z;
}

namespace detail {

/// Autoencoder parameter pack: [Wenc | benc | Wdec | bdec] as one flat vector.
struct AutoencoderDims {
    std::size_t d, k;
    std::size_t enc_w = 0, enc_b, dec_w, dec_b, total;

    AutoencoderDims(std::size_t d_, std::size_t k_) : d(d_), k(k_) {
        enc_b = k * d;
        dec_w = enc_b + k;
        dec_b = dec_w + d * k;
        total = dec_b + d;
    }
};

/// Mean over samples of the per-dimension mean squared reconstruction error.
inline double reconstruction_loss_packed(const ParamVector& p, const AutoencoderDims& dims,
                                         Nonlinearity nl,
                                         std::span<const std::vector<double>> data) {
    double total = 0.0;
    std::vector<double> h(dims.k);
    for (const auto& x : data) {
        for (std::size_t o = 0; o < dims.k; ++o) {
            double acc = p[dims.enc_b + o];
            const std::size_t row = o * dims.d;
            for (std::size_t i = 0; i < dims.d; ++i) acc += p[row + i] * x[i];
            h[o] = (nl == Nonlinearity::tanh) ? std::tanh(acc) : acc;
        }
        double err = 0.0;
        for (std::size_t o = 0; o < dims.d; ++o) {
            double acc = p[dims.dec_b + o];
            const std::size_t row = dims.dec_w + o * dims.k;
            for (std::size_t i = 0; i < dims.k; ++i) acc += p[row + i] * h[i];
            const double e = acc - x[o];
            err += e * e;
        }
        total += err / static_cast<double>(dims.d);
    }
    return total / static_cast<double>(data.size());
}

inline void reconstruction_grad_packed(const ParamVector& p, const AutoencoderDims& dims,
                                       Nonlinearity nl,
                                       std::span<const std::vector<double>> data,
                                       ParamVector& grad_out) {
    grad_out *= 0.0;
    const double scale = 2.0 / (static_cast<double>(dims.d) * static_cast<double>(data.size()));
    std::vector<double> pre(dims.k), h(dims.k), err(dims.d), dh(dims.k);
    for (const auto& x : data) {
        for (std::size_t o = 0; o < dims.k; ++o) {
            double acc = p[dims.enc_b + o];
            const std::size_t row = o * dims.d;
            for (std::size_t i = 0; i < dims.d; ++i) acc += p[row + i] * x[i];
            pre[o] = acc;
            h[o] = (nl == Nonlinearity::tanh) ? std::tanh(acc) : acc;
        }
        for (std::size_t o = 0; o < dims.d; ++o) {
            double acc = p[dims.dec_b + o];
            const std::size_t row = dims.dec_w + o * dims.k;
            for (std::size_t i = 0; i < dims.k; ++i) acc += p[row + i] * h[i];
            err[o] = scale * (acc - x[o]);
        }
        // decoder grads and backprop into h
        std::fill(dh.begin(), dh.end(), 0.0);
        for (std::size_t o = 0; o < dims.d; ++o) {
            grad_out[dims.dec_b + o] += err[o];
            const std::size_t row = dims.dec_w + o * dims.k;
            for (std::size_t i = 0; i < dims.k; ++i) {
                grad_out[row + i] += err[o] * h[i];
                dh[i] += p[row + i] * err[o];
            }
        }
        for (std::size_t o = 0; o < dims.k; ++o) {
            const double dpre =
                (nl == Nonlinearity::tanh) ? dh[o] * (1.0 - h[o] * h[o]) : dh[o];
            grad_out[dims.enc_b + o] += dpre;
            const std::size_t row = o * dims.d;
            for (std::size_t i = 0; i < dims.d; ++i) grad_out[row + i] += dpre * x[i];
        }
    }
}

inline void check_modality_data(std::span<const std::vector<double>> data, std::size_t d,
                                const std::string& modality_id) {
    for (std::size_t s = 0; s < data.size(); ++s) {
        if (data[s].size() != d) {
            throw ConfigError("encoder: sample " + std::to_string(s) + " has dimension " +
                              std::to_string(data[s].size()) + ", expected " + std::to_string(d) +
                              " for modality '" + modality_id + "'");
        }
        for (std::size_t i = 0; i < d; ++i) {
            if (!std::isfinite(data[s][i])) {
                throw DataError("encoder: non-finite value in sample " + std::to_string(s) +
                                " of modality '" + modality_id + "'");
            }
        }
    }
}

inline ParamVector init_autoencoder(const AutoencoderDims& dims, RngStream& rng) {
    ParamVector p(dims.total);
    const double enc_bound = 1.0 / std::sqrt(static_cast<double>(dims.d));
    for (std::size_t i = 0; i < dims.k * dims.d; ++i) {
        p[i] = (2.0 * rng.next_double() - 1.0) * enc_bound;
    }
    const double dec_bound = 1.0 / std::sqrt(static_cast<double>(dims.k));
    for (std::size_t i = 0; i < dims.d * dims.k; ++i) {
        p[dims.dec_w + i] = (2.0 * rng.next_double() - 1.0) * dec_bound;
    }
    return p;
}

inline ParamVector pack_autoencoder(const EncoderParams& enc, const AutoencoderDims& dims,
                                    RngStream& rng) {
    ParamVector p = init_autoencoder(dims, rng);
    for (std::size_t i = 0; i < enc.encoder_len(); ++i) p[i] = enc.weights[i];
    if (!enc.decoder_weights.empty()) {
        for (std::size_t i = 0; i < enc.decoder_len(); ++i) {
            p[dims.dec_w + i] = enc.decoder_weights[i];
        }
    }
    return p;
}

inline EncoderParams unpack_autoencoder(const ParamVector& p, const AutoencoderDims& dims,
                                        const std::string& modality_id, Nonlinearity nl) {
    EncoderParams enc;
    enc.modality_id = modality_id;
    enc.raw_dim = dims.d;
    enc.k = dims.k;
    enc.nonlinearity = nl;
    std::vector<double> w(p.values().begin(), p.values().begin() + static_cast<long>(dims.dec_w));
    enc.weights = ParamVector(std::move(w));
    std::vector<double> dec(p.values().begin() + static_cast<long>(dims.dec_w), p.values().end());
    enc.decoder_weights = ParamVector(std::move(dec));
    return enc;
}

/// Adam over mini-batches of the reconstruction objective, keeping the
/// parameters with the best full-sample loss seen at epoch boundaries
/// (entry included), so the returned loss never exceeds the entry loss.
inline ParamVector train_autoencoder(ParamVector params, const AutoencoderDims& dims,
                                     Nonlinearity nl, std::span<const std::vector<double>> data,
                                     int epochs, RngStream& rng, std::size_t batch_size = 32) {
    AdamState adam = AdamState::init(params.size(), 0.01);
    ParamVector g(params.size());
    std::vector<std::uint32_t> order(data.size());
    std::iota(order.begin(), order.end(), 0u);

    ParamVector best = params;
    double best_loss = reconstruction_loss_packed(params, dims, nl, data);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(std::span<std::uint32_t>(order));
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t stop = std::min(start + batch_size, order.size());
            std::vector<std::vector<double>> view;
            view.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) view.push_back(data[order[i]]);
            reconstruction_grad_packed(params, dims, nl, view, g);
            adam_step_inplace(params, g, adam);
        }
        const double l = reconstruction_loss_packed(params, dims, nl, data);
        if (l < best_loss) {
            best_loss = l;
            best = params;
        }
    }
    return best;
}

}  // namespace detail

/// Reconstruction loss of an encoder over data; requires the decoder half.
inline double reconstruction_loss(const EncoderParams& enc,
                                  std::span<const std::vector<double>> data) {
    enc.validate();
    if (enc.decoder_weights.empty()) {
        throw UsageError("reconstruction_loss: encoder has no decoder half");
    }
    if (data.empty()) throw UsageError("reconstruction_loss: data must be non-empty");
    detail::check_modality_data(data, enc.raw_dim, enc.modality_id);
    const detail::AutoencoderDims dims(enc.raw_dim, enc.k);
    ParamVector p(dims.total);
    for (std::size_t i = 0; i < enc.encoder_len(); ++i) p[i] = enc.weights[i];
    for (std::size_t i = 0; i < enc.decoder_len(); ++i) p[dims.dec_w + i] = enc.decoder_weights[i];
    return detail::reconstruction_loss_packed(p, dims, enc.nonlinearity, data);
}

/// Trains an autoencoder (encoder d->k, decoder k->d, mean-squared
/// reconstruction loss, Adam) on the representative sample and returns the
/// encoder half with its decoder attached. The exit loss never exceeds the
/// entry loss.
inline EncoderParams pretrain_encoder(const ModalitySpec& modality,
                                      const std::vector<std::vector<double>>& representative,
                                      std::size_t k, int epochs, RngStream rng,
                                      Nonlinearity nonlinearity = Nonlinearity::tanh) {
    if (representative.empty()) {
        throw UsageError("pretrain_encoder: representative sample must be non-empty");
    }
    if (k == 0) throw ConfigError("pretrain_encoder: k must be positive");
    if (epochs < 0) throw ConfigError("pretrain_encoder: epochs must be non-negative");
    detail::check_modality_data(representative, modality.raw_dim, modality.modality_id);

    const detail::AutoencoderDims dims(modality.raw_dim, k);
    ParamVector params = detail::init_autoencoder(dims, rng);
    params = detail::train_autoencoder(std::move(params), dims, nonlinearity, representative,
                                       epochs, rng);
    return detail::unpack_autoencoder(params, dims, modality.modality_id, nonlinearity);
}

struct FinetuneResult {
    EncoderParams encoder;
    bool empty_shots_warning = false;
};

/// A few full-batch reconstruction steps from `enc`, keeping the best seen
/// iterate. Empty shots return the encoder unchanged with the warning flag;
/// a missing decoder half is initialized from `rng`.
inline FinetuneResult finetune_encoder(const EncoderParams& enc,
                                       const std::vector<std::vector<double>>& shots, int steps,
                                       RngStream rng) {
    enc.validate();
    if (shots.empty()) return {enc, true};
    if (steps <= 0) return {enc, false};
    detail::check_modality_data(shots, enc.raw_dim, enc.modality_id);

    const detail::AutoencoderDims dims(enc.raw_dim, enc.k);
    ParamVector params = detail::pack_autoencoder(enc, dims, rng);
    AdamState adam = AdamState::init(params.size(), 0.01);
    ParamVector g(params.size());
    ParamVector best = params;
    double best_loss = detail::reconstruction_loss_packed(params, dims, enc.nonlinearity, shots);
    for (int s = 0; s < steps; ++s) {
        detail::reconstruction_grad_packed(params, dims, enc.nonlinearity, shots, g);
        adam_step_inplace(params, g, adam);
        const double l = detail::reconstruction_loss_packed(params, dims, enc.nonlinearity, shots);
        if (l < best_loss) {
            best_loss = l;
            best = params;
        }
    }
    return {detail::unpack_autoencoder(best, dims, enc.modality_id, enc.nonlinearity), false};
}

}  // namespace mistfed
