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

/// One abstracted sample: a k-dimensional feature vector and its class.
struct Example {
    std::vector<double> features;
    int label = 0;
};

/// Classifier head operating on abstracted features: affine layers with tanh
/// hidden activations and a softmax output. hidden_dims may be empty
/// (plain multinomial logistic regression).
struct MlpConfig {
    std::size_t input_dim = 64;
    std::vector<std::size_t> hidden_dims{64, 32};
    std::size_t num_classes = 2;
    double dropout_rate = 0.1;

    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> dims;
        dims.reserve(hidden_dims.size() + 2);
        dims.push_back(input_dim);
        dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
        dims.push_back(num_classes);
        return dims;
    }

    std::size_t param_count() const {
        const auto dims = layer_dims();
        std::size_t total = 0;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) total += dims[l + 1] * (dims[l] + 1);
        return total;
    }

    void validate() const {
        if (input_dim == 0) throw ConfigError("MlpConfig: input_dim must be positive");
        for (std::size_t h : hidden_dims) {
            if (h == 0) throw ConfigError("MlpConfig: hidden layer widths must be positive");
        }
        if (num_classes < 2) throw ConfigError("MlpConfig: num_classes must be at least 2");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
            throw ConfigError("MlpConfig: dropout_rate must lie in [0, 1)");
        }
    }
};

enum class OptimizerKind { adam, gd };

/// Local-training hyperparameters, including the proximal coefficient mu.
struct TrainHyper {
    double mu = 0.01;
    int local_epochs = 5;
    int batch_size = 32;
    double learning_rate = 0.01;
    OptimizerKind optimizer = OptimizerKind::adam;
};

/// Result of one client's local training pass.
struct ClientUpdate {
    ParamVector delta;              // trained - received
    std::size_t num_samples = 0;    // train-split size, the aggregation weight
    std::uint32_t client_id = 0;
    double local_loss_final = 0.0;  // proximal objective on the full train split
};

namespace detail {

struct LayerView {
    std::size_t w_off, b_off, in, out;
};

inline std::vector<LayerView> layer_views(const MlpConfig& cfg) {
    const auto dims = cfg.layer_dims();
    std::vector<LayerView> views;
    views.reserve(dims.size() - 1);
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        LayerView v{off, off + dims[l + 1] * dims[l], dims[l], dims[l + 1]};
        views.push_back(v);
        off = v.b_off + v.out;
    }
    return views;
}

inline void check_model_inputs(const ParamVector& params, const MlpConfig& cfg) {
    cfg.validate();
    if (params.size() != cfg.param_count()) {
        throw ConfigError("model: parameter length " + std::to_string(params.size()) +
                          " does not match config (" + std::to_string(cfg.param_count()) + ")");
    }
}

/// Scratch buffers reused across samples within one grad/training call.
struct Workspace {
    std::vector<std::vector<double>> acts;    // per layer boundary activations
    std::vector<std::vector<double>> masks;   // dropout masks per hidden layer
    std::vector<double> delta, delta_prev;

    explicit Workspace(const MlpConfig& cfg) {
        const auto dims = cfg.layer_dims();
        acts.resize(dims.size());
        for (std::size_t i = 0; i < dims.size(); ++i) acts[i].resize(dims[i]);
        masks.resize(cfg.hidden_dims.size());
        for (std::size_t i = 0; i < masks.size(); ++i) masks[i].resize(cfg.hidden_dims[i]);
        const std::size_t widest = *std::max_element(dims.begin(), dims.end());
        delta.resize(widest);
        delta_prev.resize(widest);
    }
};

/// Forward pass for one sample. Hidden activations get inverted dropout when
/// dropout_rng is non-null. Returns the cross-entropy of the sample.
inline double forward_sample(const ParamVector& params, const MlpConfig& cfg,
                             std::span<const double> z, int label, Workspace& ws,
                             double dropout_rate, RngStream* dropout_rng) {
    const auto views = layer_views(cfg);
    std::copy(z.begin(), z.end(), ws.acts[0].begin());
    for (std::size_t l = 0; l < views.size(); ++l) {
        const auto& v = views[l];
        const auto& in = ws.acts[l];
        auto& out = ws.acts[l + 1];
        for (std::size_t o = 0; o < v.out; ++o) {
            double acc = params[v.b_off + o];
            const std::size_t row = v.w_off + o * v.in;
            for (std::size_t i = 0; i < v.in; ++i) acc += params[row + i] * in[i];
            out[o] = acc;
        }
        if (l + 1 < views.size()) {
            for (auto& x : out) x = std::tanh(x);
            if (dropout_rng != nullptr && dropout_rate > 0.0) {
                auto& mask = ws.masks[l];
                const double keep = 1.0 - dropout_rate;
                for (std::size_t o = 0; o < v.out; ++o) {
                    mask[o] = (dropout_rng->next_double() >= dropout_rate) ? 1.0 / keep : 0.0;
                    out[o] *= mask[o];
                }
            }
        }
    }
    // softmax + cross-entropy via log-sum-exp
    auto& logits = ws.acts.back();
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double x : logits) sum += std::exp(x - m);
    const double lse = m + std::log(sum);
    const double ce = lse - logits[static_cast<std::size_t>(label)];
    // leave softmax probabilities in the logits buffer for the backward pass
    for (auto& x : logits) x = std::exp(x - lse);
    return ce;
}

/// Backward pass matching the last forward_sample call; accumulates
/// scale * dCE/dparams into grad_out.
inline void backward_sample(const ParamVector& params, const MlpConfig& cfg, int label,
                            Workspace& ws, double scale, ParamVector& grad_out,
                            double dropout_rate, bool dropout_active) {
    const auto views = layer_views(cfg);
    const auto& probs = ws.acts.back();
    for (std::size_t o = 0; o < probs.size(); ++o) {
        ws.delta[o] = probs[o] - (static_cast<int>(o) == label ? 1.0 : 0.0);
    }
    for (std::size_t l = views.size(); l-- > 0;) {
        const auto& v = views[l];
        const auto& in = ws.acts[l];
        for (std::size_t o = 0; o < v.out; ++o) {
            const double d = ws.delta[o];
            grad_out[v.b_off + o] += scale * d;
            const std::size_t row = v.w_off + o * v.in;
            for (std::size_t i = 0; i < v.in; ++i) grad_out[row + i] += scale * d * in[i];
        }
        if (l == 0) break;
        for (std::size_t i = 0; i < v.in; ++i) {
            double acc = 0.0;
            for (std::size_t o = 0; o < v.out; ++o) {
                acc += params[v.w_off + o * v.in + i] * ws.delta[o];
            }
            ws.delta_prev[i] = acc;
        }
        // undo dropout scaling, then tanh'
        const auto& a = ws.acts[l];
        for (std::size_t i = 0; i < v.in; ++i) {
            double upstream = ws.delta_prev[i];
            double h = a[i];
            if (dropout_active && dropout_rate > 0.0) {
                upstream *= ws.masks[l - 1][i];
                h = (ws.masks[l - 1][i] > 0.0) ? a[i] / ws.masks[l - 1][i] : 0.0;
            }
            ws.delta[i] = upstream * (1.0 - h * h);
        }
    }
}

inline void check_batch(const MlpConfig& cfg, std::span<const Example> batch) {
    if (batch.empty()) throw UsageError("model: batch must be non-empty");
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].features.size() != cfg.input_dim) {
            throw ConfigError("model: sample " + std::to_string(i) + " has feature length " +
                              std::to_string(batch[i].features.size()) + ", expected " +
                              std::to_string(cfg.input_dim));
        }
        if (batch[i].label < 0 || batch[i].label >= static_cast<int>(cfg.num_classes)) {
            throw UsageError("model: sample " + std::to_string(i) + " has label " +
                             std::to_string(batch[i].label) + " outside [0, " +
                             std::to_string(cfg.num_classes) + ")");
        }
    }
}

}  // namespace detail

/// Fan-in-scaled symmetric uniform initialization: each weight is drawn from
/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases start at zero.
inline ParamVector init_params(const MlpConfig& cfg, RngStream& rng) {
    cfg.validate();
    ParamVector params(cfg.param_count());
    for (const auto& v : detail::layer_views(cfg)) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(v.in));
        for (std::size_t i = 0; i < v.out * v.in; ++i) {
            params[v.w_off + i] = (2.0 * rng.next_double() - 1.0) * bound;
        }
    }
    return params;
}

/// Class-probability vector for one feature vector; dropout is inference-off.
inline std::vector<double> forward(const ParamVector& params, const MlpConfig& cfg,
                                   std::span<const double> z) {
    detail::check_model_inputs(params, cfg);
    if (z.size() != cfg.input_dim) {
        throw ConfigError("forward: feature length " + std::to_string(z.size()) +
                          " does not match input_dim " + std::to_string(cfg.input_dim));
    }
    detail::Workspace ws(cfg);
    detail::forward_sample(params, cfg, z, 0, ws, 0.0, nullptr);
    return ws.acts.back();
}

/// Mean cross-entropy over the batch.
inline double loss(const ParamVector& params, const MlpConfig& cfg,
                   std::span<const Example> batch) {
    detail::check_model_inputs(params, cfg);
    detail::check_batch(cfg, batch);
    detail::Workspace ws(cfg);
    double total = 0.0;
    for (const auto& ex : batch) {
        total += detail::forward_sample(params, cfg, ex.features, ex.label, ws, 0.0, nullptr);
    }
    return total / static_cast<double>(batch.size());
}

/// Analytic gradient of `loss` with respect to the parameters.
inline ParamVector grad(const ParamVector& params, const MlpConfig& cfg,
                        std::span<const Example> batch) {
    detail::check_model_inputs(params, cfg);
    detail::check_batch(cfg, batch);
    detail::Workspace ws(cfg);
    ParamVector g(params.size());
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const auto& ex : batch) {
        detail::forward_sample(params, cfg, ex.features, ex.label, ws, 0.0, nullptr);
        detail::backward_sample(params, cfg, ex.label, ws, scale, g, 0.0, false);
    }
    return g;
}

/// Proximal objective: loss(params) + (mu/2) * ||params - fog_params||^2.
inline double fedprox_loss(const ParamVector& params, const ParamVector& fog_params, double mu,
                           const MlpConfig& cfg, std::span<const Example> batch) {
    if (params.size() != fog_params.size()) {
        throw ConfigError("fedprox_loss: params and fog_params lengths differ");
    }
    if (!(mu >= 0.0)) throw ConfigError("fedprox_loss: mu must be non-negative");
    double prox = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double d = params[i] - fog_params[i];
        prox += d * d;
    }
    return loss(params, cfg, batch) + 0.5 * mu * prox;
}

/// Gradient of fedprox_loss: grad(params) + mu * (params - fog_params).
inline ParamVector fedprox_grad(const ParamVector& params, const ParamVector& fog_params,
                                double mu, const MlpConfig& cfg,
                                std::span<const Example> batch) {
    if (params.size() != fog_params.size()) {
        throw ConfigError("fedprox_grad: params and fog_params lengths differ");
    }
    if (!(mu >= 0.0)) throw ConfigError("fedprox_grad: mu must be non-negative");
    ParamVector g = grad(params, cfg, batch);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += mu * (params[i] - fog_params[i]);
    return g;
}

/// Mini-batch optimization of the proximal objective for local_epochs epochs.
/// Shuffling and dropout masks come from `rng`, so the result is a pure
/// function of (inputs, stream). Returns delta = trained - received.
inline ClientUpdate local_train(const ParamVector& received, const ParamVector& fog_anchor,
                                const MlpConfig& cfg, const TrainHyper& hyper,
                                std::span<const Example> train_data, RngStream rng,
                                std::uint32_t client_id = 0) {
    if (train_data.empty()) {
        throw ProtocolError("local_train: client " + std::to_string(client_id) +
                            " has no training data; it must be excluded upstream");
    }
    if (hyper.local_epochs < 1) throw ConfigError("local_train: local_epochs must be >= 1");
    if (hyper.batch_size < 1) throw ConfigError("local_train: batch_size must be >= 1");
    if (!(hyper.mu >= 0.0)) throw ConfigError("local_train: mu must be non-negative");
    if (!(hyper.learning_rate > 0.0)) {
        throw ConfigError("local_train: learning_rate must be positive");
    }
    detail::check_model_inputs(received, cfg);
    if (fog_anchor.size() != received.size()) {
        throw ConfigError("local_train: fog_anchor length differs from received model");
    }
    detail::check_batch(cfg, train_data);

    ParamVector params = received;
    AdamState adam = AdamState::init(params.size(), hyper.learning_rate);
    detail::Workspace ws(cfg);
    ParamVector g(params.size());

    const std::size_t n = train_data.size();
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    const auto batch = static_cast<std::size_t>(hyper.batch_size);

    for (int epoch = 0; epoch < hyper.local_epochs; ++epoch) {
        rng.shuffle(std::span<std::uint32_t>(order));
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(start + batch, n);
            const double scale = 1.0 / static_cast<double>(stop - start);
            g *= 0.0;
            for (std::size_t i = start; i < stop; ++i) {
                const auto& ex = train_data[order[i]];
                detail::forward_sample(params, cfg, ex.features, ex.label, ws,
                                       cfg.dropout_rate, &rng);
                detail::backward_sample(params, cfg, ex.label, ws, scale, g, cfg.dropout_rate,
                                        true);
            }
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += hyper.mu * (params[i] - fog_anchor[i]);
            }
            if (hyper.optimizer == OptimizerKind::adam) {
                adam_step_inplace(params, g, adam);
            } else {
                gd_step_inplace(params, g, hyper.learning_rate);
            }
        }
    }

    ClientUpdate update;
    update.delta = params - received;
    update.num_samples = n;
    update.client_id = client_id;
    update.local_loss_final = fedprox_loss(params, fog_anchor, hyper.mu, cfg, train_data);
    return update;
}

}  // namespace mistfed
