#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jointrec/data.hpp"
#include "jointrec/decoder.hpp"
#include "jointrec/encoder.hpp"
#include "jointrec/rng.hpp"

namespace jointrec {

enum class ModelKind { Tensor, Marginal };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct ModelDims {
    Index event_dim = 0;
    Index static_dim = 0;
    Index hidden = 25;
    Index static_latent = 15;
    Index rank = 5;

    Index latent() const { return hidden + static_latent; }
};

/// All trainable parameters of one model. flatten()/unflatten() expose the
/// canonical scalar ordering shared by the optimizer, the serializer and
/// the gradient checker: LSTM gates (W_i W_f W_o W_g R_i R_f R_o R_g
/// b_i b_f b_o b_g), then H, then the head (G B C, or W_y W_z), each block
/// in column-major order.
struct ModelParams {
    ModelKind kind = ModelKind::Tensor;
    ModelDims dims;
    LstmParams lstm;
    StaticParams stat;
    TuckerParams tucker;      // kind == Tensor
    MarginalParams marginal;  // kind == Marginal

    static ModelParams zeros(ModelKind kind, const ModelDims& dims);

    /// Glorot init drawn in canonical parameter order from rng.
    static ModelParams init(ModelKind kind, const ModelDims& dims, Rng& rng);

    Index param_count() const;
    Vec flatten() const;
    void unflatten(const Vec& theta);

    /// Visits (name, data, size, regularized) for each parameter block in
    /// canonical order. Ridge covers H and the head, never the LSTM.
    template <typename F>
    void visit(F&& fn) {
        fn("W_i", lstm.W_i.data(), lstm.W_i.size(), false);
        fn("W_f", lstm.W_f.data(), lstm.W_f.size(), false);
        fn("W_o", lstm.W_o.data(), lstm.W_o.size(), false);
        fn("W_g", lstm.W_g.data(), lstm.W_g.size(), false);
        fn("R_i", lstm.R_i.data(), lstm.R_i.size(), false);
        fn("R_f", lstm.R_f.data(), lstm.R_f.size(), false);
        fn("R_o", lstm.R_o.data(), lstm.R_o.size(), false);
        fn("R_g", lstm.R_g.data(), lstm.R_g.size(), false);
        fn("b_i", lstm.b_i.data(), lstm.b_i.size(), false);
        fn("b_f", lstm.b_f.data(), lstm.b_f.size(), false);
        fn("b_o", lstm.b_o.data(), lstm.b_o.size(), false);
        fn("b_g", lstm.b_g.data(), lstm.b_g.size(), false);
        fn("H", stat.H.data(), stat.H.size(), true);
        if (kind == ModelKind::Tensor) {
            fn("G", tucker.G.data().data(), tucker.G.size(), true);
            fn("B", tucker.B.data(), tucker.B.size(), true);
            fn("C", tucker.C.data(), tucker.C.size(), true);
        } else {
            fn("W_y", marginal.W_y.data(), marginal.W_y.size(), true);
            fn("W_z", marginal.W_z.data(), marginal.W_z.size(), true);
        }
    }

    template <typename F>
    void visit(F&& fn) const {
        const_cast<ModelParams*>(this)->visit(
            [&fn](const char* name, const double* data, Index size, bool regularized) {
                fn(name, data, size, regularized);
            });
    }
};

struct TrainConfig {
    double learning_rate = 0.001;
    int max_epochs = 1000;
    double rho = 0.9;
    double epsilon = 1e-6;
    double ridge_lambda = 0.01;
    double dropout_rate = 0.1;
    int batch_size = 32;
    int patience = 25;
    std::uint64_t seed = 0;

    void validate() const;
};

/// RMSprop running mean of squared gradients, aligned with flatten().
struct OptState {
    Vec acc;

    explicit OptState(Index n) : acc(Vec::Zero(n)) {}
};

/// acc <- rho*acc + (1-rho)*g^2 ; theta <- theta - lr*g/(sqrt(acc)+eps)
void rmsprop_step(Vec& theta, const Vec& grad, OptState& state, const TrainConfig& cfg);

/// Sum of the nine binary cross entropies between U and Uhat; predicted
/// probabilities are clamped to [1e-12, 1-1e-12] before the logs.
double bce_sum(const JointTarget& U, const Mat& Uhat);

/// Inverted dropout mask: entries 0 with probability rate, else 1/(1-rate).
Vec dropout_mask(Index len, double rate, Rng& rng);

/// Per-instance, per-time-step masks for a whole batch, drawn in batch order.
using DropoutMasks = std::vector<std::vector<Vec>>;
DropoutMasks sample_dropout_masks(const std::vector<const Instance*>& batch, double rate,
                                  Rng& rng);

/// Minibatch loss: sum of per-instance cross entropies plus the ridge
/// penalty ridge_lambda * (|batch|/n_train_total) * sum of squares over the
/// regularized parameters. Dropout (training only) is driven by rng.
double total_objective(const std::vector<Instance>& batch, const ModelParams& params,
                       const TrainConfig& cfg, std::size_t n_train_total, bool training,
                       Rng* rng = nullptr);

/// Analytic gradient of total_objective in flatten() order.
Vec backward(const std::vector<Instance>& batch, const ModelParams& params,
             const TrainConfig& cfg, std::size_t n_train_total, bool training,
             Rng* rng = nullptr);

/// Shared core for the two entry points above: one pass over the batch with
/// explicit masks (null = no dropout), returning the objective and, when
/// requested, the gradient.
struct BatchResult {
    double objective = 0.0;
    Vec gradient;
};
BatchResult batch_pass(const std::vector<const Instance*>& batch, const ModelParams& params,
                       const TrainConfig& cfg, std::size_t n_train_total,
                       const DropoutMasks* masks, bool want_gradient);

/// Sum of cross entropies over a set, dropout off, no ridge; the early
/// stopping criterion.
double validation_loss(const std::vector<Instance>& instances, const ModelParams& params);

struct EpochStats {
    double train_objective = 0.0;
    double val_loss = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;  // 0-based index into epochs
    double best_val_loss = 0.0;
};

struct TrainResult {
    ModelParams params;
    TrainHistory history;
};

/// Minibatch RMSprop with per-epoch validation and early stopping after
/// `patience` epochs without improvement; returns the parameters of the
/// best validation epoch. Throws NumericError on non-finite loss.
TrainResult train(const std::vector<Instance>& train_set, const std::vector<Instance>& val_set,
                  const TrainConfig& cfg, ModelKind kind, const ModelDims& dims);

struct GradCheckEntry {
    std::string config;
    double max_rel_err = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    bool all_pass = false;
};

/// Compares backward() against central finite differences (step 1e-5) on
/// small dims for three configurations: tensor, marginal, and a tensor
/// batch of empty-history instances. `corrupt` doubles the largest analytic
/// gradient entry first, as a self-test that the harness can fail.
GradCheckReport grad_check(std::uint64_t seed, bool corrupt = false);

}  // namespace jointrec
