#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "utvi/datagen.hpp"
#include "utvi/layers.hpp"
#include "utvi/loss.hpp"
#include "utvi/model.hpp"
#include "utvi/optim.hpp"
#include "utvi/tape.hpp"

namespace utvi {

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-2;
    std::size_t epochs = 50;
    std::size_t batches_per_epoch = 100;
    std::size_t batch_size = 128;
    PropagationMode::Kind mode_kind = PropagationMode::Kind::UTVI;
    double kappa = 2.0;
    int mc_samples = 3;
    std::uint64_t seed = 1;
    double prior_sigma = 1.0;
    double kl_weight = 1.0;
    /// Validation data is generated from val_seed, not from seed, so models
    /// trained with different seeds score against the same held-out set.
    std::size_t val_size = 4096;
    std::uint64_t val_seed = 1000003;
    /// 0 draws a fresh batch every step; otherwise a dataset of this size is
    /// generated up front and each epoch is one shuffled pass over it (the
    /// effective batches_per_epoch becomes ceil(size / batch_size)).
    std::size_t fixed_dataset_size = 0;
    double x_low = -1.0;
    double x_high = 2.0;
    /// Pins every weight variance to zero and drops the KL term; requires
    /// SMP propagation (the degenerate distributions route pointwise).
    bool deterministic_weights = false;

    PropagationMode mode() const;
    AdamWSettings optimizer() const;
    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_nll = 0.0;
    double kl_scale = 0.0;
    double wall_ms = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> records;
    std::vector<double> best_params;
    double best_val_nll = 0.0;
    std::size_t best_epoch = 0;  // 1-based
};

/// Everything one gradient step needs besides the data.
struct BatchContext {
    PropagationMode mode;
    double kl_multiplier = 0.0;  // kl_weight * phi(l) / batches_per_epoch
    double prior_sigma = 1.0;
    std::uint64_t mc_root = 0;   // per-datum MCVI streams: derive_seed(mc_root, {d})
    bool deterministic_weights = false;
};

/// Owns the tape for a model and turns batches into loss values and
/// gradients. Parameters are registered once; each run() rewinds past them,
/// re-records the variance/KL prefix from the model's current values, then
/// records and back-propagates one datum at a time so peak tape size stays
/// at prefix + one datum.
class BatchRunner {
public:
    explicit BatchRunner(Model& m);

    /// Returns the batch loss (mean NLL + kl_multiplier * KL) and writes
    /// d(loss)/d(params) into grads, indexed like model.params.
    double run(const Dataset& batch, const BatchContext& ctx, std::vector<double>& grads);

private:
    Model& model_;
    Tape tape_;
    std::size_t p0_ = 0;
    TapeParams tp_;
    Workspace<Var> ws_;
};

/// The same scalar run() computes, evaluated without the tape. Gradient
/// tests difference this.
double batch_elbo(const Model& m, const Dataset& batch, const BatchContext& ctx);

/// Mean per-datum NLL over a dataset. MCVI draws per-datum streams
/// derive_seed(mc_root, {i}); other modes ignore mc_root.
double dataset_nll(const Model& m, const Dataset& data, const PropagationMode& mode,
                   std::uint64_t mc_root = 0);

/// Re-initializes the model from the config seed and runs the full loop:
/// epochs x batches of AdamW steps with the annealed ELBO, one validation
/// pass per epoch, best-validation parameters retained. The model is left at
/// its final-epoch state.
TrainResult train(Model& m, const TrainConfig& cfg);

/// CSV with header epoch,train_loss,val_nll,kl_scale,wall_ms.
std::string train_log_csv(const std::vector<EpochRecord>& records);

}  // namespace utvi
