#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "voyagecast/features.hpp"
#include "voyagecast/model.hpp"
#include "voyagecast/rng.hpp"

namespace voyagecast::train {

using model::Matrix;

struct TrainConfig {
  double lr0 = 3e-3;
  double decay = 0.5;
  int decay_every = 10;
  int batch_size = 1024;
  int max_epochs = 30;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;

  void validate() const;
};

/// How work is split across threads. Results do not depend on `threads`:
/// every batch is cut into fixed `chunk_size` pieces whose partial
/// gradients are reduced in chunk order.
struct ExecConfig {
  int threads = 1;
  int chunk_size = 32;
};

double lr_at(int epoch, const TrainConfig& cfg);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  static AdamState for_params(const model::ModelParams& params);
};

/// One bias-corrected Adam update. Returns false and leaves everything
/// untouched when any gradient entry is non-finite.
bool adam_step(model::ModelParams& params, std::span<const Matrix> grads, AdamState& state,
               double lr);

/// Scales gradients in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(std::span<Matrix> grads, double max_norm);

struct BatchGradient {
  double loss = 0.0;
  std::vector<Matrix> grads;  ///< ModelParams order
};

/// Mean blended loss over `samples` and its gradient. In training mode each
/// chunk draws dropout from `dropout.derive("chunk", c)`.
BatchGradient batch_gradient(const model::ModelParams& params, const model::ModelConfig& cfg,
                             std::span<const features::Sample* const> samples, bool train,
                             const Rng& dropout, const ExecConfig& exec);

struct Predictions {
  Matrix y;  ///< [N x H] duration
  Matrix x;  ///< [N x H] destination count
};

/// Eval-mode forward over all samples.
Predictions predict(const model::ModelParams& params, const model::ModelConfig& cfg,
                    std::span<const features::Sample> samples, const ExecConfig& exec);

/// Main-task loss (beta blend, eta = 1) averaged over samples, eval mode.
double main_task_loss(const model::ModelParams& params, const model::ModelConfig& cfg,
                      std::span<const features::Sample> samples, const ExecConfig& exec);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  long long wall_ms = 0;
};

/// One JSON line per epoch without wall time, so logs of identical runs match
/// byte for byte.
void write_log(std::ostream& out, std::span<const EpochLog> log);
/// Epoch wall times, kept apart from the reproducible log.
void write_timings(std::ostream& out, std::span<const EpochLog> log);

struct FitResult {
  model::ModelParams best;
  AdamState adam;  ///< optimizer state when `best` was recorded
  int best_epoch = -1;  ///< -1 when no epoch ran
  double best_val_loss = 0.0;
  std::vector<EpochLog> log;
  bool diverged = false;
};

/// Mini-batch Adam with step decay. Keeps the parameters with the lowest
/// validation main-task loss; with an empty validation split the training
/// loss is used instead. Stops early once the validation loss is non-finite.
FitResult fit(std::span<const features::Sample> train, std::span<const features::Sample> val,
              const model::ModelConfig& model_cfg, const TrainConfig& cfg,
              const model::VocabSizes& vocab, const ExecConfig& exec = {});

/// Same as `fit` but starting from given parameters.
FitResult fit(std::span<const features::Sample> train, std::span<const features::Sample> val,
              const model::ModelConfig& model_cfg, const TrainConfig& cfg,
              model::ModelParams init, const ExecConfig& exec = {});

}  // namespace voyagecast::train
