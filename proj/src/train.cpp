#include "voyagecast/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <ostream>
#include <thread>

#include "json.hpp"

#include "voyagecast/error.hpp"

namespace voyagecast::train {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("train.lr0 must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("train.decay must lie in (0, 1]");
  if (decay_every < 1) throw ConfigError("train.decay_every must be at least 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (max_epochs < 0) throw ConfigError("train.max_epochs must not be negative");
  if (!(clip_norm > 0.0)) throw ConfigError("train.clip_norm must be positive");
}

double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw ValidationError("epoch must not be negative");
  return cfg.lr0 * std::pow(cfg.decay, epoch / cfg.decay_every);
}

AdamState AdamState::for_params(const model::ModelParams& params) {
  AdamState s;
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m.push_back(Matrix::Zero(params.value(i).rows(), params.value(i).cols()));
    s.v.push_back(Matrix::Zero(params.value(i).rows(), params.value(i).cols()));
  }
  return s;
}

bool adam_step(model::ModelParams& params, std::span<const Matrix> grads, AdamState& state,
               double lr) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw ShapeError("adam_step: gradient/state count does not match parameters");
  }
  for (const Matrix& g : grads)
    if (!g.allFinite()) return false;
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[i].cwiseProduct(grads[i]);
    params.value(i).array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
  }
  return true;
}

double clip_global_norm(std::span<Matrix> grads, double max_norm) {
  double sq = 0.0;
  for (const Matrix& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (Matrix& g : grads) g *= f;
  }
  return norm;
}

namespace {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first
/// exception in index order is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run(i);
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::size_t chunk_count(std::size_t n, const ExecConfig& exec) {
  const auto c = static_cast<std::size_t>(std::max(1, exec.chunk_size));
  return (n + c - 1) / c;
}

template <typename T>
std::span<T> chunk_of(std::span<T> all, std::size_t c, const ExecConfig& exec) {
  const auto size = static_cast<std::size_t>(std::max(1, exec.chunk_size));
  const std::size_t begin = c * size;
  return all.subspan(begin, std::min(size, all.size() - begin));
}

}  // namespace

BatchGradient batch_gradient(const model::ModelParams& params, const model::ModelConfig& cfg,
                             std::span<const features::Sample* const> samples, bool train,
                             const Rng& dropout, const ExecConfig& exec) {
  if (samples.empty()) throw ValidationError("cannot compute a gradient on an empty batch");
  const std::size_t chunks = chunk_count(samples.size(), exec);
  const double divisor = static_cast<double>(samples.size());
  std::vector<BatchGradient> parts(chunks);
  parallel_for(chunks, exec.threads, [&](std::size_t c) {
    const auto piece = chunk_of(samples, c, exec);
    tensor::Tape tape;
    const model::BoundParams bound = model::bind(tape, params);
    const model::Batch batch = model::make_batch(piece);
    Rng rng = dropout.derive("chunk", c);
    const auto out = model::forward(bound, cfg, batch, {train, &rng});
    const auto loss = model::loss(out.output, batch, cfg.beta, cfg.eta, divisor);
    tape.backward(loss);
    BatchGradient& part = parts[c];
    part.loss = loss.value()(0, 0);
    part.grads.reserve(bound.leaves.size());
    for (const auto& leaf : bound.leaves) part.grads.push_back(leaf.grad());
  });
  BatchGradient total = std::move(parts.front());
  for (std::size_t c = 1; c < chunks; ++c) {
    total.loss += parts[c].loss;
    for (std::size_t i = 0; i < total.grads.size(); ++i) total.grads[i] += parts[c].grads[i];
  }
  return total;
}

Predictions predict(const model::ModelParams& params, const model::ModelConfig& cfg,
                    std::span<const features::Sample> samples, const ExecConfig& exec) {
  Predictions p;
  const auto n = static_cast<tensor::Index>(samples.size());
  p.y.resize(n, cfg.H);
  p.x.resize(n, cfg.H);
  if (samples.empty()) return p;
  const std::size_t chunks = chunk_count(samples.size(), exec);
  parallel_for(chunks, exec.threads, [&](std::size_t c) {
    const auto piece = chunk_of(samples, c, exec);
    tensor::Tape tape;
    const model::BoundParams bound = model::bind(tape, params, false);
    const model::Batch batch = model::make_batch(piece);
    const auto out = model::forward(bound, cfg, batch, {});
    const Matrix& o = out.output.value();
    const auto first = static_cast<tensor::Index>(c * static_cast<std::size_t>(std::max(1, exec.chunk_size)));
    for (int s = 0; s < batch.size; ++s) {
      for (int k = 0; k < cfg.H; ++k) {
        p.y(first + s, k) = o(static_cast<tensor::Index>(s) * cfg.H + k, 0);
        p.x(first + s, k) = o(static_cast<tensor::Index>(s) * cfg.H + k, 1);
      }
    }
  });
  return p;
}

double main_task_loss(const model::ModelParams& params, const model::ModelConfig& cfg,
                      std::span<const features::Sample> samples, const ExecConfig& exec) {
  if (samples.empty()) throw ValidationError("cannot compute a loss on an empty split");
  const std::size_t chunks = chunk_count(samples.size(), exec);
  const double divisor = static_cast<double>(samples.size());
  std::vector<double> parts(chunks, 0.0);
  parallel_for(chunks, exec.threads, [&](std::size_t c) {
    const auto piece = chunk_of(samples, c, exec);
    tensor::Tape tape;
    const model::BoundParams bound = model::bind(tape, params, false);
    const model::Batch batch = model::make_batch(piece);
    const auto out = model::forward(bound, cfg, batch, {});
    parts[c] = model::loss_value(out.output.value(), batch, cfg.beta, 1.0, divisor);
  });
  double total = 0.0;
  for (double v : parts) total += v;
  return total;
}

void write_log(std::ostream& out, std::span<const EpochLog> log) {
  for (const EpochLog& e : log) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["lr"] = e.lr;
    j["train_loss"] = e.train_loss;
    j["val_loss"] = e.val_loss;
    out << j.dump() << '\n';
  }
}

void write_timings(std::ostream& out, std::span<const EpochLog> log) {
  for (const EpochLog& e : log) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["wall_ms"] = e.wall_ms;
    out << j.dump() << '\n';
  }
}

FitResult fit(std::span<const features::Sample> train, std::span<const features::Sample> val,
              const model::ModelConfig& model_cfg, const TrainConfig& cfg,
              const model::VocabSizes& vocab, const ExecConfig& exec) {
  return fit(train, val, model_cfg, cfg,
             model::ModelParams::init(model_cfg, vocab, Rng(cfg.seed).derive("init")), exec);
}

FitResult fit(std::span<const features::Sample> train, std::span<const features::Sample> val,
              const model::ModelConfig& model_cfg, const TrainConfig& cfg,
              model::ModelParams init, const ExecConfig& exec) {
  model_cfg.validate();
  cfg.validate();
  if (train.empty()) throw ValidationError("training split is empty");

  FitResult result;
  model::ModelParams params = std::move(init);
  AdamState adam = AdamState::for_params(params);
  result.best = params;
  result.adam = adam;

  const Rng root(cfg.seed);
  std::vector<const features::Sample*> order(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) order[i] = &train[i];

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = lr_at(epoch, cfg);

    // Fisher-Yates with the library generator keeps the permutation
    // identical across standard library implementations.
    Rng shuffle = root.derive("shuffle", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    const Rng dropout = root.derive("dropout", static_cast<std::uint64_t>(epoch));
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    bool aborted = false;
    for (std::size_t start = 0, b = 0; start < order.size(); start += bs, ++b) {
      const auto batch = std::span<const features::Sample* const>(order).subspan(
          start, std::min(bs, order.size() - start));
      BatchGradient g = batch_gradient(params, model_cfg, batch, true, dropout.derive("batch", b), exec);
      clip_global_norm(g.grads, cfg.clip_norm);
      if (!std::isfinite(g.loss) || !adam_step(params, g.grads, adam, lr)) {
        aborted = true;
        break;
      }
      loss_sum += g.loss * static_cast<double>(batch.size());
      seen += batch.size();
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    entry.train_loss = aborted ? std::nan("") : loss_sum / static_cast<double>(seen);
    entry.val_loss = val.empty() ? entry.train_loss : main_task_loss(params, model_cfg, val, exec);
    entry.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - started)
                        .count();
    result.log.push_back(entry);

    if (aborted || !std::isfinite(entry.val_loss)) {
      result.diverged = true;
      break;
    }
    if (result.best_epoch < 0 || entry.val_loss < result.best_val_loss) {
      result.best_epoch = epoch;
      result.best_val_loss = entry.val_loss;
      result.best = params;
      result.adam = adam;
    }
  }
  return result;
}

}  // namespace voyagecast::train
