#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "voyagecast/features.hpp"
#include "voyagecast/rng.hpp"
#include "voyagecast/tensor.hpp"

namespace voyagecast::model {

using tensor::Matrix;
using tensor::Tape;
using tensor::Var;

struct ModelConfig {
  int d_emb = 32;
  int d_model = 32;
  int n_head = 8;
  int n_block = 2;
  int d_temp = 16;
  double p_att = 0.1;
  double p_ffn = 0.1;
  int L = 168;
  int H = 84;
  double beta = 0.8;
  double eta = 0.9;
  double pe_base = 1000.0;
  /// Divide attention scores by sqrt(d_model / n_head) instead of sqrt(d_model).
  bool head_dim_scaling = false;

  void validate() const;
  int input_width() const { return 6 * d_emb + 5; }
  int steps() const { return L + H; }
  int head_dim() const { return d_model / n_head; }
};

/// Embedding table heights, each including the reserved unknown row 0.
struct VocabSizes {
  int ports = 1;
  int terminals = 1;
  int carriers = 1;
  int weekdays = 7;
  int slots = 4;
};

/// Named trainable tensors in a fixed order.
class ModelParams {
 public:
  /// Uniform +-sqrt(1/fan_in) weights (fan_in = rows), zero biases, unit
  /// layer-norm gains. Each tensor draws from its own labeled substream.
  static ModelParams init(const ModelConfig& cfg, const VocabSizes& vocab, const Rng& rng);
  /// Same layout with every tensor zero.
  static ModelParams zeros(const ModelConfig& cfg, const VocabSizes& vocab);

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Matrix& value(std::size_t i) { return values_[i]; }
  const Matrix& value(std::size_t i) const { return values_[i]; }
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t scalar_count() const;

  void add(std::string name, Matrix value);

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::map<std::string, std::size_t> index_;
};

/// Closed-form number of scalars for (config, vocabulary sizes).
std::size_t parameter_count(const ModelConfig& cfg, const VocabSizes& vocab);

/// Lower-triangular [n x n] mask, row-major: true iff column <= row.
std::vector<unsigned char> causal_mask(int n);

/// Sinusoidal encoding with 0-based positions and frequencies base^(-2i/d).
Matrix positional_encoding(int length, int d_model, double base = 1000.0);

/// Dense stack of equally shaped samples.
struct Batch {
  int size = 0;
  int L = 0;
  int H = 0;
  Matrix continuous;  ///< [size*(L+H) x 5]
  std::array<std::vector<int>, features::kNumCategorical> categorical;
  Matrix y_target;  ///< [size x H]
  Matrix x_target;  ///< [size x H]
  Matrix mask;      ///< [size x H]

  int steps() const { return L + H; }
};

Batch make_batch(std::span<const features::Sample* const> samples);
Batch make_batch(std::span<const features::Sample> samples);

/// Parameters recorded as leaves on one tape.
struct BoundParams {
  const ModelParams* params = nullptr;
  std::vector<Var> leaves;

  Var operator[](const std::string& name) const { return leaves[params->index_of(name)]; }
};

BoundParams bind(Tape& tape, const ModelParams& params, bool requires_grad = true);

/// Dropout settings for one forward pass; `rng` may be null in eval mode.
struct Mode {
  bool train = false;
  Rng* rng = nullptr;
};

/// xi, [size*(L+H) x (6*d_emb+5)].
Var embed_inputs(const BoundParams& p, const Batch& batch);
/// xi * W1 + b1.
Var fuse(const BoundParams& p, Var xi);
/// One attention + feed-forward layer. Appends per-head attention weights to
/// `attention` when given.
Var tmn_block(const BoundParams& p, const ModelConfig& cfg, int block, Var h, int n, Mode mode,
              std::vector<Var>* attention = nullptr);

struct ForwardResult {
  Var output;  ///< [size*H x 2]; column 0 duration, column 1 destination count
  std::vector<Var> attention;  ///< index block*n_head + head, each [size*(L+H) x (L+H)]
};

ForwardResult forward(const BoundParams& p, const ModelConfig& cfg, const Batch& batch, Mode mode);

/// Per-sample blended loss summed over the batch and divided by `divisor`
/// (the full mini-batch size). Positions with mask 0 take no part in the
/// main-task terms.
Var loss(Var output, const Batch& batch, double beta, double eta, double divisor);

/// Same value as `loss` without recording anything.
double loss_value(const Matrix& output, const Batch& batch, double beta, double eta,
                  double divisor);

}  // namespace voyagecast::model
