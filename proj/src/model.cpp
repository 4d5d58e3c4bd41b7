#include "voyagecast/model.hpp"

#include <cmath>

#include "voyagecast/error.hpp"

namespace voyagecast::model {

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string("model.") + name + " must be at least 1");
  };
  positive(d_emb, "d_emb");
  positive(d_model, "d_model");
  positive(n_head, "n_head");
  positive(n_block, "n_block");
  positive(d_temp, "d_temp");
  positive(L, "L");
  positive(H, "H");
  if (d_model % n_head != 0) throw ConfigError("model.d_model must be divisible by model.n_head");
  if (d_model % 2 != 0) throw ConfigError("model.d_model must be even");
  if (d_model < 2) throw ConfigError("model.d_model must be at least 2");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("model.beta must lie in [0, 1]");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("model.eta must lie in [0, 1]");
  if (!(p_att >= 0.0 && p_att < 1.0)) throw ConfigError("model.p_att must lie in [0, 1)");
  if (!(p_ffn >= 0.0 && p_ffn < 1.0)) throw ConfigError("model.p_ffn must lie in [0, 1)");
  if (!(pe_base > 1.0)) throw ConfigError("model.pe_base must exceed 1");
}

namespace {

std::string block_name(int b, const char* what) {
  return "block" + std::to_string(b) + "." + what;
}

std::string head_name(int b, int h, const char* what) {
  return "block" + std::to_string(b) + ".head" + std::to_string(h) + "." + what;
}

enum class Init { kUniform, kZero, kOne };

struct Spec {
  std::string name;
  tensor::Index rows, cols;
  Init init;
};

std::vector<Spec> layout(const ModelConfig& cfg, const VocabSizes& v) {
  cfg.validate();
  const int d = cfg.d_model;
  std::vector<Spec> s;
  s.push_back({"emb_g", v.weekdays, cfg.d_emb, Init::kUniform});
  s.push_back({"emb_r", v.slots, cfg.d_emb, Init::kUniform});
  s.push_back({"emb_p", v.ports, cfg.d_emb, Init::kUniform});
  s.push_back({"emb_m", v.terminals, cfg.d_emb, Init::kUniform});
  s.push_back({"emb_c", v.carriers, cfg.d_emb, Init::kUniform});
  s.push_back({"w1", cfg.input_width(), d, Init::kUniform});
  s.push_back({"b1", 1, d, Init::kZero});
  for (int b = 0; b < cfg.n_block; ++b) {
    for (int h = 0; h < cfg.n_head; ++h) {
      s.push_back({head_name(b, h, "wq"), d, cfg.head_dim(), Init::kUniform});
      s.push_back({head_name(b, h, "wk"), d, cfg.head_dim(), Init::kUniform});
      s.push_back({head_name(b, h, "wv"), d, cfg.head_dim(), Init::kUniform});
    }
    s.push_back({block_name(b, "wo"), d, d, Init::kUniform});
    s.push_back({block_name(b, "ln1_gain"), 1, d, Init::kOne});
    s.push_back({block_name(b, "ln1_bias"), 1, d, Init::kZero});
    s.push_back({block_name(b, "w2"), d, 4 * d, Init::kUniform});
    s.push_back({block_name(b, "b2"), 1, 4 * d, Init::kZero});
    s.push_back({block_name(b, "w3"), 4 * d, d, Init::kUniform});
    s.push_back({block_name(b, "b3"), 1, d, Init::kZero});
    s.push_back({block_name(b, "ln2_gain"), 1, d, Init::kOne});
    s.push_back({block_name(b, "ln2_bias"), 1, d, Init::kZero});
  }
  s.push_back({"w4", d, cfg.d_temp, Init::kUniform});
  s.push_back({"b4", 1, cfg.d_temp, Init::kZero});
  s.push_back({"w5", cfg.d_temp, 2, Init::kUniform});
  s.push_back({"b5", 1, 2, Init::kZero});
  for (const Spec& x : s) {
    if (x.rows < 1) throw ConfigError("parameter " + x.name + " has an empty vocabulary");
  }
  return s;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, const VocabSizes& vocab, const Rng& rng) {
  ModelParams p;
  for (const Spec& s : layout(cfg, vocab)) {
    Matrix m(s.rows, s.cols);
    switch (s.init) {
      case Init::kZero:
        m.setZero();
        break;
      case Init::kOne:
        m.setOnes();
        break;
      case Init::kUniform: {
        Rng r = rng.derive(s.name);
        const double bound = std::sqrt(1.0 / static_cast<double>(s.rows));
        for (tensor::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * r.uniform() - 1.0) * bound;
        break;
      }
    }
    p.add(s.name, std::move(m));
  }
  return p;
}

ModelParams ModelParams::zeros(const ModelConfig& cfg, const VocabSizes& vocab) {
  ModelParams p;
  for (const Spec& s : layout(cfg, vocab)) p.add(s.name, Matrix::Zero(s.rows, s.cols));
  return p;
}

void ModelParams::add(std::string name, Matrix value) {
  if (index_.count(name)) throw ValidationError("duplicate parameter '" + name + "'");
  index_.emplace(name, names_.size());
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

std::size_t ModelParams::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter '" + name + "'");
  return it->second;
}

Matrix& ModelParams::at(const std::string& name) { return values_[index_of(name)]; }
const Matrix& ModelParams::at(const std::string& name) const { return values_[index_of(name)]; }

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const Matrix& m : values_) n += static_cast<std::size_t>(m.size());
  return n;
}

std::size_t parameter_count(const ModelConfig& cfg, const VocabSizes& v) {
  cfg.validate();
  const std::size_t d = static_cast<std::size_t>(cfg.d_model);
  const std::size_t e = static_cast<std::size_t>(cfg.d_emb);
  const std::size_t t = static_cast<std::size_t>(cfg.d_temp);
  const std::size_t emb =
      static_cast<std::size_t>(v.weekdays + v.slots + v.ports + v.terminals + v.carriers) * e;
  const std::size_t fusion = (6 * e + 5) * d + d;
  // QKV and output projections, FFN weights and biases, two layer norms.
  const std::size_t block = 3 * d * d + d * d + 8 * d * d + 5 * d + 4 * d;
  const std::size_t head = d * t + t + 2 * t + 2;
  return emb + fusion + static_cast<std::size_t>(cfg.n_block) * block + head;
}

std::vector<unsigned char> causal_mask(int n) {
  if (n < 1) throw ValidationError("causal mask needs n >= 1");
  std::vector<unsigned char> m(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c <= r; ++c) m[static_cast<std::size_t>(r * n + c)] = 1;
  return m;
}

Matrix positional_encoding(int length, int d_model, double base) {
  if (d_model % 2 != 0) throw ValidationError("positional encoding needs an even d_model");
  Matrix pe(length, d_model);
  for (int i = 0; i < d_model / 2; ++i) {
    const double omega = std::pow(base, -2.0 * i / d_model);
    for (int t = 0; t < length; ++t) {
      pe(t, 2 * i) = std::sin(t * omega);
      pe(t, 2 * i + 1) = std::cos(t * omega);
    }
  }
  return pe;
}

Batch make_batch(std::span<const features::Sample* const> samples) {
  if (samples.empty()) throw ValidationError("cannot assemble an empty batch");
  Batch b;
  b.size = static_cast<int>(samples.size());
  b.L = samples.front()->lookback;
  b.H = samples.front()->horizon;
  const int n = b.steps();
  const auto rows = static_cast<tensor::Index>(b.size) * n;
  b.continuous.resize(rows, features::kNumContinuous);
  for (auto& c : b.categorical) c.resize(static_cast<std::size_t>(rows));
  b.y_target.resize(b.size, b.H);
  b.x_target.resize(b.size, b.H);
  b.mask.resize(b.size, b.H);
  for (int s = 0; s < b.size; ++s) {
    const features::Sample& x = *samples[static_cast<std::size_t>(s)];
    if (x.lookback != b.L || x.horizon != b.H) {
      throw ShapeError("batch mixes sample shapes (L=" + std::to_string(x.lookback) +
                       ", H=" + std::to_string(x.horizon) + ")");
    }
    for (int k = 0; k < n; ++k) {
      const auto row = static_cast<tensor::Index>(s) * n + k;
      const auto step = static_cast<std::size_t>(k);
      for (std::size_t c = 0; c < features::kNumContinuous; ++c)
        b.continuous(row, static_cast<tensor::Index>(c)) =
            x.cont(step, static_cast<features::Continuous>(c));
      for (std::size_t c = 0; c < features::kNumCategorical; ++c)
        b.categorical[c][static_cast<std::size_t>(row)] =
            x.cat(step, static_cast<features::Categorical>(c));
    }
    for (int k = 0; k < b.H; ++k) {
      const auto h = static_cast<std::size_t>(k);
      b.y_target(s, k) = x.y_target[h];
      b.x_target(s, k) = x.x_target[h];
      b.mask(s, k) = x.mask[h];
    }
  }
  return b;
}

Batch make_batch(std::span<const features::Sample> samples) {
  std::vector<const features::Sample*> ptrs;
  ptrs.reserve(samples.size());
  for (const auto& s : samples) ptrs.push_back(&s);
  return make_batch(std::span<const features::Sample* const>(ptrs));
}

BoundParams bind(Tape& tape, const ModelParams& params, bool requires_grad) {
  BoundParams b;
  b.params = &params;
  b.leaves.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    b.leaves.push_back(tape.leaf(params.value(i), requires_grad));
  return b;
}

Var embed_inputs(const BoundParams& p, const Batch& batch) {
  using features::Categorical;
  Tape& tape = *p.leaves.front().tape();
  auto cat = [&](Categorical c) { return std::span<const int>(batch.categorical[c]); };
  const Var parts[] = {
      tape.constant(batch.continuous),
      tensor::embedding(p["emb_c"], cat(features::kCarrier)),
      tensor::embedding(p["emb_p"], cat(features::kStartPort)),
      tensor::embedding(p["emb_p"], cat(features::kEndPort)),
      tensor::embedding(p["emb_m"], cat(features::kTerminal)),
      tensor::embedding(p["emb_g"], cat(features::kWeekday)),
      tensor::embedding(p["emb_r"], cat(features::kSlot)),
  };
  return tensor::concat_cols(parts);
}

Var fuse(const BoundParams& p, Var xi) { return tensor::add_bias(tensor::matmul(xi, p["w1"]), p["b1"]); }

Var tmn_block(const BoundParams& p, const ModelConfig& cfg, int block, Var h, int n, Mode mode,
              std::vector<Var>* attention) {
  const std::vector<unsigned char> mask = causal_mask(n);
  const double scale =
      1.0 / std::sqrt(static_cast<double>(cfg.head_dim_scaling ? cfg.head_dim() : cfg.d_model));
  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(cfg.n_head));
  for (int k = 0; k < cfg.n_head; ++k) {
    const Var q = tensor::matmul(h, p[head_name(block, k, "wq")]);
    const Var key = tensor::matmul(h, p[head_name(block, k, "wk")]);
    const Var v = tensor::matmul(h, p[head_name(block, k, "wv")]);
    const Var scores = tensor::scale(tensor::block_matmul_nt(q, key, n), scale);
    const Var alpha = tensor::masked_softmax(scores, mask, n);
    if (attention) attention->push_back(alpha);
    heads.push_back(tensor::block_matmul(alpha, v, n));
  }
  Var z = tensor::matmul(tensor::concat_cols(heads), p[block_name(block, "wo")]);
  z = tensor::dropout(z, cfg.p_att, mode.train, *mode.rng);
  const Var z_norm = tensor::layer_norm(tensor::add(z, h), p[block_name(block, "ln1_gain")],
                                        p[block_name(block, "ln1_bias")]);
  Var f = tensor::relu(
      tensor::add_bias(tensor::matmul(z_norm, p[block_name(block, "w2")]), p[block_name(block, "b2")]));
  f = tensor::dropout(f, cfg.p_ffn, mode.train, *mode.rng);
  const Var o =
      tensor::add_bias(tensor::matmul(f, p[block_name(block, "w3")]), p[block_name(block, "b3")]);
  return tensor::layer_norm(tensor::add(o, z_norm), p[block_name(block, "ln2_gain")],
                            p[block_name(block, "ln2_bias")]);
}

ForwardResult forward(const BoundParams& p, const ModelConfig& cfg, const Batch& batch, Mode mode) {
  if (batch.L != cfg.L || batch.H != cfg.H) {
    throw ShapeError("batch shape (L=" + std::to_string(batch.L) + ", H=" +
                     std::to_string(batch.H) + ") does not match the model (L=" +
                     std::to_string(cfg.L) + ", H=" + std::to_string(cfg.H) + ")");
  }
  Rng fallback;
  if (mode.rng == nullptr) {
    if (mode.train && (cfg.p_att > 0.0 || cfg.p_ffn > 0.0))
      throw ValidationError("training-mode forward needs a dropout generator");
    mode.rng = &fallback;
  }
  Tape& tape = *p.leaves.front().tape();
  const int n = cfg.steps();
  const Matrix pe = positional_encoding(n, cfg.d_model, cfg.pe_base);
  Matrix tiled(static_cast<tensor::Index>(batch.size) * n, cfg.d_model);
  for (int s = 0; s < batch.size; ++s) tiled.middleRows(static_cast<tensor::Index>(s) * n, n) = pe;

  Var h = tensor::add(fuse(p, embed_inputs(p, batch)), tape.constant(std::move(tiled)));
  ForwardResult result;
  for (int b = 0; b < cfg.n_block; ++b) h = tmn_block(p, cfg, b, h, n, mode, &result.attention);

  // The head is row-wise, so only the last H steps of each sample are needed.
  std::vector<tensor::Index> rows;
  rows.reserve(static_cast<std::size_t>(batch.size) * static_cast<std::size_t>(cfg.H));
  for (int s = 0; s < batch.size; ++s)
    for (int k = cfg.L; k < n; ++k) rows.push_back(static_cast<tensor::Index>(s) * n + k);
  const Var last = tensor::gather_rows(h, rows);
  const Var hidden = tensor::relu(tensor::add_bias(tensor::matmul(last, p["w4"]), p["b4"]));
  result.output = tensor::add_bias(tensor::matmul(hidden, p["w5"]), p["b5"]);
  return result;
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double loss_impl(const Matrix& out, const Batch& b, double beta, double eta, double divisor,
                 Matrix* grad) {
  if (out.rows() != static_cast<tensor::Index>(b.size) * b.H || out.cols() != 2) {
    throw ShapeError("loss: output " + tensor::shape_string(out) + " does not match batch of " +
                     std::to_string(b.size) + " x H=" + std::to_string(b.H));
  }
  if (!(divisor > 0.0)) throw ValidationError("loss divisor must be positive");
  if (grad) *grad = Matrix::Zero(out.rows(), 2);
  const double inv_h = 1.0 / b.H;
  double total = 0.0;
  for (int s = 0; s < b.size; ++s) {
    double mae = 0.0, mape = 0.0, aux = 0.0;
    for (int k = 0; k < b.H; ++k) {
      const auto row = static_cast<tensor::Index>(s) * b.H + k;
      const double xe = out(row, 1) - b.x_target(s, k);
      aux += std::abs(xe);
      if (grad) (*grad)(row, 1) = (1.0 - eta) * sign(xe) * inv_h / divisor;
      if (b.mask(s, k) == 0.0) continue;
      const double y = b.y_target(s, k);
      if (!(y > 0.0)) {
        throw ValidationError("observed target at sample " + std::to_string(s) + ", step " +
                              std::to_string(k) + " is not positive");
      }
      const double ye = out(row, 0) - y;
      mae += std::abs(ye);
      mape += std::abs(ye) / y;
      if (grad) (*grad)(row, 0) = eta * (beta + (1.0 - beta) / y) * sign(ye) * inv_h / divisor;
    }
    total += eta * (beta * mae * inv_h + (1.0 - beta) * mape * inv_h) + (1.0 - eta) * aux * inv_h;
  }
  return total / divisor;
}

}  // namespace

Var loss(Var output, const Batch& batch, double beta, double eta, double divisor) {
  Matrix grad;
  Matrix value(1, 1);
  value(0, 0) = loss_impl(output.value(), batch, beta, eta, divisor, &grad);
  Tape& tape = *output.tape();
  const Var parents[] = {output};
  return tape.push(std::move(value), parents,
                   [output, grad = std::move(grad)](Tape& tp, const Matrix& g, const Matrix&) {
                     tp.grad_accumulator(output.id()) += grad * g(0, 0);
                   });
}

double loss_value(const Matrix& output, const Batch& batch, double beta, double eta,
                  double divisor) {
  return loss_impl(output, batch, beta, eta, divisor, nullptr);
}

}  // namespace voyagecast::model
