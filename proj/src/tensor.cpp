#include "voyagecast/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "voyagecast/error.hpp"

namespace voyagecast::tensor {

std::string shape_string(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::leaf(Matrix value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, nullptr});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push(Matrix value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape() != this) throw ValidationError("operand recorded on a different tape");
    needs = needs || requires_grad(p.id());
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs, needs ? std::move(backward) : nullptr});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Tape::grad(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0 && n.value.size() != 0) {
    empty_grad_ = Matrix::Zero(n.value.rows(), n.value.cols());
    return empty_grad_;
  }
  return n.grad;
}

Matrix& Tape::grad_accumulator(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (backward_done_) throw ValidationError("backward already ran on this tape; reset it first");
  if (loss.tape() != this) throw ValidationError("loss recorded on a different tape");
  if (loss.value().size() != 1) {
    throw ShapeError("backward needs a scalar loss, got " + shape_string(loss.value()));
  }
  backward_done_ = true;
  grad_accumulator(loss.id()).setOnes();
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(*this, n.grad, n.value);
  }
}

void Tape::reset() {
  nodes_.clear();
  backward_done_ = false;
}

namespace {

Tape& tape_of(Var a) {
  if (a.tape() == nullptr) throw ValidationError("operand is not recorded on a tape");
  return *a.tape();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
  }
}

void accumulate(Tape& t, Var v, const auto& expr) {
  if (v.requires_grad()) t.grad_accumulator(v.id()) += expr;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: shape mismatch " + shape_string(a.value()) + " vs " +
                     shape_string(b.value()));
  }
  Matrix out;
  out.noalias() = a.value() * b.value();
  const Var parents[] = {a, b};
  return t.push(std::move(out), parents, [a, b](Tape& tp, const Matrix& g, const Matrix&) {
    if (a.requires_grad()) tp.grad_accumulator(a.id()).noalias() += g * b.value().transpose();
    if (b.requires_grad()) tp.grad_accumulator(b.id()).noalias() += a.value().transpose() * g;
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a);
  require_same_shape(a.value(), b.value(), "add");
  const Var parents[] = {a, b};
  return t.push(a.value() + b.value(), parents, [a, b](Tape& tp, const Matrix& g, const Matrix&) {
    accumulate(tp, a, g);
    accumulate(tp, b, g);
  });
}

Var add_bias(Var a, Var bias) {
  Tape& t = tape_of(a);
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw ShapeError("add_bias: shape mismatch " + shape_string(a.value()) + " vs " +
                     shape_string(bias.value()));
  }
  Matrix out = a.value().rowwise() + bias.value().row(0);
  const Var parents[] = {a, bias};
  return t.push(std::move(out), parents, [a, bias](Tape& tp, const Matrix& g, const Matrix&) {
    accumulate(tp, a, g);
    accumulate(tp, bias, g.colwise().sum());
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  const Var parents[] = {a};
  return t.push(a.value() * s, parents,
                [a, s](Tape& tp, const Matrix& g, const Matrix&) { accumulate(tp, a, g * s); });
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  const Var parents[] = {a};
  return t.push(a.value().cwiseMax(0.0), parents, [a](Tape& tp, const Matrix& g, const Matrix&) {
    accumulate(tp, a, (a.value().array() > 0.0).select(g, 0.0).matrix());
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  Tape& t = tape_of(parts.front());
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: shape mismatch " + shape_string(parts.front().value()) +
                       " vs " + shape_string(p.value()));
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> kept(parts.begin(), parts.end());
  return t.push(std::move(out), parts, [kept](Tape& tp, const Matrix& g, const Matrix&) {
    Index col = 0;
    for (const Var& p : kept) {
      accumulate(tp, p, g.middleCols(col, p.cols()));
      col += p.cols();
    }
  });
}

Var embedding(Var table, std::span<const int> indices) {
  Tape& t = tape_of(table);
  const Index vocab = table.rows();
  Matrix out(static_cast<Index>(indices.size()), table.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int idx = indices[i];
    if (idx < 0 || idx >= vocab) {
      throw ValidationError("embedding index " + std::to_string(idx) +
                            " outside vocabulary of size " + std::to_string(vocab));
    }
    out.row(static_cast<Index>(i)) = table.value().row(idx);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  const Var parents[] = {table};
  return t.push(std::move(out), parents, [table, idx = std::move(idx)](Tape& tp, const Matrix& g, const Matrix&) {
    Matrix& acc = tp.grad_accumulator(table.id());
    for (std::size_t i = 0; i < idx.size(); ++i) acc.row(idx[i]) += g.row(static_cast<Index>(i));
  });
}

Var gather_rows(Var a, std::span<const Index> rows) {
  Tape& t = tape_of(a);
  Matrix out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " outside " +
                       shape_string(a.value()));
    }
    out.row(static_cast<Index>(i)) = a.value().row(rows[i]);
  }
  std::vector<Index> r(rows.begin(), rows.end());
  const Var parents[] = {a};
  return t.push(std::move(out), parents, [a, r = std::move(r)](Tape& tp, const Matrix& g, const Matrix&) {
    Matrix& acc = tp.grad_accumulator(a.id());
    for (std::size_t i = 0; i < r.size(); ++i) acc.row(r[i]) += g.row(static_cast<Index>(i));
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const Var parents[] = {a};
  return t.push(std::move(out), parents, [a](Tape& tp, const Matrix& g, const Matrix&) {
    tp.grad_accumulator(a.id()).array() += g(0, 0);
  });
}

namespace {

void check_blocks(const Matrix& m, Index block, const char* op) {
  if (block < 1 || m.rows() % block != 0) {
    throw ShapeError(std::string(op) + ": " + shape_string(m) + " is not a stack of " +
                     std::to_string(block) + "-row blocks");
  }
}

}  // namespace

Var block_matmul_nt(Var a, Var b, Index block) {
  Tape& t = tape_of(a);
  require_same_shape(a.value(), b.value(), "block_matmul_nt");
  check_blocks(a.value(), block, "block_matmul_nt");
  const Index nb = a.rows() / block;
  Matrix out(a.rows(), block);
  for (Index k = 0; k < nb; ++k) {
    out.middleRows(k * block, block).noalias() =
        a.value().middleRows(k * block, block) * b.value().middleRows(k * block, block).transpose();
  }
  const Var parents[] = {a, b};
  return t.push(std::move(out), parents, [a, b, block, nb](Tape& tp, const Matrix& g, const Matrix&) {
    for (Index k = 0; k < nb; ++k) {
      const auto gk = g.middleRows(k * block, block);
      if (a.requires_grad()) {
        tp.grad_accumulator(a.id()).middleRows(k * block, block).noalias() +=
            gk * b.value().middleRows(k * block, block);
      }
      if (b.requires_grad()) {
        tp.grad_accumulator(b.id()).middleRows(k * block, block).noalias() +=
            gk.transpose() * a.value().middleRows(k * block, block);
      }
    }
  });
}

Var block_matmul(Var a, Var b, Index block) {
  Tape& t = tape_of(a);
  check_blocks(a.value(), block, "block_matmul");
  if (a.cols() != block || b.rows() != a.rows()) {
    throw ShapeError("block_matmul: shape mismatch " + shape_string(a.value()) + " vs " +
                     shape_string(b.value()));
  }
  const Index nb = a.rows() / block;
  Matrix out(a.rows(), b.cols());
  for (Index k = 0; k < nb; ++k) {
    out.middleRows(k * block, block).noalias() =
        a.value().middleRows(k * block, block) * b.value().middleRows(k * block, block);
  }
  const Var parents[] = {a, b};
  return t.push(std::move(out), parents, [a, b, block, nb](Tape& tp, const Matrix& g, const Matrix&) {
    for (Index k = 0; k < nb; ++k) {
      const auto gk = g.middleRows(k * block, block);
      if (a.requires_grad()) {
        tp.grad_accumulator(a.id()).middleRows(k * block, block).noalias() +=
            gk * b.value().middleRows(k * block, block).transpose();
      }
      if (b.requires_grad()) {
        tp.grad_accumulator(b.id()).middleRows(k * block, block).noalias() +=
            a.value().middleRows(k * block, block).transpose() * gk;
      }
    }
  });
}

Var masked_softmax(Var scores, std::span<const unsigned char> mask, Index n) {
  Tape& t = tape_of(scores);
  check_blocks(scores.value(), n, "masked_softmax");
  if (scores.cols() != n || static_cast<Index>(mask.size()) != n * n) {
    throw ShapeError("masked_softmax: scores " + shape_string(scores.value()) +
                     " do not match a " + std::to_string(n) + "x" + std::to_string(n) + " mask");
  }
  for (Index r = 0; r < n; ++r) {
    const auto row = mask.subspan(static_cast<std::size_t>(r * n), static_cast<std::size_t>(n));
    if (std::none_of(row.begin(), row.end(), [](unsigned char m) { return m != 0; })) {
      throw ValidationError("masked_softmax: mask row " + std::to_string(r) + " has no entries");
    }
  }
  const Matrix& s = scores.value();
  Matrix out = Matrix::Zero(s.rows(), n);
  for (Index i = 0; i < s.rows(); ++i) {
    const unsigned char* m = mask.data() + (i % n) * n;
    double hi = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j)
      if (m[j]) hi = std::max(hi, s(i, j));
    double total = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (m[j]) {
        out(i, j) = std::exp(s(i, j) - hi);
        total += out(i, j);
      }
    }
    out.row(i) /= total;
  }
  const Var parents[] = {scores};
  return t.push(std::move(out), parents,
                [scores](Tape& tp, const Matrix& g, const Matrix& p) {
                  // dS = P * (dP - rowsum(dP * P)); masked entries have P = 0.
                  const Eigen::VectorXd dot = (g.array() * p.array()).rowwise().sum();
                  tp.grad_accumulator(scores.id()).array() +=
                      p.array() * (g.array().colwise() - dot.array());
                });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& t = tape_of(x);
  const Index d = x.cols();
  if (d < 2) throw ShapeError("layer_norm: need at least 2 columns, got " + shape_string(x.value()));
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    throw ShapeError("layer_norm: gain/bias " + shape_string(gain.value()) + "/" +
                     shape_string(bias.value()) + " do not match " + shape_string(x.value()));
  }
  const Matrix& v = x.value();
  Matrix xhat(v.rows(), d);
  Eigen::VectorXd inv_sigma(v.rows());
  for (Index i = 0; i < v.rows(); ++i) {
    const double mu = v.row(i).mean();
    const double var = (v.row(i).array() - mu).square().mean();
    inv_sigma(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (v.row(i).array() - mu) * inv_sigma(i);
  }
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
               bias.value().row(0).array();
  const Var parents[] = {x, gain, bias};
  return t.push(std::move(out), parents,
                [x, gain, bias, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](
                    Tape& tp, const Matrix& g, const Matrix&) {
                  accumulate(tp, gain, (g.array() * xhat.array()).colwise().sum().matrix());
                  accumulate(tp, bias, g.colwise().sum());
                  if (!x.requires_grad()) return;
                  const Matrix dxhat = g.array().rowwise() * gain.value().row(0).array();
                  const Eigen::VectorXd m1 = dxhat.rowwise().mean();
                  const Eigen::VectorXd m2 = (dxhat.array() * xhat.array()).rowwise().mean();
                  Matrix& acc = tp.grad_accumulator(x.id());
                  for (Index i = 0; i < g.rows(); ++i) {
                    acc.row(i).array() +=
                        inv_sigma(i) * (dxhat.row(i).array() - m1(i) - xhat.row(i).array() * m2(i));
                  }
                });
}

Var dropout(Var x, double p, bool train, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(p));
  }
  if (!train || p == 0.0) return x;
  Tape& t = tape_of(x);
  const double keep = 1.0 / (1.0 - p);
  Matrix factor(x.rows(), x.cols());
  for (Index i = 0; i < factor.size(); ++i) factor.data()[i] = rng.uniform() < p ? 0.0 : keep;
  Matrix out = x.value().cwiseProduct(factor);
  const Var parents[] = {x};
  return t.push(std::move(out), parents,
                [x, factor = std::move(factor)](Tape& tp, const Matrix& g, const Matrix&) {
                  accumulate(tp, x, g.cwiseProduct(factor));
                });
}

}  // namespace voyagecast::tensor
