#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "voyagecast/rng.hpp"

namespace voyagecast::tensor {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

std::string shape_string(const Matrix& m);

class Tape;

/// Handle to a node recorded on a tape. Cheap to copy; valid while the tape
/// lives and has not been reset.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  const Matrix& value() const;
  const Matrix& grad() const;  ///< zero matrix if nothing flowed back
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Define-by-run gradient tape. Nodes are appended in topological order and
/// backward walks them in reverse.
class Tape {
 public:
  /// Called with the node's output gradient and value; accumulates into
  /// parent grads.
  using Backward = std::function<void(Tape&, const Matrix& grad_out, const Matrix& value)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value, bool requires_grad = true);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  /// Records a custom op. The node requires grad iff any parent does; the
  /// backward rule is dropped otherwise.
  Var push(Matrix value, std::span<const Var> parents, Backward backward);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every ancestor.
  void backward(Var loss);
  void reset();

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Matrix& grad(int id) const;
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  /// Mutable gradient accumulator, zero-initialized on first use.
  Matrix& grad_accumulator(int id);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
  mutable Matrix empty_grad_;
};

// Primitive ops. All operands must live on the same tape.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var add_bias(Var a, Var bias);  ///< bias is [1 x cols], broadcast over rows
Var scale(Var a, double s);
Var relu(Var a);
Var concat_cols(std::span<const Var> parts);
Var embedding(Var table, std::span<const int> indices);
Var gather_rows(Var a, std::span<const Index> rows);
Var sum(Var a);

/// a and b are stacks of row blocks of height `block`; computes a_k * b_k^T
/// per block, giving [rows x block].
Var block_matmul_nt(Var a, Var b, Index block);
/// a is [B*block x block], b is [B*block x m]; computes a_k * b_k per block.
Var block_matmul(Var a, Var b, Index block);

/// Row-wise softmax restricted to mask entries. `mask` is [n x n] row-major
/// and is tiled over row blocks of height n; masked entries come out as 0.
Var masked_softmax(Var scores, std::span<const unsigned char> mask, Index n);

Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

/// Inverted dropout. Identity when `train` is false or p == 0.
Var dropout(Var x, double p, bool train, Rng& rng);

}  // namespace voyagecast::tensor
