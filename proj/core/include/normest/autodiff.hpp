#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "normest/jet.hpp"

namespace normest::ad {

/// Handle to a node on a Tape. Cheap to copy, valid for the tape's lifetime.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over matrix-valued nodes. Values are Eigen matrices so
/// the heavy lifting (dense layers, pooling) runs as BLAS-style kernels
/// rather than per-scalar graph nodes. Creation order is topological order;
/// backward() walks ids in reverse. A tape records one forward pass and is
/// single-use: build, backward, read gradients, discard.
class Tape {
 public:
  Tape() = default;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that receives gradients (a trainable parameter array).
  Var input(Eigen::MatrixXd value);
  /// Leaf that does not track gradients.
  Var constant(Eigen::MatrixXd value);

  const Eigen::MatrixXd& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const { return nodes_[v.id].value(0, 0); }
  /// Gradient accumulated by the last backward(); zeros if untouched.
  Eigen::MatrixXd grad(Var v) const;

  /// Seeds d(root)/d(root) = 1 and propagates to every reachable leaf.
  /// `root` must be 1x1.
  void backward(Var root);

  // --- arithmetic ---
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double c);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  /// (k x d) + (1 x d), bias broadcast over rows.
  Var add_row_broadcast(Var a, Var bias);
  /// (k x d) .* (k x 1), column broadcast over columns.
  Var col_broadcast_mul(Var a, Var col);

  // --- elementwise functions ---
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var log(Var a);
  Var clamp(Var a, double lo, double hi);

  // --- structure ---
  /// (k x d) -> (1 x d); ties resolve to the smallest row index.
  Var colwise_max(Var a);
  Var repeat_rows(Var row, int count);
  Var hstack(Var a, Var b);
  Var gather_rows(Var a, std::vector<int> rows);
  /// (g*m x d) -> (g x d), mean over each consecutive group of m rows.
  Var group_mean_rows(Var a, int group_size);
  Var sum(Var a);
  Var mean(Var a);

  // --- geometry ---
  /// Frobenius norm (1x1). Gradient is guarded to zero at a zero input.
  Var norm(Var a);
  /// (k x d) -> (k x 1) row norms, guarded like norm().
  Var rowwise_norm(Var a);
  /// Cross product of two 3-vectors (any orientation), result 3x1.
  Var cross3(Var a, Var b);
  /// Each row of a (k x 3) crossed with one 3-vector b: rows a_i x b.
  Var rowwise_cross(Var a, Var b);
  /// v / |v| over all coefficients (vector normalization).
  Var normalize(Var a);
  /// Unit quaternion (w, x, y, z) to rotation matrix (3x3).
  Var quat_to_rotation(Var q);

  // --- jet fitting ---
  /// Weighted least-squares jet solve: pts (k x 3) aligned points, w (k x 1)
  /// nonnegative weights -> beta (N_n x 1). Differentiated through the
  /// implicit relation (M^T W M) beta = M^T W z, so gradients reach both the
  /// weights and the point coordinates. Throws UnderdeterminedSystemError
  /// when fewer than N_n weights survive the dead-weight floor.
  Var wls_solve(Var pts, Var w, int order, FitDiagnostics* diag = nullptr);
  /// Height-function gradients (df/dx, df/dy) of the jet at each point's
  /// (x, y): pts (k x 3), beta (N_n x 1) -> (k x 2).
  Var jet_gradients(Var pts, Var beta, int order);
  /// (k x 2) gradients -> (k x 3) unit normals (-gx, -gy, 1)/len per row.
  Var normals_from_gradients(Var g);
  /// beta -> unit normal (-b10, -b01, 1)/len at the origin (3x1).
  Var normal_from_beta(Var beta);

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;  // empty until touched during backward
    bool requires_grad = false;
    std::function<void(Tape&, const Eigen::MatrixXd&)> backward;
  };

  Var emit(Eigen::MatrixXd value, bool requires_grad,
           std::function<void(Tape&, const Eigen::MatrixXd&)> backward);
  bool tracked(Var v) const { return nodes_[v.id].requires_grad; }
  void accumulate(int id, const Eigen::MatrixXd& g);

  std::vector<Node> nodes_;
};

}  // namespace normest::ad
