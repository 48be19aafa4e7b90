#include "normest/autodiff.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <cmath>
#include <string>
#include <utility>

#include "normest/errors.hpp"

namespace normest::ad {

namespace {
constexpr double kNormGuard = 1e-12;

void check_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                      const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(std::string(op) + ": shape mismatch");
  }
}
}  // namespace

Var Tape::emit(Eigen::MatrixXd value, bool requires_grad,
               std::function<void(Tape&, const Eigen::MatrixXd&)> backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Eigen::MatrixXd value) {
  return emit(std::move(value), true, nullptr);
}

Var Tape::constant(Eigen::MatrixXd value) {
  return emit(std::move(value), false, nullptr);
}

Eigen::MatrixXd Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) {
    return Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

void Tape::accumulate(int id, const Eigen::MatrixXd& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var root) {
  Node& r = nodes_[root.id];
  if (r.value.size() != 1) {
    throw Error("backward: root must be scalar");
  }
  r.grad = Eigen::MatrixXd::Ones(1, 1);
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

Var Tape::add(Var a, Var b) {
  check_same_shape(value(a), value(b), "add");
  return emit(value(a) + value(b), tracked(a) || tracked(b),
              [a, b](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a.id, g);
                t.accumulate(b.id, g);
              });
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(value(a), value(b), "sub");
  return emit(value(a) - value(b), tracked(a) || tracked(b),
              [a, b](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a.id, g);
                t.accumulate(b.id, -g);
              });
}

Var Tape::mul(Var a, Var b) {
  check_same_shape(value(a), value(b), "mul");
  return emit(value(a).cwiseProduct(value(b)), tracked(a) || tracked(b),
              [a, b](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a.id, g.cwiseProduct(t.value(b)));
                t.accumulate(b.id, g.cwiseProduct(t.value(a)));
              });
}

Var Tape::scale(Var a, double c) {
  return emit(c * value(a), tracked(a),
              [a, c](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a.id, c * g);
              });
}

Var Tape::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows()) {
    throw Error("matmul: inner dimensions disagree");
  }
  return emit(value(a) * value(b), tracked(a) || tracked(b),
              [a, b](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a.id, g * t.value(b).transpose());
                t.accumulate(b.id, t.value(a).transpose() * g);
              });
}

Var Tape::transpose(Var a) {
  return emit(value(a).transpose(), tracked(a),
              [a](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a.id, g.transpose());
              });
}

Var Tape::add_row_broadcast(Var a, Var bias) {
  if (value(bias).rows() != 1 || value(bias).cols() != value(a).cols()) {
    throw Error("add_row_broadcast: bias must be 1 x cols(a)");
  }
  Eigen::MatrixXd out = value(a);
  out.rowwise() += value(bias).row(0);
  return emit(std::move(out), tracked(a) || tracked(bias),
              [a, bias](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a.id, g);
                t.accumulate(bias.id, g.colwise().sum());
              });
}

Var Tape::col_broadcast_mul(Var a, Var col) {
  if (value(col).cols() != 1 || value(col).rows() != value(a).rows()) {
    throw Error("col_broadcast_mul: col must be rows(a) x 1");
  }
  return emit((value(a).array().colwise() * value(col).col(0).array())
                  .matrix(),
              tracked(a) || tracked(col),
              [a, col](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a.id,
                             (g.array().colwise() *
                              t.value(col).col(0).array())
                                 .matrix());
                t.accumulate(col.id,
                             g.cwiseProduct(t.value(a)).rowwise().sum());
              });
}

Var Tape::tanh(Var a) {
  return emit(value(a).array().tanh().matrix(), tracked(a),
              [a, self = size()](Tape& t, const Eigen::MatrixXd& g) {
                const auto y = t.nodes_[self].value.array();
                t.accumulate(a.id, (g.array() * (1.0 - y.square())).matrix());
              });
}

Var Tape::sigmoid(Var a) {
  Eigen::MatrixXd out =
      (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
  return emit(std::move(out), tracked(a),
              [a, self = size()](Tape& t, const Eigen::MatrixXd& g) {
                const auto y = t.nodes_[self].value.array();
                t.accumulate(a.id, (g.array() * y * (1.0 - y)).matrix());
              });
}

Var Tape::log(Var a) {
  return emit(value(a).array().log().matrix(), tracked(a),
              [a](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a.id, g.cwiseQuotient(t.value(a)));
              });
}

Var Tape::clamp(Var a, double lo, double hi) {
  Eigen::MatrixXd out = value(a).cwiseMax(lo).cwiseMin(hi);
  return emit(std::move(out), tracked(a),
              [a, lo, hi](Tape& t, const Eigen::MatrixXd& g) {
                const auto x = t.value(a).array();
                // Hard clamp: gradient only through the interior.
                const Eigen::ArrayXXd mask =
                    ((x > lo) && (x < hi)).cast<double>();
                t.accumulate(a.id, (g.array() * mask).matrix());
              });
}

Var Tape::colwise_max(Var a) {
  const Eigen::MatrixXd& x = value(a);
  Eigen::MatrixXd out(1, x.cols());
  std::vector<int> argmax(x.cols());
  for (int c = 0; c < x.cols(); ++c) {
    int best = 0;
    for (int r = 1; r < x.rows(); ++r) {
      if (x(r, c) > x(best, c)) best = r;  // ties keep the smallest row
    }
    argmax[c] = best;
    out(0, c) = x(best, c);
  }
  return emit(std::move(out), tracked(a),
              [a, argmax = std::move(argmax)](Tape& t,
                                              const Eigen::MatrixXd& g) {
                Eigen::MatrixXd ga = Eigen::MatrixXd::Zero(
                    t.value(a).rows(), t.value(a).cols());
                for (int c = 0; c < ga.cols(); ++c) {
                  ga(argmax[c], c) = g(0, c);
                }
                t.accumulate(a.id, ga);
              });
}

Var Tape::repeat_rows(Var row, int count) {
  if (value(row).rows() != 1) throw Error("repeat_rows: input must be 1 x d");
  return emit(value(row).replicate(count, 1), tracked(row),
              [row](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(row.id, g.colwise().sum());
              });
}

Var Tape::hstack(Var a, Var b) {
  if (value(a).rows() != value(b).rows()) {
    throw Error("hstack: row counts disagree");
  }
  Eigen::MatrixXd out(value(a).rows(), value(a).cols() + value(b).cols());
  out << value(a), value(b);
  const int ca = static_cast<int>(value(a).cols());
  return emit(std::move(out), tracked(a) || tracked(b),
              [a, b, ca](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a.id, g.leftCols(ca));
                t.accumulate(b.id, g.rightCols(g.cols() - ca));
              });
}

Var Tape::gather_rows(Var a, std::vector<int> rows) {
  const Eigen::MatrixXd& x = value(a);
  Eigen::MatrixXd out(static_cast<int>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<int>(i)) = x.row(rows[i]);
  }
  return emit(std::move(out), tracked(a),
              [a, rows = std::move(rows)](Tape& t, const Eigen::MatrixXd& g) {
                Eigen::MatrixXd ga = Eigen::MatrixXd::Zero(
                    t.value(a).rows(), t.value(a).cols());
                for (std::size_t i = 0; i < rows.size(); ++i) {
                  ga.row(rows[i]) += g.row(static_cast<int>(i));
                }
                t.accumulate(a.id, ga);
              });
}

Var Tape::group_mean_rows(Var a, int group_size) {
  const Eigen::MatrixXd& x = value(a);
  if (group_size < 1 || x.rows() % group_size != 0) {
    throw Error("group_mean_rows: rows not divisible by group size");
  }
  const int groups = static_cast<int>(x.rows()) / group_size;
  Eigen::MatrixXd out(groups, x.cols());
  for (int i = 0; i < groups; ++i) {
    out.row(i) =
        x.middleRows(i * group_size, group_size).colwise().mean();
  }
  return emit(std::move(out), tracked(a),
              [a, group_size](Tape& t, const Eigen::MatrixXd& g) {
                Eigen::MatrixXd ga(t.value(a).rows(), t.value(a).cols());
                for (int i = 0; i < g.rows(); ++i) {
                  ga.middleRows(i * group_size, group_size) =
                      (g.row(i) / group_size).replicate(group_size, 1);
                }
                t.accumulate(a.id, ga);
              });
}

Var Tape::sum(Var a) {
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = value(a).sum();
  return emit(std::move(out), tracked(a),
              [a](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a.id,
                             Eigen::MatrixXd::Constant(t.value(a).rows(),
                                                       t.value(a).cols(),
                                                       g(0, 0)));
              });
}

Var Tape::mean(Var a) {
  const double inv = 1.0 / static_cast<double>(value(a).size());
  return scale(sum(a), inv);
}

Var Tape::norm(Var a) {
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = value(a).norm();
  return emit(std::move(out), tracked(a),
              [a, self = size()](Tape& t, const Eigen::MatrixXd& g) {
                const double n = t.nodes_[self].value(0, 0);
                if (n <= kNormGuard) return;  // constant-zero branch
                t.accumulate(a.id, (g(0, 0) / n) * t.value(a));
              });
}

Var Tape::rowwise_norm(Var a) {
  Eigen::MatrixXd out = value(a).rowwise().norm();
  return emit(std::move(out), tracked(a),
              [a, self = size()](Tape& t, const Eigen::MatrixXd& g) {
                const Eigen::MatrixXd& x = t.value(a);
                const Eigen::MatrixXd& n = t.nodes_[self].value;
                Eigen::MatrixXd ga = Eigen::MatrixXd::Zero(x.rows(), x.cols());
                for (int r = 0; r < x.rows(); ++r) {
                  if (n(r, 0) <= kNormGuard) continue;
                  ga.row(r) = (g(r, 0) / n(r, 0)) * x.row(r);
                }
                t.accumulate(a.id, ga);
              });
}

namespace {
inline Eigen::Vector3d as_vec3(const Eigen::MatrixXd& m) {
  if (m.size() != 3) throw Error("expected a 3-vector");
  return Eigen::Vector3d(m(0), m(1), m(2));
}
}  // namespace

Var Tape::cross3(Var a, Var b) {
  const Eigen::Vector3d va = as_vec3(value(a)), vb = as_vec3(value(b));
  Eigen::MatrixXd out = va.cross(vb);
  return emit(std::move(out), tracked(a) || tracked(b),
              [a, b](Tape& t, const Eigen::MatrixXd& g) {
                const Eigen::Vector3d va = as_vec3(t.value(a));
                const Eigen::Vector3d vb = as_vec3(t.value(b));
                const Eigen::Vector3d gv = as_vec3(g);
                // d(a x b) applied to the adjoint: a_bar = b x g, b_bar = g x a
                Eigen::Vector3d ga = vb.cross(gv);
                Eigen::Vector3d gb = gv.cross(va);
                const auto shape_like = [](const Eigen::MatrixXd& like,
                                           const Eigen::Vector3d& v) {
                  Eigen::MatrixXd m(like.rows(), like.cols());
                  m(0) = v[0];
                  m(1) = v[1];
                  m(2) = v[2];
                  return m;
                };
                t.accumulate(a.id, shape_like(t.value(a), ga));
                t.accumulate(b.id, shape_like(t.value(b), gb));
              });
}

Var Tape::rowwise_cross(Var a, Var b) {
  const Eigen::MatrixXd& x = value(a);
  const Eigen::Vector3d vb = as_vec3(value(b));
  if (x.cols() != 3) throw Error("rowwise_cross: a must be k x 3");
  Eigen::MatrixXd out(x.rows(), 3);
  for (int r = 0; r < x.rows(); ++r) {
    out.row(r) = Eigen::Vector3d(x.row(r)).cross(vb).transpose();
  }
  return emit(std::move(out), tracked(a) || tracked(b),
              [a, b](Tape& t, const Eigen::MatrixXd& g) {
                const Eigen::MatrixXd& x = t.value(a);
                const Eigen::Vector3d vb = as_vec3(t.value(b));
                Eigen::MatrixXd ga(x.rows(), 3);
                Eigen::Vector3d gb = Eigen::Vector3d::Zero();
                for (int r = 0; r < x.rows(); ++r) {
                  const Eigen::Vector3d gr = g.row(r).transpose();
                  ga.row(r) = vb.cross(gr).transpose();
                  gb += gr.cross(Eigen::Vector3d(x.row(r)));
                }
                t.accumulate(a.id, ga);
                Eigen::MatrixXd gbm(t.value(b).rows(), t.value(b).cols());
                gbm(0) = gb[0];
                gbm(1) = gb[1];
                gbm(2) = gb[2];
                t.accumulate(b.id, gbm);
              });
}

Var Tape::normalize(Var a) {
  const double n = value(a).norm();
  if (n <= kNormGuard) throw Error("normalize: zero-norm input");
  return emit(value(a) / n, tracked(a),
              [a, self = size()](Tape& t, const Eigen::MatrixXd& g) {
                const Eigen::MatrixXd& u = t.nodes_[self].value;
                const double n = t.value(a).norm();
                const double proj = (g.array() * u.array()).sum();
                t.accumulate(a.id, (g - proj * u) / n);
              });
}

Var Tape::quat_to_rotation(Var q) {
  const Eigen::MatrixXd& qm = value(q);
  if (qm.size() != 4) throw Error("quat_to_rotation: expected 4 coefficients");
  const double w = qm(0), x = qm(1), y = qm(2), z = qm(3);
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return emit(r, tracked(q), [q](Tape& t, const Eigen::MatrixXd& g) {
    const Eigen::MatrixXd& qm = t.value(q);
    const double w = qm(0), x = qm(1), y = qm(2), z = qm(3);
    Eigen::Matrix3d dw, dx, dy, dz;
    dw << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
    dx << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x;
    dy << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y;
    dz << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0;
    Eigen::MatrixXd gq(qm.rows(), qm.cols());
    gq(0) = (g.array() * dw.array()).sum();
    gq(1) = (g.array() * dx.array()).sum();
    gq(2) = (g.array() * dy.array()).sum();
    gq(3) = (g.array() * dz.array()).sum();
    t.accumulate(q.id, gq);
  });
}

Var Tape::wls_solve(Var pts, Var w, int order, FitDiagnostics* diag) {
  const Eigen::MatrixXd& p = value(pts);
  if (p.cols() != 3) throw Error("wls_solve: pts must be k x 3");
  const int k = static_cast<int>(p.rows());
  const int terms = jet_term_count(order);

  Eigen::VectorXd weights = value(w).col(0);
  int positive = 0;
  for (int j = 0; j < k; ++j) {
    if (weights[j] < detail::kWeightFloor) {
      weights[j] = 0.0;
    } else {
      ++positive;
    }
  }
  if (k < terms || positive < terms) {
    throw UnderdeterminedSystemError(
        "wls_solve: " + std::to_string(positive) + " usable points for " +
        std::to_string(terms) + " coefficients");
  }

  const Eigen::MatrixXd m = build_vandermonde(p.leftCols<2>(), order);
  auto sol = detail::solve_weighted(m, weights, p.col(2));
  if (diag) *diag = sol.diag;

  const double ridge = sol.ridge;
  Eigen::MatrixXd beta = sol.beta;
  return emit(
      std::move(beta), tracked(pts) || tracked(w),
      [pts, w, order, ridge, self = size()](Tape& t,
                                            const Eigen::MatrixXd& g) {
        const Eigen::MatrixXd& p = t.value(pts);
        const Eigen::VectorXd beta = t.nodes_[self].value.col(0);
        Eigen::VectorXd weights = t.value(w).col(0);
        for (int j = 0; j < weights.size(); ++j) {
          if (weights[j] < detail::kWeightFloor) weights[j] = 0.0;
        }
        const auto xy = p.leftCols<2>();
        const Eigen::MatrixXd m = build_vandermonde(xy, order);

        // Adjoint of the implicit relation A beta = M^T W z with
        // A = M^T W M (+ ridge I): solve A lambda = beta_bar, then push
        // contributions to the weights and the point coordinates.
        Eigen::MatrixXd a =
            m.transpose() * weights.asDiagonal() * m;
        a.diagonal().array() += ridge;
        const Eigen::VectorXd lambda =
            Eigen::LDLT<Eigen::MatrixXd>(a).solve(g.col(0));

        const Eigen::VectorXd fitted = m * beta;
        const Eigen::VectorXd residual = p.col(2) - fitted;
        const Eigen::VectorXd tproj = m * lambda;

        if (t.tracked(w)) {
          Eigen::MatrixXd gw(weights.size(), 1);
          for (int j = 0; j < weights.size(); ++j) {
            gw(j, 0) = weights[j] == 0.0
                           ? 0.0  // dead weights are hard-clamped
                           : tproj[j] * residual[j];
          }
          t.accumulate(w.id, gw);
        }
        if (t.tracked(pts)) {
          const Eigen::MatrixXd mdx = build_vandermonde(xy, order, 1, 0);
          const Eigen::MatrixXd mdy = build_vandermonde(xy, order, 0, 1);
          const Eigen::VectorXd sx = mdx * beta, tx = mdx * lambda;
          const Eigen::VectorXd sy = mdy * beta, ty = mdy * lambda;
          Eigen::MatrixXd gp = Eigen::MatrixXd::Zero(p.rows(), 3);
          for (int j = 0; j < p.rows(); ++j) {
            if (weights[j] == 0.0) continue;
            gp(j, 0) = weights[j] * (tx[j] * residual[j] - tproj[j] * sx[j]);
            gp(j, 1) = weights[j] * (ty[j] * residual[j] - tproj[j] * sy[j]);
            gp(j, 2) = weights[j] * tproj[j];
          }
          t.accumulate(pts.id, gp);
        }
      });
}

Var Tape::jet_gradients(Var pts, Var beta, int order) {
  const Eigen::MatrixXd& p = value(pts);
  const Eigen::VectorXd b = value(beta).col(0);
  const auto xy = p.leftCols<2>();
  Eigen::MatrixXd out(p.rows(), 2);
  out.col(0) = build_vandermonde(xy, order, 1, 0) * b;
  out.col(1) = build_vandermonde(xy, order, 0, 1) * b;
  return emit(
      std::move(out), tracked(pts) || tracked(beta),
      [pts, beta, order](Tape& t, const Eigen::MatrixXd& g) {
        const Eigen::MatrixXd& p = t.value(pts);
        const Eigen::VectorXd b = t.value(beta).col(0);
        const auto xy = p.leftCols<2>();
        const Eigen::MatrixXd mdx = build_vandermonde(xy, order, 1, 0);
        const Eigen::MatrixXd mdy = build_vandermonde(xy, order, 0, 1);
        if (t.tracked(beta)) {
          Eigen::MatrixXd gb =
              mdx.transpose() * g.col(0) + mdy.transpose() * g.col(1);
          t.accumulate(beta.id, gb);
        }
        if (t.tracked(pts)) {
          const Eigen::VectorXd fxx = build_vandermonde(xy, order, 2, 0) * b;
          const Eigen::VectorXd fxy = build_vandermonde(xy, order, 1, 1) * b;
          const Eigen::VectorXd fyy = build_vandermonde(xy, order, 0, 2) * b;
          Eigen::MatrixXd gp = Eigen::MatrixXd::Zero(p.rows(), 3);
          gp.col(0) = g.col(0).cwiseProduct(fxx) + g.col(1).cwiseProduct(fxy);
          gp.col(1) = g.col(0).cwiseProduct(fxy) + g.col(1).cwiseProduct(fyy);
          t.accumulate(pts.id, gp);
        }
      });
}

Var Tape::normals_from_gradients(Var g) {
  const Eigen::MatrixXd& gv = value(g);
  if (gv.cols() != 2) throw Error("normals_from_gradients: expected k x 2");
  Eigen::MatrixXd out(gv.rows(), 3);
  for (int r = 0; r < gv.rows(); ++r) {
    out.row(r) = Eigen::Vector3d(-gv(r, 0), -gv(r, 1), 1.0)
                     .normalized()
                     .transpose();
  }
  return emit(std::move(out), tracked(g),
              [g, self = size()](Tape& t, const Eigen::MatrixXd& gout) {
                const Eigen::MatrixXd& gv = t.value(g);
                const Eigen::MatrixXd& n = t.nodes_[self].value;
                Eigen::MatrixXd gg(gv.rows(), 2);
                for (int r = 0; r < gv.rows(); ++r) {
                  const Eigen::Vector3d u = n.row(r).transpose();
                  const Eigen::Vector3d gr = gout.row(r).transpose();
                  const double len = std::sqrt(
                      1.0 + gv(r, 0) * gv(r, 0) + gv(r, 1) * gv(r, 1));
                  const Eigen::Vector3d h = (gr - gr.dot(u) * u) / len;
                  gg(r, 0) = -h[0];
                  gg(r, 1) = -h[1];
                }
                t.accumulate(g.id, gg);
              });
}

Var Tape::normal_from_beta(Var beta) {
  const Eigen::VectorXd b = value(beta).col(0);
  if (b.size() < 3) throw Error("normal_from_beta: order must be >= 1");
  Eigen::MatrixXd out = Eigen::Vector3d(-b[1], -b[2], 1.0).normalized();
  return emit(std::move(out), tracked(beta),
              [beta, self = size()](Tape& t, const Eigen::MatrixXd& g) {
                const Eigen::VectorXd b = t.value(beta).col(0);
                const Eigen::Vector3d u = t.nodes_[self].value.col(0);
                const Eigen::Vector3d gv = g.col(0);
                const double len =
                    std::sqrt(1.0 + b[1] * b[1] + b[2] * b[2]);
                const Eigen::Vector3d h = (gv - gv.dot(u) * u) / len;
                Eigen::MatrixXd gb =
                    Eigen::MatrixXd::Zero(t.value(beta).rows(), 1);
                gb(1, 0) = -h[0];
                gb(2, 0) = -h[1];
                t.accumulate(beta.id, gb);
              });
}

}  // namespace normest::ad
