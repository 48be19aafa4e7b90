#include "normest/jet.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <cmath>
#include <limits>
#include <string>

#include "normest/errors.hpp"

namespace normest {

int jet_term_count(int order) {
  if (order < 0) throw InvalidInputError("jet_term_count: negative order");
  return (order + 1) * (order + 2) / 2;
}

Eigen::MatrixXd build_vandermonde(const PointsXY& xy, int order, int dx,
                                  int dy) {
  const int k = static_cast<int>(xy.rows());
  const int terms = jet_term_count(order);
  Eigen::MatrixXd m(k, terms);
  for (int j = 0; j < k; ++j) {
    const double x = xy(j, 0), y = xy(j, 1);
    int col = 0;
    for (int s = 0; s <= order; ++s) {
      for (int t = 0; t <= s; ++t, ++col) {
        const int px = s - t, py = t;  // monomial x^px y^py
        if (px < dx || py < dy) {
          m(j, col) = 0.0;
          continue;
        }
        double c = 1.0;
        for (int d = 0; d < dx; ++d) c *= px - d;
        for (int d = 0; d < dy; ++d) c *= py - d;
        m(j, col) = c * std::pow(x, px - dx) * std::pow(y, py - dy);
      }
    }
  }
  return m;
}

namespace detail {

WlsSolution solve_weighted(const Eigen::MatrixXd& M,
                           const Eigen::VectorXd& weights,
                           const Eigen::VectorXd& b) {
  const Eigen::VectorXd sw = weights.cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd sm = sw.asDiagonal() * M;
  const Eigen::VectorXd sb = sw.asDiagonal() * b;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sm);
  const Eigen::VectorXd rdiag =
      qr.matrixR().diagonal().head(M.cols()).cwiseAbs();
  const double dmax = rdiag.maxCoeff();
  const double dmin = rdiag.minCoeff();

  WlsSolution out;
  out.diag.condition_hint =
      dmin > 0.0 ? dmax / dmin : std::numeric_limits<double>::infinity();
  if (out.diag.condition_hint > kConditionLimit) {
    // Degenerate selection (e.g. collinear points): regularized normal
    // equations keep the solve finite.
    Eigen::MatrixXd a = sm.transpose() * sm;
    a.diagonal().array() += kRidge;
    out.beta = Eigen::LDLT<Eigen::MatrixXd>(a).solve(sm.transpose() * sb);
    out.diag.ridge_applied = true;
    out.ridge = kRidge;
  } else {
    out.beta = qr.solve(sb);
  }
  out.diag.residual_norm = (sm * out.beta - sb).norm();
  return out;
}

}  // namespace detail

std::pair<JetModel, FitDiagnostics> ls_fit(const Points& pts, int order) {
  return wls_fit(pts, Eigen::VectorXd::Ones(pts.rows()), order);
}

std::pair<JetModel, FitDiagnostics> wls_fit(const Points& pts,
                                            const Eigen::VectorXd& weights,
                                            int order) {
  const int k = static_cast<int>(pts.rows());
  const int terms = jet_term_count(order);
  if (weights.size() != k) {
    throw InvalidInputError("wls_fit: weight count does not match points");
  }
  if ((weights.array() < 0).any()) {
    throw InvalidInputError("wls_fit: negative weight");
  }
  Eigen::VectorXd w = weights;
  int positive = 0;
  for (int j = 0; j < k; ++j) {
    if (w[j] < detail::kWeightFloor) {
      w[j] = 0.0;
    } else {
      ++positive;
    }
  }
  if (k < terms || positive < terms) {
    throw UnderdeterminedSystemError(
        "wls_fit: " + std::to_string(positive) + " usable points for " +
        std::to_string(terms) + " coefficients (order " +
        std::to_string(order) + ")");
  }

  const Eigen::MatrixXd m = build_vandermonde(pts.leftCols<2>(), order);
  auto sol = detail::solve_weighted(m, w, pts.col(2));
  return {JetModel{order, std::move(sol.beta)}, sol.diag};
}

Vec3 normal_from_beta(const JetModel& model) {
  if (model.order < 1) {
    throw InvalidInputError("normal_from_beta: order must be >= 1");
  }
  return Vec3(-model.beta[1], -model.beta[2], 1.0).normalized();
}

Points neighbor_normals(const JetModel& model, const PointsXY& xy) {
  if (model.order < 1) {
    throw InvalidInputError("neighbor_normals: order must be >= 1");
  }
  const Eigen::VectorXd fx = build_vandermonde(xy, model.order, 1, 0) * model.beta;
  const Eigen::VectorXd fy = build_vandermonde(xy, model.order, 0, 1) * model.beta;
  Points normals(xy.rows(), 3);
  for (int j = 0; j < xy.rows(); ++j) {
    normals.row(j) = Vec3(-fx[j], -fy[j], 1.0).normalized().transpose();
  }
  return normals;
}

Eigen::VectorXd evaluate_jet(const JetModel& model, const PointsXY& xy) {
  return build_vandermonde(xy, model.order) * model.beta;
}

}  // namespace normest
