#pragma once

#include <Eigen/Core>
#include <utility>

#include "normest/geometry.hpp"

namespace normest {

/// Truncated-Taylor height function z = f(x, y) of total degree `order`.
/// Coefficients are stored degree-major, descending x power within a degree:
/// b00, b10, b01, b20, b11, b02, ...
struct JetModel {
  int order = 0;
  Eigen::VectorXd beta;
};

struct FitDiagnostics {
  double residual_norm = 0.0;
  double condition_hint = 0.0;  // ratio of extreme |R| diagonals from the QR
  bool ridge_applied = false;
};

/// (order+1)(order+2)/2 monomials of total degree <= order.
int jet_term_count(int order);

/// Row j holds the monomials of (x_j, y_j), differentiated dx times in x and
/// dy times in y. With dx = dy = 0 this is the plain Vandermonde matrix whose
/// first column is all ones.
Eigen::MatrixXd build_vandermonde(const PointsXY& xy, int order, int dx = 0,
                                  int dy = 0);

/// Plain least squares: beta minimizing |M beta - z|^2 over the aligned
/// points' height coordinates. Throws UnderdeterminedSystemError when
/// k < jet_term_count(order).
std::pair<JetModel, FitDiagnostics> ls_fit(const Points& pts, int order);

/// Weighted least squares: beta minimizing |W^{1/2} (M beta - z)|^2, solved
/// by row-scaling followed by an orthogonal decomposition. Weights below
/// 1e-7 are treated as exactly zero; fewer than jet_term_count(order)
/// positive weights throws UnderdeterminedSystemError. Near rank deficiency
/// (condition hint > 1e12) falls back to a ridge solve and flags it.
std::pair<JetModel, FitDiagnostics> wls_fit(const Points& pts,
                                            const Eigen::VectorXd& weights,
                                            int order);

/// Surface normal at the patch origin: normalize(-b10, -b01, 1).
Vec3 normal_from_beta(const JetModel& model);

/// Normals of the fitted surface at arbitrary (x, y), one unit row each:
/// normalize(-df/dx, -df/dy, 1). At (0, 0) this equals normal_from_beta.
Points neighbor_normals(const JetModel& model, const PointsXY& xy);

/// Height f(x, y) at each query.
Eigen::VectorXd evaluate_jet(const JetModel& model, const PointsXY& xy);

namespace detail {

/// Shared solver core: minimizes |diag(sqrt(w)) (M beta - b)|^2. `weights`
/// must already have dead entries zeroed. Used by wls_fit and by the
/// autodiff node that differentiates through the solve.
struct WlsSolution {
  Eigen::VectorXd beta;
  FitDiagnostics diag;
  double ridge = 0.0;  // the ridge term actually added to M^T W M
};
WlsSolution solve_weighted(const Eigen::MatrixXd& M,
                           const Eigen::VectorXd& weights,
                           const Eigen::VectorXd& b);

constexpr double kWeightFloor = 1e-7;
constexpr double kConditionLimit = 1e12;
constexpr double kRidge = 1e-8;

}  // namespace detail

}  // namespace normest
