#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "normest/geometry.hpp"

namespace normest {

struct EvalReport {
  std::string category;                 // none / noise 0.006 / gradient / ...
  std::vector<int> eval_indices;        // evaluated subset, ascending
  std::vector<double> per_point_errors; // degrees, aligned with eval_indices
  double rmse = 0.0;                    // degrees
  std::map<double, double> pgp;         // alpha (deg) -> percentage
};

/// Unoriented angle between two directions, degrees in [0, 90].
/// Non-unit inputs are normalized; zero vectors are invalid.
double unoriented_angle_error(const Vec3& estimate, const Vec3& gt);

/// sqrt(mean of squared errors); empty input is invalid.
double rmse(std::span<const double> errors);

/// 100 * |{e < alpha}| / count; empty input is invalid.
double pgp_alpha(std::span<const double> errors, double alpha);

using PointEstimator = std::function<Vec3(int point_index)>;

/// Evaluates an estimator on a deterministic subset (seeded sampling
/// without replacement, default size min(5000, N)); `fixed_indices`, when
/// given, overrides the sampled subset (the PCPNet protocol's .idx files).
EvalReport evaluate_cloud(const PointCloud& cloud,
                          const PointEstimator& estimator,
                          int subset_size = 5000, std::uint64_t seed = 0,
                          const std::vector<int>* fixed_indices = nullptr,
                          std::vector<double> pgp_alphas = {5.0, 10.0});

struct CategoryRow {
  std::string category;
  double rmse = 0.0;
  std::map<double, double> pgp;
  int point_count = 0;
};

struct CategoryTable {
  std::vector<CategoryRow> rows;
  CategoryRow average;  // unweighted mean over the category rows
};

/// One row per report plus the final unweighted average row.
CategoryTable aggregate_categories(const std::vector<EvalReport>& reports);

enum class HeatmapFormat { Csv, Ply };

/// Fig.-style error visualization: each evaluated point with its continuous
/// 0-90 degree colormap value and the three-band class (blue < 5, green
/// 5-10, red > 10 degrees).
void export_heatmap(const PointCloud& cloud, const EvalReport& report,
                    const std::string& path,
                    HeatmapFormat format = HeatmapFormat::Csv);

/// Band label for an error in degrees: "blue", "green" or "red".
std::string error_band(double error_deg);

}  // namespace normest
