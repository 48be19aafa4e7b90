#include "normest/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "normest/errors.hpp"
#include "normest/random.hpp"

namespace normest {

double unoriented_angle_error(const Vec3& estimate, const Vec3& gt) {
  const double ne = estimate.norm(), ng = gt.norm();
  if (ne < 1e-12 || ng < 1e-12) {
    throw InvalidInputError("unoriented_angle_error: zero-length direction");
  }
  const double c = std::clamp(std::abs(estimate.dot(gt) / (ne * ng)), 0.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

double rmse(std::span<const double> errors) {
  if (errors.empty()) throw InvalidInputError("rmse: empty error list");
  double acc = 0.0;
  for (double e : errors) acc += e * e;
  return std::sqrt(acc / static_cast<double>(errors.size()));
}

double pgp_alpha(std::span<const double> errors, double alpha) {
  if (errors.empty()) throw InvalidInputError("pgp_alpha: empty error list");
  if (alpha <= 0) throw InvalidInputError("pgp_alpha: alpha must be > 0");
  const auto below = std::count_if(errors.begin(), errors.end(),
                                   [&](double e) { return e < alpha; });
  return 100.0 * static_cast<double>(below) /
         static_cast<double>(errors.size());
}

EvalReport evaluate_cloud(const PointCloud& cloud,
                          const PointEstimator& estimator, int subset_size,
                          std::uint64_t seed,
                          const std::vector<int>* fixed_indices,
                          std::vector<double> pgp_alphas) {
  if (!cloud.has_normals()) {
    throw InvalidInputError("evaluate_cloud: cloud has no ground truth");
  }
  cloud.validate();

  EvalReport report;
  const int n = cloud.size();
  if (fixed_indices) {
    report.eval_indices = *fixed_indices;
    for (int idx : report.eval_indices) {
      if (idx < 0 || idx >= n) {
        throw InvalidInputError("evaluate_cloud: subset index out of range");
      }
    }
  } else {
    // Seeded sampling without replacement (partial Fisher-Yates).
    const int take = std::min(subset_size, n);
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    Rng rng(seed);
    for (int i = 0; i < take; ++i) {
      const int j = i + static_cast<int>(rng.integer(n - i));
      std::swap(pool[i], pool[j]);
    }
    report.eval_indices.assign(pool.begin(), pool.begin() + take);
    std::sort(report.eval_indices.begin(), report.eval_indices.end());
  }

  report.per_point_errors.reserve(report.eval_indices.size());
  for (int idx : report.eval_indices) {
    report.per_point_errors.push_back(
        unoriented_angle_error(estimator(idx), cloud.gt_normals[idx]));
  }
  report.rmse = rmse(report.per_point_errors);
  for (double a : pgp_alphas) {
    report.pgp[a] = pgp_alpha(report.per_point_errors, a);
  }
  return report;
}

CategoryTable aggregate_categories(const std::vector<EvalReport>& reports) {
  if (reports.empty()) {
    throw InvalidInputError("aggregate_categories: no reports");
  }
  CategoryTable table;
  for (const EvalReport& r : reports) {
    CategoryRow row;
    row.category = r.category;
    row.rmse = r.rmse;
    row.pgp = r.pgp;
    row.point_count = static_cast<int>(r.per_point_errors.size());
    table.rows.push_back(std::move(row));
  }
  table.average.category = "average";
  for (const CategoryRow& row : table.rows) {
    table.average.rmse += row.rmse;
    table.average.point_count += row.point_count;
    for (const auto& [alpha, pct] : row.pgp) table.average.pgp[alpha] += pct;
  }
  const double inv = 1.0 / static_cast<double>(table.rows.size());
  table.average.rmse *= inv;
  for (auto& [alpha, pct] : table.average.pgp) pct *= inv;
  return table;
}

std::string error_band(double error_deg) {
  if (error_deg < 5.0) return "blue";
  if (error_deg <= 10.0) return "green";
  return "red";
}

void export_heatmap(const PointCloud& cloud, const EvalReport& report,
                    const std::string& path, HeatmapFormat format) {
  if (report.eval_indices.size() != report.per_point_errors.size()) {
    throw InvalidInputError("export_heatmap: indices/errors misaligned");
  }
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("export_heatmap: cannot open '" + path + "'");

  const auto band_rgb = [](const std::string& band) {
    if (band == "blue") return std::array<int, 3>{0, 0, 255};
    if (band == "green") return std::array<int, 3>{0, 255, 0};
    return std::array<int, 3>{255, 0, 0};
  };

  if (format == HeatmapFormat::Ply) {
    std::fprintf(f,
                 "ply\nformat ascii 1.0\nelement vertex %zu\n"
                 "property double x\nproperty double y\nproperty double z\n"
                 "property uchar red\nproperty uchar green\nproperty uchar "
                 "blue\nproperty double error_deg\nend_header\n",
                 report.eval_indices.size());
    for (std::size_t i = 0; i < report.eval_indices.size(); ++i) {
      const Vec3& p = cloud.points[report.eval_indices[i]];
      const double e = report.per_point_errors[i];
      const auto rgb = band_rgb(error_band(e));
      std::fprintf(f, "%.17g %.17g %.17g %d %d %d %.17g\n", p.x(), p.y(),
                   p.z(), rgb[0], rgb[1], rgb[2], e);
    }
  } else {
    std::fprintf(f, "x,y,z,err_deg,colormap,band\n");
    for (std::size_t i = 0; i < report.eval_indices.size(); ++i) {
      const Vec3& p = cloud.points[report.eval_indices[i]];
      const double e = report.per_point_errors[i];
      std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%s\n", p.x(), p.y(),
                   p.z(), e, std::clamp(e / 90.0, 0.0, 1.0),
                   error_band(e).c_str());
    }
  }
  std::fclose(f);
}

}  // namespace normest
