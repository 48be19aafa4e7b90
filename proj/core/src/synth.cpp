#include "normest/synth.hpp"

#include <cmath>
#include <numbers>

#include "normest/errors.hpp"
#include "normest/jet.hpp"
#include "normest/random.hpp"

namespace normest {

namespace {

void check_spec(const ShapeSpec& spec) {
  if (spec.count < 16) {
    throw InvalidInputError("gen_shape: count must be >= 16");
  }
  switch (spec.kind) {
    case ShapeKind::QuadricHeightField: {
      // Any valid jet coefficient vector length is accepted.
      const int len = static_cast<int>(spec.parameters.size());
      bool ok = false;
      for (int n = 0; n <= 12 && !ok; ++n) ok = jet_term_count(n) == len;
      if (!ok) {
        throw InvalidInputError(
            "gen_shape: quadric coefficient count is not a jet term count");
      }
      break;
    }
    case ShapeKind::Sphere:
      if (spec.parameters.size() != 1 || spec.parameters[0] <= 0) {
        throw InvalidInputError("gen_shape: sphere needs a positive radius");
      }
      break;
    case ShapeKind::DihedralEdge:
      if (spec.parameters.size() != 1 || spec.parameters[0] <= 0 ||
          spec.parameters[0] >= 180.0) {
        throw InvalidInputError(
            "gen_shape: dihedral angle must lie in (0, 180) degrees");
      }
      break;
  }
}

PointCloud gen_height_field(const ShapeSpec& spec) {
  JetModel model;
  model.beta = Eigen::Map<const Eigen::VectorXd>(
      spec.parameters.data(), static_cast<int>(spec.parameters.size()));
  int order = 0;
  while (jet_term_count(order) != model.beta.size()) ++order;
  model.order = order;

  Rng rng(spec.seed);
  PointCloud cloud;
  cloud.name = "quadric";
  cloud.points.reserve(spec.count);
  cloud.gt_normals.reserve(spec.count);
  PointsXY xy(1, 2);
  for (int i = 0; i < spec.count; ++i) {
    xy(0, 0) = rng.uniform(-1.0, 1.0);
    xy(0, 1) = rng.uniform(-1.0, 1.0);
    const double z = evaluate_jet(model, xy)[0];
    cloud.points.emplace_back(xy(0, 0), xy(0, 1), z);
    if (order >= 1) {
      cloud.gt_normals.emplace_back(
          neighbor_normals(model, xy).row(0).transpose());
    } else {
      cloud.gt_normals.emplace_back(0, 0, 1);
    }
  }
  return cloud;
}

PointCloud gen_sphere(const ShapeSpec& spec) {
  const double radius = spec.parameters[0];
  Rng rng(spec.seed);
  PointCloud cloud;
  cloud.name = "sphere";
  cloud.points.reserve(spec.count);
  cloud.gt_normals.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    // Area-uniform: z uniform in [-R, R], azimuth uniform.
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 n(s * std::cos(phi), s * std::sin(phi), z);
    cloud.points.push_back(radius * n);
    cloud.gt_normals.push_back(n);
  }
  return cloud;
}

PointCloud gen_dihedral(const ShapeSpec& spec) {
  const double half = 0.5 * spec.parameters[0] * std::numbers::pi / 180.0;
  // Symmetric V opening toward +z: half-plane directions in the xz plane.
  const Vec3 dir_a(std::sin(half), 0.0, std::cos(half));
  const Vec3 dir_b(-std::sin(half), 0.0, std::cos(half));
  const Vec3 normal_a = Vec3(-std::cos(half), 0.0, std::sin(half));
  const Vec3 normal_b = Vec3(std::cos(half), 0.0, std::sin(half));

  Rng rng(spec.seed);
  PointCloud cloud;
  cloud.name = "dihedral";
  cloud.points.reserve(spec.count);
  cloud.gt_normals.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    const bool side_a = rng.bernoulli(0.5);
    const double s = rng.uniform(0.0, 1.0);
    const double y = rng.uniform(-1.0, 1.0);
    const Vec3 p = s * (side_a ? dir_a : dir_b) + Vec3(0.0, y, 0.0);
    cloud.points.push_back(p);
    if (s == 0.0) {
      cloud.gt_normals.push_back((normal_a + normal_b).normalized());
    } else {
      cloud.gt_normals.push_back(side_a ? normal_a : normal_b);
    }
  }
  return cloud;
}

}  // namespace

PointCloud gen_shape(const ShapeSpec& spec) {
  check_spec(spec);
  switch (spec.kind) {
    case ShapeKind::QuadricHeightField:
      return gen_height_field(spec);
    case ShapeKind::Sphere:
      return gen_sphere(spec);
    case ShapeKind::DihedralEdge:
      return gen_dihedral(spec);
  }
  throw InvalidInputError("gen_shape: unknown kind");
}

PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma_rel,
                              std::uint64_t seed) {
  if (sigma_rel < 0) {
    throw InvalidInputError("add_gaussian_noise: negative sigma");
  }
  PointCloud out = cloud;
  if (sigma_rel == 0.0) return out;
  const double sigma = sigma_rel * bounding_box_diagonal(cloud);
  Rng rng(seed);
  for (Vec3& p : out.points) {
    p.x() += rng.normal(0.0, sigma);
    p.y() += rng.normal(0.0, sigma);
    p.z() += rng.normal(0.0, sigma);
  }
  return out;
}

PointCloud apply_density(const PointCloud& cloud, DensityMode mode,
                         std::uint64_t seed) {
  if (mode == DensityMode::None) return cloud;
  double xmin = cloud.points.front().x(), xmax = xmin;
  for (const Vec3& p : cloud.points) {
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
  }
  const double extent = std::max(xmax - xmin, 1e-300);

  Rng rng(seed);
  PointCloud out;
  out.name = cloud.name;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const double u = (cloud.points[i].x() - xmin) / extent;
    double keep = 1.0;
    if (mode == DensityMode::Gradient) {
      keep = 1.0 + (0.1 - 1.0) * u;
    } else {  // Stripes: 10 alternating bands along x
      const int band = std::min(9, static_cast<int>(u * 10.0));
      keep = (band % 2 == 0) ? 1.0 : 0.1;
    }
    if (rng.bernoulli(keep)) {
      out.points.push_back(cloud.points[i]);
      if (cloud.has_normals()) out.gt_normals.push_back(cloud.gt_normals[i]);
    }
  }
  return out;
}

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::QuadricHeightField:
      return "quadric";
    case ShapeKind::Sphere:
      return "sphere";
    case ShapeKind::DihedralEdge:
      return "dihedral";
  }
  return "?";
}

std::string to_string(DensityMode mode) {
  switch (mode) {
    case DensityMode::None:
      return "none";
    case DensityMode::Gradient:
      return "gradient";
    case DensityMode::Stripes:
      return "stripes";
  }
  return "?";
}

DensityMode density_mode_from_string(const std::string& text) {
  if (text == "none") return DensityMode::None;
  if (text == "gradient") return DensityMode::Gradient;
  if (text == "stripes") return DensityMode::Stripes;
  throw InvalidInputError("unknown density mode '" + text + "'");
}

}  // namespace normest
