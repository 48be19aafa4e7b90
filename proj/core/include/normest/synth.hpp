#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "normest/geometry.hpp"

namespace normest {

enum class ShapeKind { QuadricHeightField, Sphere, DihedralEdge };

/// Synthetic shape description. `parameters` depends on the kind:
///   QuadricHeightField - jet coefficients (length must be a valid term
///                        count) for z = f(x, y) over [-1, 1]^2
///   Sphere             - {radius}
///   DihedralEdge       - {angle between the half-planes, degrees}
struct ShapeSpec {
  ShapeKind kind = ShapeKind::QuadricHeightField;
  std::vector<double> parameters;
  int count = 0;
  std::uint64_t seed = 0;
};

enum class DensityMode { None, Gradient, Stripes };

struct AugmentSpec {
  double noise_sigma_rel = 0.0;  // fraction of the bounding box diagonal
  DensityMode density_mode = DensityMode::None;
  std::uint64_t seed = 0;
};

/// Samples `spec.count` points with analytic unit ground-truth normals.
/// Height fields sample xy uniformly, spheres are area-uniform, dihedral
/// edges uniform over both half-planes (crease points get the bisector).
PointCloud gen_shape(const ShapeSpec& spec);

/// Perturbs every coordinate by N(0, (sigma_rel * diagonal)^2); ground-truth
/// normals are carried over unchanged.
PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma_rel,
                              std::uint64_t seed);

/// Subsamples by keep probability along the x extent: Gradient ramps
/// linearly 1.0 -> 0.1, Stripes alternates 10 bands at 1.0 / 0.1.
PointCloud apply_density(const PointCloud& cloud, DensityMode mode,
                         std::uint64_t seed);

std::string to_string(ShapeKind kind);
std::string to_string(DensityMode mode);
DensityMode density_mode_from_string(const std::string& text);

}  // namespace normest
