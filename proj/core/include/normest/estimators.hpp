#pragma once

#include <string>
#include <vector>

#include "normest/geometry.hpp"
#include "normest/network.hpp"

namespace normest {

enum class Method { Pca, Jet, Learned };

Method method_from_string(const std::string& text);
std::string to_string(Method method);

struct EstimatorOptions {
  Method method = Method::Jet;
  int patch_size = 256;
  int order = 3;
  int k = -1;  // -1: paper operating points (50 @ 256, 100 @ 512), else r/5
  int m = 8;
  int threads = 1;
  const ModelParams* params = nullptr;  // required for Method::Learned
};

/// Selection size actually used for a given patch size when k is left
/// unset: the ablation operating points 50 @ r=256 and 100 @ r=512,
/// otherwise max(term count, r/5).
int default_selection_size(int patch_size, int order);

/// Normal of a single point by the configured method. PCA returns the
/// patch's smallest-variance axis; Jet fits an unweighted n-jet; Learned
/// runs the full pipeline.
Vec3 estimate_point(const PointCloud& cloud, const KnnIndex& index,
                    int point_index, const EstimatorOptions& options);

/// Normals for every point, parallelized over points; output order is by
/// point index regardless of the thread count.
std::vector<Vec3> estimate_normals(const PointCloud& cloud,
                                   const EstimatorOptions& options);

}  // namespace normest
