#pragma once

#include <Eigen/Core>
#include <string>
#include <utility>
#include <vector>

namespace normest {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
/// Row-per-point storage; the layout every fitting routine expects.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using PointsXY = Eigen::Matrix<double, Eigen::Dynamic, 2>;

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> gt_normals;  // empty, or one unit normal per point
  std::string name;

  bool has_normals() const { return !gt_normals.empty(); }
  int size() const { return static_cast<int>(points.size()); }

  /// Throws InvalidInputError unless: points non-empty; gt_normals (when
  /// present) match the point count and are unit within 1e-6.
  void validate() const;
};

/// Euclidean length of the axis-aligned bounding box diagonal.
double bounding_box_diagonal(const PointCloud& cloud);

/// kd-tree over a cloud's points. Queries return exactly the brute-force
/// k-nearest result, distance ties broken by the smaller point index.
/// Immutable after construction; safe for concurrent queries.
class KnnIndex {
 public:
  explicit KnnIndex(const PointCloud& cloud);

  /// The r indices nearest to point `query_index` (itself included, first),
  /// sorted by ascending distance, ties by ascending index.
  std::vector<int> query(int query_index, int r) const;

  /// Same search around an arbitrary position.
  std::vector<int> query_position(const Vec3& position, int r) const;

  int size() const { return static_cast<int>(points_.size()); }

 private:
  struct SplitNode {
    int axis = -1;         // -1 marks a leaf
    double threshold = 0;  // split coordinate
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range into order_
  };

  int build(int begin, int end, int depth);
  void search(int node, const Vec3& q, int r,
              std::vector<std::pair<double, int>>& heap) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;  // permutation of point indices, leaf-partitioned
  std::vector<SplitNode> nodes_;
  int root_ = -1;
};

struct Patch {
  int center_index = -1;
  std::vector<int> neighbor_indices;  // center first, then ascending distance
  Points local_points;                // row 0 is the origin, max row norm 1
  Mat3 to_world_rotation;             // orthonormal, det +1
  double scale = 1.0;                 // normalization divisor
  Vec3 translation = Vec3::Zero();    // the center point in world coordinates

  int size() const { return static_cast<int>(local_points.rows()); }

  Vec3 to_world_point(const Vec3& local) const {
    return translation + scale * (to_world_rotation * local);
  }
  /// Directions (normals) ignore translation and isotropic scale.
  Vec3 to_world_direction(const Vec3& local) const {
    return to_world_rotation * local;
  }
  Vec3 to_local_direction(const Vec3& world) const {
    return to_world_rotation.transpose() * world;
  }
};

/// Aligns (already centered) points with the principal axes of their second
/// moment matrix. Returns the aligned points and the rotation R whose columns
/// are eigenvectors in descending eigenvalue order, so aligned = P * R and
/// the smallest-variance direction becomes local z. Deterministic sign
/// convention: third column flipped against +z (ties +y, +x), first column
/// against +x (ties +y, +z), second column = third x first.
/// Throws DegeneratePatchError when the covariance rank is < 2.
std::pair<Points, Mat3> pca_align(const Points& pts);

/// Gathers the r nearest neighbors of `center`, translates so the center is
/// at the origin, scales the farthest neighbor to norm 1, then PCA-aligns.
/// The recorded transform reproduces world coordinates exactly:
/// world = translation + scale * (to_world_rotation * local).
Patch extract_patch(const PointCloud& cloud, const KnnIndex& index, int center,
                    int r);

}  // namespace normest
