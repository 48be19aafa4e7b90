#include "normest/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "normest/errors.hpp"

namespace normest {

void PointCloud::validate() const {
  if (points.empty()) {
    throw InvalidInputError("point cloud '" + name + "' is empty");
  }
  if (!gt_normals.empty()) {
    if (gt_normals.size() != points.size()) {
      throw InvalidInputError("cloud '" + name + "': " +
                              std::to_string(gt_normals.size()) +
                              " normals for " + std::to_string(points.size()) +
                              " points");
    }
    for (std::size_t i = 0; i < gt_normals.size(); ++i) {
      if (std::abs(gt_normals[i].norm() - 1.0) > 1e-6) {
        throw InvalidInputError("cloud '" + name + "': normal " +
                                std::to_string(i) + " is not unit length");
      }
    }
  }
}

double bounding_box_diagonal(const PointCloud& cloud) {
  if (cloud.points.empty()) {
    throw InvalidInputError("bounding_box_diagonal: empty cloud");
  }
  Vec3 lo = cloud.points.front();
  Vec3 hi = lo;
  for (const Vec3& p : cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

namespace {
constexpr int kLeafSize = 16;

// (squared distance, index) ordering used everywhere: ties by smaller index.
inline bool closer(const std::pair<double, int>& a,
                   const std::pair<double, int>& b) {
  return a.first < b.first || (a.first == b.first && a.second < b.second);
}
}  // namespace

KnnIndex::KnnIndex(const PointCloud& cloud) : points_(cloud.points) {
  if (points_.empty()) {
    throw InvalidInputError("build_knn_index: empty cloud");
  }
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  root_ = build(0, static_cast<int>(points_.size()), 0);
}

int KnnIndex::build(int begin, int end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  // Split on the widest axis at the median.
  Vec3 lo = points_[order_[begin]], hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis;
  (hi - lo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](int a, int b) {
                     const double da = points_[a][axis], db = points_[b][axis];
                     return da < db || (da == db && a < b);
                   });
  nodes_[id].axis = axis;
  nodes_[id].threshold = points_[order_[mid]][axis];
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KnnIndex::search(int node, const Vec3& q, int r,
                      std::vector<std::pair<double, int>>& heap) const {
  const SplitNode& n = nodes_[node];
  if (n.axis < 0) {
    for (int i = n.begin; i < n.end; ++i) {
      const int idx = order_[i];
      const std::pair<double, int> cand{(points_[idx] - q).squaredNorm(), idx};
      if (static_cast<int>(heap.size()) < r) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), closer);
      } else if (closer(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), closer);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), closer);
      }
    }
    return;
  }
  const double delta = q[n.axis] - n.threshold;
  const int near = delta < 0 ? n.left : n.right;
  const int far = delta < 0 ? n.right : n.left;
  search(near, q, r, heap);
  // The far side may still hold an equal-distance point with a smaller
  // index, so descend on <= rather than <.
  if (static_cast<int>(heap.size()) < r || delta * delta <= heap.front().first) {
    search(far, q, r, heap);
  }
}

std::vector<int> KnnIndex::query_position(const Vec3& position, int r) const {
  if (r < 1 || r > size()) {
    throw InvalidInputError("query_knn: r=" + std::to_string(r) +
                            " outside [1, " + std::to_string(size()) + "]");
  }
  std::vector<std::pair<double, int>> heap;
  heap.reserve(r + 1);
  search(root_, position, r, heap);
  std::sort(heap.begin(), heap.end(), closer);
  std::vector<int> out(heap.size());
  for (std::size_t i = 0; i < heap.size(); ++i) out[i] = heap[i].second;
  return out;
}

std::vector<int> KnnIndex::query(int query_index, int r) const {
  if (query_index < 0 || query_index >= size()) {
    throw InvalidInputError("query_knn: bad query index " +
                            std::to_string(query_index));
  }
  return query_position(points_[query_index], r);
}

std::pair<Points, Mat3> pca_align(const Points& pts) {
  if (pts.rows() < 3) {
    throw DegeneratePatchError("pca_align: need at least 3 points");
  }
  // Second-moment matrix with population (1/r) scaling; the caller supplies
  // centered coordinates.
  const Mat3 cov = (pts.transpose() * pts) / static_cast<double>(pts.rows());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw DegeneratePatchError("pca_align: eigensolver failed");
  }
  // SelfAdjointEigenSolver orders ascending; we want descending.
  Vec3 evals = eig.eigenvalues().reverse();
  Mat3 axes;
  axes.col(0) = eig.eigenvectors().col(2);
  axes.col(1) = eig.eigenvectors().col(1);
  axes.col(2) = eig.eigenvectors().col(0);
  if (!(evals[0] > 0) || evals[1] <= 1e-12 * evals[0]) {
    throw DegeneratePatchError("pca_align: covariance rank < 2");
  }

  // Deterministic sign convention. An eigenvector is flipped so its dot
  // product with the first reference axis is nonnegative, falling through to
  // the next axis on exact ties.
  const auto fix_sign = [](Vec3 v, const int axes_order[3]) {
    for (int a = 0; a < 3; ++a) {
      const double d = v[axes_order[a]];
      if (d > 0) return v;
      if (d < 0) return Vec3(-v);
    }
    return v;  // zero vector cannot happen for a unit eigenvector
  };
  static constexpr int kZyx[3] = {2, 1, 0};
  static constexpr int kXyz[3] = {0, 1, 2};
  Mat3 rot;
  rot.col(2) = fix_sign(axes.col(2), kZyx);
  rot.col(0) = fix_sign(axes.col(0), kXyz);
  rot.col(1) = rot.col(2).cross(rot.col(0));  // forces det = +1

  return {pts * rot, rot};
}

Patch extract_patch(const PointCloud& cloud, const KnnIndex& index, int center,
                    int r) {
  if (r > cloud.size()) {
    throw InvalidInputError("extract_patch: r=" + std::to_string(r) +
                            " exceeds cloud size");
  }
  Patch patch;
  patch.center_index = center;
  patch.neighbor_indices = index.query(center, r);
  patch.translation = cloud.points[center];

  Points local(r, 3);
  for (int j = 0; j < r; ++j) {
    local.row(j) =
        (cloud.points[patch.neighbor_indices[j]] - patch.translation)
            .transpose();
  }
  const double max_norm = local.rowwise().norm().maxCoeff();
  if (max_norm <= 0.0) {
    throw DegeneratePatchError("extract_patch: all neighbors coincide");
  }
  local /= max_norm;
  patch.scale = max_norm;

  auto [aligned, rot] = pca_align(local);
  patch.local_points = std::move(aligned);
  patch.to_world_rotation = rot;
  // Row 0 is the center and must sit at the origin exactly.
  patch.local_points.row(0).setZero();
  return patch;
}

}  // namespace normest
