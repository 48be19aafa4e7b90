#include "normest/estimators.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include "normest/errors.hpp"
#include "normest/jet.hpp"

namespace normest {

Method method_from_string(const std::string& text) {
  if (text == "pca") return Method::Pca;
  if (text == "jet") return Method::Jet;
  if (text == "learned") return Method::Learned;
  throw InvalidInputError("unknown method '" + text + "'");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::Pca:
      return "pca";
    case Method::Jet:
      return "jet";
    case Method::Learned:
      return "learned";
  }
  return "?";
}

int default_selection_size(int patch_size, int order) {
  if (patch_size == 256) return 50;
  if (patch_size == 512) return 100;
  return std::max(jet_term_count(order), patch_size / 5);
}

Vec3 estimate_point(const PointCloud& cloud, const KnnIndex& index,
                    int point_index, const EstimatorOptions& options) {
  const Patch patch =
      extract_patch(cloud, index, point_index, options.patch_size);
  switch (options.method) {
    case Method::Pca:
      // The patch frame's z axis is already the smallest-variance direction.
      return patch.to_world_rotation.col(2);
    case Method::Jet: {
      const auto [model, diag] = ls_fit(patch.local_points, options.order);
      return patch.to_world_direction(normal_from_beta(model));
    }
    case Method::Learned: {
      if (!options.params) {
        throw InvalidInputError("estimate: learned method needs parameters");
      }
      PipelineConfig pc;
      pc.k = options.k > 0 ? std::min(options.k, patch.size())
                           : default_selection_size(options.patch_size,
                                                    options.order);
      pc.order = options.order;
      pc.m = options.m;
      ForwardResult fwd = forward_pipeline(*options.params, patch, pc);
      return fwd.normal();
    }
  }
  throw InvalidInputError("estimate: unknown method");
}

std::vector<Vec3> estimate_normals(const PointCloud& cloud,
                                   const EstimatorOptions& options) {
  cloud.validate();
  if (options.patch_size > cloud.size()) {
    throw InvalidInputError("estimate: patch size exceeds cloud size");
  }
  const KnnIndex index(cloud);
  std::vector<Vec3> normals(cloud.size());

  const int threads = std::max(1, options.threads);
  if (threads == 1) {
    for (int i = 0; i < cloud.size(); ++i) {
      normals[i] = estimate_point(cloud, index, i, options);
    }
    return normals;
  }

  // Work queue by index; results land in their slot, so ordering is stable
  // for any thread count.
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::atomic<bool> failed{false};
  std::string error_message;
  std::mutex error_mutex;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= cloud.size() || failed.load()) return;
        try {
          normals[i] = estimate_point(cloud, index, i, options);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(error_mutex);
          failed.store(true);
          error_message = e.what();
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (failed.load()) throw Error("estimate: " + error_message);
  return normals;
}

}  // namespace normest
