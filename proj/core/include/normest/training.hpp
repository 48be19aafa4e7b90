#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "normest/network.hpp"

namespace normest {

struct TrainConfig {
  int batch_size = 48;
  double learning_rate = 1e-3;
  int epochs = 0;
  double alpha1 = 1.0;   // neighbor-consistency weight
  double alpha2 = 0.1;   // transform-regularizer weight
  int k = 50;            // selection size
  int r = 256;           // patch size
  int order = 3;         // jet order
  int m = 8;             // update-net neighborhood
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidInputError
};

struct TrainSample {
  Patch patch;
  Vec3 gt_normal;  // world frame, unit
};

struct Checkpoint {
  ModelParams params;
  TrainConfig config;
  int epoch = 0;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochStats> trace;
};

// --- loss values (reference forms; the tape versions must agree) ---

/// Sin loss |N_gt x N_est|; blind to the normal's sign. Non-unit inputs are
/// normalized first.
double loss_center_value(const Vec3& estimated, const Vec3& gt);

/// (1/k) [ -sum log w~_j + sum w~_j |N_gt x N_j| ] with weights clamped to
/// [1e-5, 1 - 1e-7].
double loss_neighbors_value(const Eigen::VectorXd& selected_weights,
                            const Vec3& gt_normal,
                            const Points& neighbor_normals);

/// Frobenius norm of (I - A A^T).
double loss_reg_value(const Mat3& a);

double loss_total_value(double center, double neighbors, double reg,
                        double alpha1, double alpha2);

// --- tape-level loss assembly ---

struct LossVars {
  ad::Var center;
  ad::Var neighbors;
  ad::Var reg;
  ad::Var total;
};

/// Builds the full training loss on the forward pass's tape. `gt_normal` is
/// the world-frame ground truth for the patch center.
LossVars build_loss(ForwardResult& fwd, const Vec3& gt_normal, double alpha1,
                    double alpha2);

/// Adaptive-moment SGD over mini-batches; deterministic under a fixed seed.
/// Throws Error naming the epoch/batch if the loss turns non-finite.
TrainResult train(const TrainConfig& config,
                  const std::vector<TrainSample>& corpus);

// --- gradient verification ---

struct GradCheckOptions {
  double step = 1e-5;          // central-difference step
  int entries_per_array = 6;   // sampled entries per parameter array
  std::uint64_t seed = 7;      // entry-sampling seed
  double alpha1 = 1.0;
  double alpha2 = 0.1;
};

struct GradCheckReport {
  struct ArrayResult {
    std::string name;
    double max_rel_error = 0.0;
  };
  std::vector<ArrayResult> arrays;
  double max_rel_error = 0.0;

  bool passes(double tolerance) const { return max_rel_error <= tolerance; }
};

/// Compares reverse-mode gradients of the total loss against central finite
/// differences on a sampled set of entries in every parameter array.
/// Relative error uses max(|a|, |b|, 1e-3) as the denominator.
GradCheckReport grad_check(const ModelParams& params, const Patch& patch,
                           const Vec3& gt_normal,
                           const PipelineConfig& config,
                           const GradCheckOptions& options = {});

}  // namespace normest
