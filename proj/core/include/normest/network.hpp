#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "normest/autodiff.hpp"
#include "normest/geometry.hpp"
#include "normest/jet.hpp"

namespace normest {

/// One dense layer; weight is (in x out), bias is (1 x out).
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::MatrixXd bias;
};

/// All trainable arrays, grouped per subnetwork. The widths describe hidden
/// layer sizes; final projection layers (quaternion head -> 4, weight head
/// -> 1, edge transform -> 1) are appended automatically.
struct ModelParams {
  int version = 1;
  std::vector<int> qst_point_widths{64, 128};
  std::vector<int> qst_head_widths{64};
  std::vector<int> feat_widths{64, 64, 128, 256};
  std::vector<int> head_widths{128, 64};
  std::vector<int> update_widths{32, 32};

  std::vector<DenseLayer> qst_point;  // per-point MLP feeding the pose head
  std::vector<DenseLayer> qst_head;   // pooled features -> quaternion offset
  std::vector<DenseLayer> feat;       // per-point feature MLP
  std::vector<DenseLayer> head;       // concat(point, global) -> weight logit
  std::vector<DenseLayer> update_f;   // per-point features for the update net
  DenseLayer update_r;                // edge feature difference -> scalar

  /// Hidden layers use uniform He-style fan-in init (+-sqrt(6/fan_in), zero
  /// bias). The three final projections start at zero, so a fresh model is
  /// exactly the classic jet estimator: identity pose, equal weights, zero
  /// point update.
  static ModelParams init(std::uint64_t seed);

  /// Sizes every layer stack (zero filled) from the current width fields.
  void allocate();
  /// allocate() + He init on hidden layers. With zero_final_layers the
  /// three projections stay zero (the training start); without, they are
  /// randomized too, which puts signal on every gradient path.
  void randomize(std::uint64_t seed, bool zero_final_layers = true);

  int feature_dim() const { return feat_widths.back(); }

  /// Visits every array in a fixed order with stable names such as
  /// "feat.2.weight"; the same order defines checkpoint layout, optimizer
  /// state slots, and gradient vectors.
  void for_each_array(
      const std::function<void(const std::string&, Eigen::MatrixXd&)>& fn);
  void for_each_array(const std::function<void(const std::string&,
                                               const Eigen::MatrixXd&)>& fn)
      const;
  int array_count() const;

  /// Throws InvalidInputError on non-finite values or inconsistent shapes.
  void validate() const;
};

/// Ranked subset of patch points chosen by learned weight.
struct Selection {
  int k = 0;
  std::vector<int> indices;  // into the patch, by descending weight
  Eigen::VectorXd weights;   // matching weights, descending
};

/// Parameter leaves bound onto a tape for one forward pass, in
/// for_each_array order.
struct ParamVars {
  std::vector<ad::Var> vars;    // aligned with names
  std::vector<std::string> names;

  // Structured views (weight, bias) per layer, same objects as `vars`.
  std::vector<std::pair<ad::Var, ad::Var>> qst_point, qst_head, feat, head,
      update_f;
  std::pair<ad::Var, ad::Var> update_r;
};

ParamVars bind_params(ad::Tape& tape, const ModelParams& params);

struct QstResult {
  ad::Var rotated;     // (r x 3) points in canonical pose
  ad::Var quaternion;  // (1 x 4) unit quaternion
  ad::Var rotation;    // (3 x 3)
  bool fallback = false;  // raw quaternion had ~zero norm, identity used
};

/// Quaternion spatial transformer: predicts a unit quaternion (identity
/// offset added before normalization) and rotates the patch by it.
QstResult qst_forward(ad::Tape& tape, const ParamVars& pv, ad::Var pts);

struct FeatureResult {
  ad::Var point_features;   // (r x d)
  ad::Var global_feature;   // (1 x d), coordinate-wise max over points
};

FeatureResult point_features(ad::Tape& tape, const ParamVars& pv,
                             ad::Var pts);

/// Per-point weight in (0, 1): sigmoid(h(F_j (+) G)).
ad::Var weight_head(ad::Tape& tape, const ParamVars& pv, ad::Var point_feats,
                    ad::Var global_feat);

/// Stable descending sort by weight (ties ascending index), keep the first k.
Selection top_k_select(const Eigen::VectorXd& weights, int k);

/// Learned displacement: for each point, the mean of edge vectors to its m
/// nearest in-set neighbors, each scaled by a learned scalar from the edge's
/// feature difference. Gradient flows through features and positions; the
/// neighbor choice itself is discrete.
ad::Var point_update(ad::Tape& tape, const ParamVars& pv, ad::Var pts, int m);

struct PipelineConfig {
  int k = 0;           // selection size
  int order = 3;       // jet order
  int m = 8;           // update-net neighborhood
  bool force_center_selected = false;
};

/// Everything one estimation produces; owns the tape so the caller can
/// attach losses and run backward. Vars stay valid as long as this lives.
struct ForwardResult {
  ad::Tape tape;
  ParamVars params;

  ad::Var normal_world;      // (3 x 1) unit normal in world frame
  ad::Var qst_rotation;      // (3 x 3)
  ad::Var weights_all;       // (r x 1) sigmoid outputs
  ad::Var selected_weights;  // (k x 1) by descending weight
  ad::Var updated_points;    // (k x 3) in the fitting frame
  ad::Var beta;              // (N_n x 1)

  Selection selection;
  JetModel jet;
  FitDiagnostics fit_diag;
  bool qst_fallback = false;
  Mat3 patch_rotation;  // constant patch-to-world rotation

  Vec3 normal() const { return Vec3(tape.value(normal_world)); }
};

/// Full estimation pass over one patch: canonical pose, features, weights,
/// top-k selection, point update on the selected subset, weighted jet fit,
/// normal extraction, rotation back to the world frame.
ForwardResult forward_pipeline(const ModelParams& params, const Patch& patch,
                               const PipelineConfig& config);

}  // namespace normest
