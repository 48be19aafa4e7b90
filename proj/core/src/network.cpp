#include "normest/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "normest/errors.hpp"
#include "normest/random.hpp"

namespace normest {

namespace {

DenseLayer zero_layer(int in, int out) {
  return {Eigen::MatrixXd::Zero(in, out), Eigen::MatrixXd::Zero(1, out)};
}

std::vector<DenseLayer> zero_stack(int in, const std::vector<int>& widths) {
  std::vector<DenseLayer> layers;
  for (int w : widths) {
    layers.push_back(zero_layer(in, w));
    in = w;
  }
  return layers;
}

void he_fill(DenseLayer& layer, Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(layer.weight.rows()));
  for (int i = 0; i < layer.weight.rows(); ++i) {
    for (int j = 0; j < layer.weight.cols(); ++j) {
      layer.weight(i, j) = rng.uniform(-limit, limit);
    }
  }
}

}  // namespace

void ModelParams::allocate() {
  qst_point = zero_stack(3, qst_point_widths);
  qst_head = zero_stack(qst_point_widths.back(), qst_head_widths);
  // Zero quaternion offset: the pose transform starts as the identity.
  qst_head.push_back(zero_layer(qst_head_widths.back(), 4));
  feat = zero_stack(3, feat_widths);
  head = zero_stack(2 * feature_dim(), head_widths);
  // Zero logit: every point starts at weight 0.5, i.e. a plain jet fit.
  head.push_back(zero_layer(head_widths.back(), 1));
  update_f = zero_stack(3, update_widths);
  // Zero edge transform: the update starts as the identity displacement.
  update_r = zero_layer(update_widths.back(), 1);
}

void ModelParams::randomize(std::uint64_t seed, bool zero_final_layers) {
  allocate();
  Rng root(seed);
  const auto fill_stack = [&](std::vector<DenseLayer>& layers, int tag,
                              bool skip_last) {
    Rng rng = root.substream(tag);
    const std::size_t last = layers.size() - (skip_last ? 1 : 0);
    for (std::size_t i = 0; i < last; ++i) he_fill(layers[i], rng);
  };
  fill_stack(qst_point, 1, false);
  fill_stack(qst_head, 2, zero_final_layers);
  fill_stack(feat, 3, false);
  fill_stack(head, 4, zero_final_layers);
  fill_stack(update_f, 5, false);
  if (!zero_final_layers) {
    Rng rng = root.substream(6);
    he_fill(update_r, rng);
    // Keep the edge transform small so displacements stay patch-scale.
    update_r.weight *= 0.3;
  }
}

ModelParams ModelParams::init(std::uint64_t seed) {
  ModelParams p;
  p.randomize(seed);
  return p;
}

namespace {

template <typename Self, typename Fn>
void visit_arrays(Self& self, const Fn& fn) {
  const auto group = [&](const char* prefix, auto& layers) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string base = std::string(prefix) + "." + std::to_string(i);
      fn(base + ".weight", layers[i].weight);
      fn(base + ".bias", layers[i].bias);
    }
  };
  group("qst.point", self.qst_point);
  group("qst.head", self.qst_head);
  group("feat", self.feat);
  group("head", self.head);
  group("update.f", self.update_f);
  fn("update.r.weight", self.update_r.weight);
  fn("update.r.bias", self.update_r.bias);
}

}  // namespace

void ModelParams::for_each_array(
    const std::function<void(const std::string&, Eigen::MatrixXd&)>& fn) {
  visit_arrays(*this, fn);
}

void ModelParams::for_each_array(
    const std::function<void(const std::string&, const Eigen::MatrixXd&)>& fn)
    const {
  visit_arrays(*this, fn);
}

int ModelParams::array_count() const {
  int n = 0;
  for_each_array(
      [&](const std::string&, const Eigen::MatrixXd&) { ++n; });
  return n;
}

void ModelParams::validate() const {
  const auto check_mlp = [](const std::string& name,
                            const std::vector<DenseLayer>& layers, int in,
                            int out_last) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.weight.rows() != in || l.bias.cols() != l.weight.cols() ||
          l.bias.rows() != 1) {
        throw InvalidInputError("model: inconsistent shapes in " + name +
                                " layer " + std::to_string(i));
      }
      if (!l.weight.allFinite() || !l.bias.allFinite()) {
        throw InvalidInputError("model: non-finite values in " + name);
      }
      in = static_cast<int>(l.weight.cols());
    }
    if (!layers.empty() && in != out_last) {
      throw InvalidInputError("model: " + name + " output width mismatch");
    }
  };
  check_mlp("qst.point", qst_point, 3, qst_point_widths.back());
  check_mlp("qst.head", qst_head, qst_point_widths.back(), 4);
  check_mlp("feat", feat, 3, feat_widths.back());
  check_mlp("head", head, 2 * feature_dim(), 1);
  check_mlp("update.f", update_f, 3, update_widths.back());
  check_mlp("update.r", {update_r}, update_widths.back(), 1);
}

ParamVars bind_params(ad::Tape& tape, const ModelParams& params) {
  ParamVars pv;
  const auto bind_group = [&](const std::vector<DenseLayer>& layers,
                              const char* prefix) {
    std::vector<std::pair<ad::Var, ad::Var>> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      ad::Var w = tape.input(layers[i].weight);
      ad::Var b = tape.input(layers[i].bias);
      const std::string base = std::string(prefix) + "." + std::to_string(i);
      pv.vars.push_back(w);
      pv.names.push_back(base + ".weight");
      pv.vars.push_back(b);
      pv.names.push_back(base + ".bias");
      out.emplace_back(w, b);
    }
    return out;
  };
  pv.qst_point = bind_group(params.qst_point, "qst.point");
  pv.qst_head = bind_group(params.qst_head, "qst.head");
  pv.feat = bind_group(params.feat, "feat");
  pv.head = bind_group(params.head, "head");
  pv.update_f = bind_group(params.update_f, "update.f");
  pv.update_r = {tape.input(params.update_r.weight),
                 tape.input(params.update_r.bias)};
  pv.vars.push_back(pv.update_r.first);
  pv.names.push_back("update.r.weight");
  pv.vars.push_back(pv.update_r.second);
  pv.names.push_back("update.r.bias");
  return pv;
}

namespace {

/// Dense stack with tanh on every layer except optionally the last.
ad::Var run_mlp(ad::Tape& tape,
                const std::vector<std::pair<ad::Var, ad::Var>>& layers,
                ad::Var x, bool linear_last) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = tape.add_row_broadcast(tape.matmul(x, layers[i].first),
                               layers[i].second);
    if (!linear_last || i + 1 < layers.size()) x = tape.tanh(x);
  }
  return x;
}

}  // namespace

QstResult qst_forward(ad::Tape& tape, const ParamVars& pv, ad::Var pts) {
  QstResult out;
  ad::Var h = run_mlp(tape, pv.qst_point, pts, /*linear_last=*/false);
  ad::Var pooled = tape.colwise_max(h);
  ad::Var offset = run_mlp(tape, pv.qst_head, pooled, /*linear_last=*/true);

  Eigen::MatrixXd identity(1, 4);
  identity << 1, 0, 0, 0;
  ad::Var raw = tape.add(offset, tape.constant(identity));
  if (tape.value(raw).norm() < 1e-12) {
    // Degenerate prediction; fall back to the identity pose.
    out.fallback = true;
    raw = tape.constant(identity);
  }
  out.quaternion = tape.normalize(raw);
  out.rotation = tape.quat_to_rotation(out.quaternion);
  // Row-vector points: p' = R p  <=>  row' = row R^T.
  out.rotated = tape.matmul(pts, tape.transpose(out.rotation));
  return out;
}

FeatureResult point_features(ad::Tape& tape, const ParamVars& pv,
                             ad::Var pts) {
  FeatureResult out;
  out.point_features = run_mlp(tape, pv.feat, pts, /*linear_last=*/false);
  out.global_feature = tape.colwise_max(out.point_features);
  return out;
}

ad::Var weight_head(ad::Tape& tape, const ParamVars& pv, ad::Var point_feats,
                    ad::Var global_feat) {
  const int r = static_cast<int>(tape.value(point_feats).rows());
  ad::Var x =
      tape.hstack(point_feats, tape.repeat_rows(global_feat, r));
  ad::Var logits = run_mlp(tape, pv.head, x, /*linear_last=*/true);
  return tape.sigmoid(logits);
}

Selection top_k_select(const Eigen::VectorXd& weights, int k) {
  const int r = static_cast<int>(weights.size());
  if (k < 1 || k > r) {
    throw InvalidInputError("top_k_select: k=" + std::to_string(k) +
                            " outside [1, " + std::to_string(r) + "]");
  }
  std::vector<int> order(r);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return weights[a] > weights[b] || (weights[a] == weights[b] && a < b);
  });
  Selection sel;
  sel.k = k;
  sel.indices.assign(order.begin(), order.begin() + k);
  sel.weights.resize(k);
  for (int i = 0; i < k; ++i) sel.weights[i] = weights[sel.indices[i]];
  return sel;
}

ad::Var point_update(ad::Tape& tape, const ParamVars& pv, ad::Var pts,
                     int m) {
  const Eigen::MatrixXd& p = tape.value(pts);
  const int k = static_cast<int>(p.rows());
  if (m < 1 || m >= k) {
    throw InvalidInputError("point_update: m=" + std::to_string(m) +
                            " must lie in [1, points-1]");
  }

  // m nearest neighbors of each point within the set, on current values.
  std::vector<int> nbr(static_cast<std::size_t>(k) * m);
  std::vector<std::pair<double, int>> cand(k - 1);
  for (int j = 0; j < k; ++j) {
    int c = 0;
    for (int s = 0; s < k; ++s) {
      if (s == j) continue;
      cand[c++] = {(p.row(s) - p.row(j)).squaredNorm(), s};
    }
    std::partial_sort(cand.begin(), cand.begin() + m, cand.end());
    for (int s = 0; s < m; ++s) nbr[j * m + s] = cand[s].second;
  }
  std::vector<int> self(static_cast<std::size_t>(k) * m);
  for (int j = 0; j < k; ++j) {
    std::fill(self.begin() + j * m, self.begin() + (j + 1) * m, j);
  }

  ad::Var feats = run_mlp(tape, pv.update_f, pts, /*linear_last=*/false);
  ad::Var feat_diff = tape.sub(tape.gather_rows(feats, nbr),
                               tape.gather_rows(feats, self));
  ad::Var edge_scale = tape.add_row_broadcast(
      tape.matmul(feat_diff, pv.update_r.first), pv.update_r.second);
  ad::Var edges =
      tape.sub(tape.gather_rows(pts, nbr), tape.gather_rows(pts, self));
  ad::Var delta =
      tape.group_mean_rows(tape.col_broadcast_mul(edges, edge_scale), m);
  return tape.add(pts, delta);
}

ForwardResult forward_pipeline(const ModelParams& params, const Patch& patch,
                               const PipelineConfig& config) {
  const int r = patch.size();
  if (config.k < 1 || config.k > r) {
    throw InvalidInputError("forward_pipeline: k=" +
                            std::to_string(config.k) + " outside [1, r=" +
                            std::to_string(r) + "]");
  }

  ForwardResult out;
  out.params = bind_params(out.tape, params);
  out.patch_rotation = patch.to_world_rotation;
  ad::Tape& tape = out.tape;

  ad::Var pts = tape.constant(patch.local_points);
  QstResult qst = qst_forward(tape, out.params, pts);
  out.qst_rotation = qst.rotation;
  out.qst_fallback = qst.fallback;

  FeatureResult feats = point_features(tape, out.params, qst.rotated);
  out.weights_all =
      weight_head(tape, out.params, feats.point_features,
                  feats.global_feature);

  out.selection =
      top_k_select(tape.value(out.weights_all).col(0), config.k);
  if (config.force_center_selected) {
    auto& idx = out.selection.indices;
    if (std::find(idx.begin(), idx.end(), 0) == idx.end()) {
      idx.back() = 0;  // replace the weakest selected point by the center
      const Eigen::VectorXd& w = tape.value(out.weights_all).col(0);
      std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return w[a] > w[b] || (w[a] == w[b] && a < b);
      });
      for (int i = 0; i < out.selection.k; ++i) {
        out.selection.weights[i] = w[idx[i]];
      }
    }
  }

  ad::Var sel_pts = tape.gather_rows(qst.rotated, out.selection.indices);
  out.selected_weights =
      tape.gather_rows(out.weights_all, out.selection.indices);

  out.updated_points =
      point_update(tape, out.params, sel_pts, config.m);
  out.beta = tape.wls_solve(out.updated_points, out.selected_weights,
                            config.order, &out.fit_diag);
  out.jet.order = config.order;
  out.jet.beta = tape.value(out.beta).col(0);

  ad::Var normal_fit = tape.normal_from_beta(out.beta);
  // Undo the QST rotation, then map through the patch alignment.
  ad::Var normal_local =
      tape.matmul(tape.transpose(qst.rotation), normal_fit);
  out.normal_world = tape.matmul(
      tape.constant(Eigen::MatrixXd(patch.to_world_rotation)), normal_local);
  return out;
}

}  // namespace normest
