#include "normest/training.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "normest/errors.hpp"
#include "normest/random.hpp"

namespace normest {

namespace {
constexpr double kWeightClampLo = 1e-5;
constexpr double kWeightClampHi = 1.0 - 1e-7;
}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidInputError("train: batch_size must be >= 1");
  if (learning_rate <= 0) throw InvalidInputError("train: learning rate <= 0");
  if (epochs < 0) throw InvalidInputError("train: negative epochs");
  if (alpha1 < 0 || alpha2 < 0) {
    throw InvalidInputError("train: loss weights must be nonnegative");
  }
  if (k < jet_term_count(order)) {
    throw InvalidInputError("train: k must be >= jet term count " +
                            std::to_string(jet_term_count(order)));
  }
  if (k > r) throw InvalidInputError("train: k must be <= r");
  if (m < 1 || m >= k) throw InvalidInputError("train: m must lie in [1, k-1]");
}

double loss_center_value(const Vec3& estimated, const Vec3& gt) {
  return estimated.normalized().cross(gt.normalized()).norm();
}

double loss_neighbors_value(const Eigen::VectorXd& selected_weights,
                            const Vec3& gt_normal,
                            const Points& neighbor_normals) {
  const int k = static_cast<int>(selected_weights.size());
  if (k == 0 || neighbor_normals.rows() != k) {
    throw InvalidInputError("loss_neighbors: k weights and k normals required");
  }
  const Vec3 gt = gt_normal.normalized();
  double acc = 0.0;
  for (int j = 0; j < k; ++j) {
    const double w = std::clamp(selected_weights[j], kWeightClampLo,
                                kWeightClampHi);
    const Vec3 nj = neighbor_normals.row(j).transpose();
    acc += -std::log(w) + w * gt.cross(nj).norm();
  }
  return acc / k;
}

double loss_reg_value(const Mat3& a) {
  return (Mat3::Identity() - a * a.transpose()).norm();
}

double loss_total_value(double center, double neighbors, double reg,
                        double alpha1, double alpha2) {
  return center + alpha1 * neighbors + alpha2 * reg;
}

LossVars build_loss(ForwardResult& fwd, const Vec3& gt_normal, double alpha1,
                    double alpha2) {
  ad::Tape& tape = fwd.tape;
  const Vec3 gt = gt_normal.normalized();

  LossVars out;
  out.center = tape.norm(
      tape.cross3(tape.constant(Eigen::MatrixXd(gt)), fwd.normal_world));

  // Neighbor normals of the fitted jet at the selected points, compared with
  // the ground truth rotated into the fitting frame (cross norms are
  // rotation invariant, so the frame choice only has to be consistent).
  ad::Var gt_local = tape.matmul(
      fwd.qst_rotation,
      tape.constant(Eigen::MatrixXd(fwd.patch_rotation.transpose() * gt)));
  ad::Var grads =
      tape.jet_gradients(fwd.updated_points, fwd.beta, fwd.jet.order);
  ad::Var neighbor_n = tape.normals_from_gradients(grads);
  ad::Var errs = tape.rowwise_norm(tape.rowwise_cross(neighbor_n, gt_local));

  ad::Var w = tape.clamp(fwd.selected_weights, kWeightClampLo, kWeightClampHi);
  const double inv_k = 1.0 / static_cast<double>(fwd.selection.k);
  ad::Var neg_log = tape.scale(tape.sum(tape.log(w)), -1.0);
  ad::Var consistency = tape.sum(tape.mul(w, errs));
  out.neighbors = tape.scale(tape.add(neg_log, consistency), inv_k);

  out.reg = tape.norm(
      tape.sub(tape.constant(Eigen::MatrixXd(Mat3::Identity())),
               tape.matmul(fwd.qst_rotation,
                           tape.transpose(fwd.qst_rotation))));

  out.total = tape.add(out.center,
                       tape.add(tape.scale(out.neighbors, alpha1),
                                tape.scale(out.reg, alpha2)));
  return out;
}

namespace {

/// Adam state per parameter array, slots aligned with for_each_array order.
struct AdamState {
  std::vector<Eigen::MatrixXd> m, v;
  long step = 0;
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  explicit AdamState(ModelParams& params) {
    params.for_each_array([&](const std::string&, Eigen::MatrixXd& a) {
      m.push_back(Eigen::MatrixXd::Zero(a.rows(), a.cols()));
      v.push_back(Eigen::MatrixXd::Zero(a.rows(), a.cols()));
    });
  }

  void update(ModelParams& params, const std::vector<Eigen::MatrixXd>& grads,
              double lr) {
    ++step;
    const double bc1 = 1.0 - std::pow(kBeta1, step);
    const double bc2 = 1.0 - std::pow(kBeta2, step);
    int slot = 0;
    params.for_each_array([&](const std::string&, Eigen::MatrixXd& a) {
      const Eigen::MatrixXd& g = grads[slot];
      m[slot] = kBeta1 * m[slot] + (1.0 - kBeta1) * g;
      v[slot] = kBeta2 * v[slot] + (1.0 - kBeta2) * g.cwiseProduct(g);
      const Eigen::ArrayXXd mhat = m[slot].array() / bc1;
      const Eigen::ArrayXXd vhat = v[slot].array() / bc2;
      a.array() -= lr * mhat / (vhat.sqrt() + kEpsilon);
      ++slot;
    });
  }
};

double run_sample(const ModelParams& params, const TrainSample& sample,
                  const TrainConfig& config,
                  std::vector<Eigen::MatrixXd>* grad_accum) {
  PipelineConfig pc{config.k, config.order, config.m, false};
  ForwardResult fwd = forward_pipeline(params, sample.patch, pc);
  LossVars loss =
      build_loss(fwd, sample.gt_normal, config.alpha1, config.alpha2);
  const double total = fwd.tape.scalar(loss.total);
  if (grad_accum) {
    fwd.tape.backward(loss.total);
    for (std::size_t i = 0; i < fwd.params.vars.size(); ++i) {
      (*grad_accum)[i] += fwd.tape.grad(fwd.params.vars[i]);
    }
  }
  return total;
}

}  // namespace

TrainResult train(const TrainConfig& config,
                  const std::vector<TrainSample>& corpus) {
  config.validate();
  if (corpus.empty()) throw InvalidInputError("train: empty corpus");
  for (const TrainSample& s : corpus) {
    if (s.patch.size() < config.k) {
      throw InvalidInputError("train: sample patch smaller than k");
    }
  }

  TrainResult result;
  result.checkpoint.config = config;
  // Parameter init and epoch shuffling draw from isolated seed streams.
  result.checkpoint.params =
      ModelParams::init(config.seed ^ 0xA5A55A5Au);
  ModelParams& params = result.checkpoint.params;
  AdamState adam(params);
  Rng shuffle_root = Rng(config.seed).substream(0x5851);

  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Eigen::MatrixXd> grads;
  params.for_each_array([&](const std::string&, Eigen::MatrixXd& a) {
    grads.push_back(Eigen::MatrixXd::Zero(a.rows(), a.cols()));
  });

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle = shuffle_root.substream(epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle.integer(i)]);
    }

    double epoch_loss = 0.0;
    const int batches =
        (static_cast<int>(corpus.size()) + config.batch_size - 1) /
        config.batch_size;
    for (int b = 0; b < batches; ++b) {
      const int begin = b * config.batch_size;
      const int end = std::min<int>(begin + config.batch_size,
                                    static_cast<int>(corpus.size()));
      for (auto& g : grads) g.setZero();
      double batch_loss = 0.0;
      for (int i = begin; i < end; ++i) {
        batch_loss += run_sample(params, corpus[order[i]], config, &grads);
      }
      const double inv = 1.0 / (end - begin);
      batch_loss *= inv;
      if (!std::isfinite(batch_loss)) {
        throw Error("train: non-finite loss in epoch " +
                    std::to_string(epoch) + ", batch " + std::to_string(b));
      }
      for (auto& g : grads) g *= inv;
      adam.update(params, grads, config.learning_rate);
      epoch_loss += batch_loss * (end - begin);
    }
    result.trace.push_back(
        {epoch, epoch_loss / static_cast<double>(corpus.size())});
    result.checkpoint.epoch = epoch + 1;
  }
  return result;
}

GradCheckReport grad_check(const ModelParams& params, const Patch& patch,
                           const Vec3& gt_normal,
                           const PipelineConfig& config,
                           const GradCheckOptions& options) {
  // Reverse-mode gradients of the total loss.
  ModelParams work = params;
  PipelineConfig pc = config;
  ForwardResult fwd = forward_pipeline(work, patch, pc);
  LossVars loss = build_loss(fwd, gt_normal, options.alpha1, options.alpha2);
  fwd.tape.backward(loss.total);
  std::vector<Eigen::MatrixXd> analytic;
  for (ad::Var v : fwd.params.vars) analytic.push_back(fwd.tape.grad(v));

  const auto loss_at = [&](const ModelParams& p) {
    ForwardResult f = forward_pipeline(p, patch, pc);
    LossVars l = build_loss(f, gt_normal, options.alpha1, options.alpha2);
    return f.tape.scalar(l.total);
  };

  GradCheckReport report;
  Rng rng(options.seed);
  int slot = 0;
  work.for_each_array([&](const std::string& name, Eigen::MatrixXd& a) {
    GradCheckReport::ArrayResult res;
    res.name = name;
    const int total = static_cast<int>(a.size());
    const int samples = std::min(options.entries_per_array, total);
    for (int s = 0; s < samples; ++s) {
      // Spread deterministic probes across the array.
      const int idx = total <= options.entries_per_array
                          ? s
                          : static_cast<int>(rng.integer(total));
      const double saved = a.data()[idx];
      a.data()[idx] = saved + options.step;
      const double up = loss_at(work);
      a.data()[idx] = saved - options.step;
      const double down = loss_at(work);
      a.data()[idx] = saved;

      const double fd = (up - down) / (2.0 * options.step);
      const double an = analytic[slot].data()[idx];
      const double rel = std::abs(an - fd) /
                         std::max({std::abs(an), std::abs(fd), 1e-3});
      res.max_rel_error = std::max(res.max_rel_error, rel);
    }
    report.max_rel_error = std::max(report.max_rel_error, res.max_rel_error);
    report.arrays.push_back(std::move(res));
    ++slot;
  });
  return report;
}

}  // namespace normest
