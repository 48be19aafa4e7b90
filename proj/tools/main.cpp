// normest command line: synthetic data, normal estimation, training,
// evaluation, fit inspection and gradient verification.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#include "normest/errors.hpp"
#include "normest/estimators.hpp"
#include "normest/evaluation.hpp"
#include "normest/io.hpp"
#include "normest/jet.hpp"
#include "normest/random.hpp"
#include "normest/synth.hpp"
#include "normest/training.hpp"

namespace {

using namespace normest;

struct SynthOpts {
  std::string shape = "quadric";
  std::vector<double> coeffs;
  double radius = 1.0;
  double angle = 90.0;
  int count = 10000;
  double sigma = 0.0;
  std::string density = "none";
  std::uint64_t seed = 0;
  std::string out;
  std::string corpus_dir;
};

ShapeSpec make_shape_spec(const SynthOpts& o) {
  ShapeSpec spec;
  spec.count = o.count;
  spec.seed = o.seed;
  if (o.shape == "quadric") {
    spec.kind = ShapeKind::QuadricHeightField;
    spec.parameters = o.coeffs.empty()
                          ? std::vector<double>{0, 0, 0, 0.5, -0.3, 0.2}
                          : o.coeffs;
  } else if (o.shape == "sphere") {
    spec.kind = ShapeKind::Sphere;
    spec.parameters = {o.radius};
  } else if (o.shape == "dihedral") {
    spec.kind = ShapeKind::DihedralEdge;
    spec.parameters = {o.angle};
  } else {
    throw InvalidInputError("synth: unknown shape '" + o.shape + "'");
  }
  return spec;
}

PointCloud synth_one(const SynthOpts& o) {
  PointCloud cloud = gen_shape(make_shape_spec(o));
  if (o.sigma > 0) cloud = add_gaussian_noise(cloud, o.sigma, o.seed + 1);
  cloud = apply_density(cloud, density_mode_from_string(o.density), o.seed + 2);
  return cloud;
}

void write_cloud_pair(const std::string& path, const PointCloud& cloud) {
  write_points(path, cloud);
  if (cloud.has_normals()) {
    write_normals(normals_path_for(path), cloud.gt_normals);
  }
}

/// Desk-scale corpus: 8 training shapes and 4 test shapes, each in the
/// clean version plus the three noise levels and the two density modes.
void synth_corpus(const SynthOpts& o) {
  namespace fs = std::filesystem;
  const fs::path root(o.corpus_dir);
  fs::create_directories(root / "train");
  fs::create_directories(root / "test");

  struct Item {
    const char* split;
    std::string name;
    ShapeSpec spec;
  };
  std::vector<Item> items;
  Rng rng(o.seed);
  int id = 0;
  const auto add = [&](const char* split, ShapeKind kind,
                       std::vector<double> params) {
    ShapeSpec spec;
    spec.kind = kind;
    spec.parameters = std::move(params);
    spec.count = o.count;
    spec.seed = o.seed * 1000 + id;
    items.push_back({split, to_string(kind) + std::to_string(id), spec});
    ++id;
  };
  const auto random_quadric = [&] {
    std::vector<double> c(jet_term_count(2));
    for (double& v : c) v = rng.uniform(-0.6, 0.6);
    c[0] = 0.0;
    return c;
  };
  for (int i = 0; i < 4; ++i) {
    add("train", ShapeKind::QuadricHeightField, random_quadric());
  }
  add("train", ShapeKind::Sphere, {1.0});
  add("train", ShapeKind::Sphere, {2.5});
  add("train", ShapeKind::DihedralEdge, {90.0});
  add("train", ShapeKind::DihedralEdge, {135.0});
  add("test", ShapeKind::QuadricHeightField, random_quadric());
  add("test", ShapeKind::Sphere, {1.5});
  add("test", ShapeKind::DihedralEdge, {60.0});
  add("test", ShapeKind::DihedralEdge, {120.0});

  const double sigmas[] = {0.00125, 0.006, 0.012};
  for (const Item& item : items) {
    const PointCloud clean = gen_shape(item.spec);
    const fs::path dir = root / item.split;
    write_cloud_pair((dir / (item.name + ".xyz")).string(), clean);
    for (double s : sigmas) {
      char label[32];
      std::snprintf(label, sizeof label, "%g", s);
      const PointCloud noisy =
          add_gaussian_noise(clean, s, item.spec.seed + 17);
      write_cloud_pair(
          (dir / (item.name + "_noise" + label + ".xyz")).string(), noisy);
    }
    for (DensityMode mode : {DensityMode::Gradient, DensityMode::Stripes}) {
      const PointCloud thinned =
          apply_density(clean, mode, item.spec.seed + 29);
      write_cloud_pair(
          (dir / (item.name + "_" + to_string(mode) + ".xyz")).string(),
          thinned);
    }
  }
  std::printf("corpus: %zu shapes x 6 variants under %s\n", items.size(),
              root.string().c_str());
}

int run_synth(const SynthOpts& o) {
  if (!o.corpus_dir.empty()) {
    synth_corpus(o);
    return 0;
  }
  if (o.out.empty()) {
    throw InvalidInputError("synth: --out (or --corpus) is required");
  }
  const PointCloud cloud = synth_one(o);
  write_cloud_pair(o.out, cloud);
  std::printf("wrote %d points to %s\n", cloud.size(), o.out.c_str());
  return 0;
}

struct EstimateOpts {
  std::string in;
  std::string method = "jet";
  int patch_size = 256;
  int order = 3;
  int k = -1;
  int m = 8;
  int threads = 0;  // 0: machine parallelism
  std::string checkpoint;
  std::string out;
};

int run_estimate(const EstimateOpts& o) {
  PointCloud cloud = read_points(o.in);
  EstimatorOptions opt;
  opt.method = method_from_string(o.method);
  opt.patch_size = o.patch_size;
  opt.order = o.order;
  opt.k = o.k;
  opt.m = o.m;
  opt.threads = o.threads > 0
                    ? o.threads
                    : std::max(1u, std::thread::hardware_concurrency());

  ModelParams params;
  if (opt.method == Method::Learned) {
    if (!o.checkpoint.empty()) {
      Checkpoint ck = load_checkpoint(o.checkpoint);
      params = std::move(ck.params);
      // The checkpoint records its training geometry; flags still override.
      if (o.k < 0) opt.k = ck.config.k;
    } else {
      params = ModelParams::init(0);  // untrained: the jet baseline
    }
    opt.params = &params;
  }

  const std::vector<Vec3> normals = estimate_normals(cloud, opt);
  write_normals(o.out, normals);
  std::printf("estimated %zu normals (%s) -> %s\n", normals.size(),
              o.method.c_str(), o.out.c_str());
  return 0;
}

struct TrainOpts {
  std::vector<std::string> data;
  int patches_per_shape = 250;
  TrainConfig config;
  std::string out;
  std::string trace;
};

std::vector<std::string> expand_cloud_files(
    const std::vector<std::string>& inputs) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  for (const std::string& input : inputs) {
    if (fs::is_directory(input)) {
      std::vector<std::string> found;
      for (const auto& entry : fs::directory_iterator(input)) {
        if (entry.path().extension() == ".xyz") {
          found.push_back(entry.path().string());
        }
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(input);
    }
  }
  if (files.empty()) throw InvalidInputError("train: no cloud files found");
  return files;
}

std::vector<TrainSample> sample_patches(const std::vector<std::string>& files,
                                        int patches_per_shape, int r,
                                        std::uint64_t seed) {
  std::vector<TrainSample> corpus;
  Rng rng = Rng(seed).substream(0xC0);
  for (const std::string& file : files) {
    const PointCloud cloud = read_points(file);
    if (!cloud.has_normals()) {
      throw InvalidInputError("train: '" + file + "' has no .normals file");
    }
    cloud.validate();
    if (cloud.size() < r) {
      throw InvalidInputError("train: '" + file + "' has fewer points than r");
    }
    const KnnIndex index(cloud);
    for (int i = 0; i < patches_per_shape; ++i) {
      const int center = static_cast<int>(rng.integer(cloud.size()));
      corpus.push_back({extract_patch(cloud, index, center, r),
                        cloud.gt_normals[center]});
    }
  }
  return corpus;
}

int run_train(const TrainOpts& o) {
  const auto files = expand_cloud_files(o.data);
  const std::vector<TrainSample> corpus = sample_patches(
      files, o.patches_per_shape, o.config.r, o.config.seed);
  std::printf("training on %zu patches from %zu clouds\n", corpus.size(),
              files.size());
  const TrainResult result = train(o.config, corpus);
  save_checkpoint(o.out, result.checkpoint);
  if (!o.trace.empty()) write_loss_trace(o.trace, result.trace);
  if (!result.trace.empty()) {
    std::printf("epoch 0 loss %.6f -> epoch %d loss %.6f\n",
                result.trace.front().mean_loss, result.trace.back().epoch,
                result.trace.back().mean_loss);
  }
  std::printf("checkpoint -> %s\n", o.out.c_str());
  return 0;
}

struct EvalOpts {
  std::vector<std::string> clouds;
  std::vector<std::string> estimates;
  std::vector<std::string> categories;
  std::vector<std::string> idx_files;
  int subset = 5000;
  std::uint64_t seed = 0;
  std::string out;
  std::string heatmap;
  std::string heatmap_format = "csv";
};

int run_eval(const EvalOpts& o) {
  if (o.clouds.size() != o.estimates.size()) {
    throw InvalidInputError("eval: need one --est per --cloud");
  }
  if (!o.categories.empty() && o.categories.size() != o.clouds.size()) {
    throw InvalidInputError("eval: --category count mismatch");
  }
  if (!o.idx_files.empty() && o.idx_files.size() != o.clouds.size()) {
    throw InvalidInputError("eval: --idx count mismatch");
  }

  std::vector<EvalReport> reports;
  for (std::size_t i = 0; i < o.clouds.size(); ++i) {
    const PointCloud cloud = read_points(o.clouds[i]);
    if (!cloud.has_normals()) {
      throw InvalidInputError("eval: '" + o.clouds[i] +
                              "' has no ground-truth normals");
    }
    const std::vector<Vec3> est = read_normals_file(o.estimates[i]);
    if (est.size() != cloud.points.size()) {
      throw InvalidInputError("eval: estimate count mismatch for '" +
                              o.clouds[i] + "'");
    }
    std::optional<std::vector<int>> fixed;
    if (!o.idx_files.empty() && !o.idx_files[i].empty()) {
      fixed = read_index_file(o.idx_files[i]);
    }
    EvalReport report = evaluate_cloud(
        cloud, [&](int idx) { return est[idx]; }, o.subset, o.seed,
        fixed ? &*fixed : nullptr);
    report.category = o.categories.empty()
                          ? std::filesystem::path(o.clouds[i]).stem().string()
                          : o.categories[i];
    std::printf("%-24s rmse %7.3f deg  pgp5 %6.2f  pgp10 %6.2f  (%zu pts)\n",
                report.category.c_str(), report.rmse, report.pgp.at(5.0),
                report.pgp.at(10.0), report.per_point_errors.size());
    if (!o.heatmap.empty() && i == 0) {
      export_heatmap(cloud, report, o.heatmap,
                     o.heatmap_format == "ply" ? HeatmapFormat::Ply
                                               : HeatmapFormat::Csv);
    }
    reports.push_back(std::move(report));
  }
  const CategoryTable table = aggregate_categories(reports);
  if (!o.out.empty()) write_category_table(o.out, table);
  std::printf("%-24s rmse %7.3f deg\n", "average", table.average.rmse);
  return 0;
}

struct FitDebugOpts {
  std::string in;
  int center = 0;
  std::string method = "jet";
  int patch_size = 256;
  int order = 3;
  int k = -1;
  int m = 8;
  std::string checkpoint;
  int grid = 21;
  std::string out_prefix;
};

int run_fit_debug(const FitDebugOpts& o) {
  const PointCloud cloud = read_points(o.in);
  const KnnIndex index(cloud);
  if (o.center < 0 || o.center >= cloud.size()) {
    throw InvalidInputError("fit-debug: center index out of range");
  }
  const Patch patch = extract_patch(cloud, index, o.center, o.patch_size);

  JetModel jet;
  std::vector<int> selected;
  Points fit_points;
  const Method method = method_from_string(o.method);
  if (method == Method::Learned) {
    ModelParams params = o.checkpoint.empty()
                             ? ModelParams::init(0)
                             : load_checkpoint(o.checkpoint).params;
    PipelineConfig pc;
    pc.k = o.k > 0 ? o.k : default_selection_size(o.patch_size, o.order);
    pc.order = o.order;
    pc.m = o.m;
    ForwardResult fwd = forward_pipeline(params, patch, pc);
    jet = fwd.jet;
    selected = fwd.selection.indices;
    fit_points = fwd.tape.value(fwd.updated_points);
    const Vec3 n = fwd.normal();
    std::printf("normal %.6f %.6f %.6f\n", n.x(), n.y(), n.z());
  } else if (method == Method::Jet) {
    auto [model, diag] = ls_fit(patch.local_points, o.order);
    jet = std::move(model);
    selected.resize(patch.size());
    for (int i = 0; i < patch.size(); ++i) selected[i] = i;
    fit_points = patch.local_points;
    const Vec3 n = patch.to_world_direction(normal_from_beta(jet));
    std::printf("normal %.6f %.6f %.6f\n", n.x(), n.y(), n.z());
  } else {
    throw InvalidInputError("fit-debug: method must be jet or learned");
  }

  // Patch-frame indices -> cloud indices for the selection export.
  std::vector<int> cloud_indices(selected.size());
  for (std::size_t i = 0; i < selected.size(); ++i) {
    cloud_indices[i] = patch.neighbor_indices[selected[i]];
  }
  write_index_file(o.out_prefix + ".selected.idx", cloud_indices);

  PointCloud updated;
  updated.points.reserve(fit_points.rows());
  for (int i = 0; i < fit_points.rows(); ++i) {
    updated.points.push_back(fit_points.row(i).transpose());
  }
  write_points(o.out_prefix + ".updated.xyz", updated);

  // Fitted surface heights over the unit square of the fitting frame.
  std::FILE* f = std::fopen((o.out_prefix + ".surface.csv").c_str(), "w");
  if (!f) throw IoError("fit-debug: cannot write surface file");
  std::fprintf(f, "x,y,z\n");
  PointsXY xy(1, 2);
  for (int i = 0; i < o.grid; ++i) {
    for (int j = 0; j < o.grid; ++j) {
      xy(0, 0) = -1.0 + 2.0 * i / (o.grid - 1);
      xy(0, 1) = -1.0 + 2.0 * j / (o.grid - 1);
      const double z = evaluate_jet(jet, xy)[0];
      std::fprintf(f, "%.12g,%.12g,%.12g\n", xy(0, 0), xy(0, 1), z);
    }
  }
  std::fclose(f);
  std::printf("fit-debug -> %s.{selected.idx,updated.xyz,surface.csv}\n",
              o.out_prefix.c_str());
  return 0;
}

struct GradCheckCliOpts {
  int r = 32;
  int k = 16;
  int order = 2;
  int m = 4;
  int trials = 5;
  double tolerance = 1e-4;
  std::uint64_t seed = 1;
};

int run_gradcheck(const GradCheckCliOpts& o) {
  Rng rng(o.seed);
  double worst = 0.0;
  for (int trial = 0; trial < o.trials; ++trial) {
    // A curved noisy patch; active parameters so every path carries signal.
    ShapeSpec spec;
    spec.kind = ShapeKind::QuadricHeightField;
    spec.parameters = {0, 0.1, -0.1, rng.uniform(-0.5, 0.5),
                       rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
    spec.count = 4 * o.r;
    spec.seed = o.seed + 100 + trial;
    PointCloud cloud = gen_shape(spec);
    PointCloud noisy = add_gaussian_noise(cloud, 0.005, spec.seed + 1);
    noisy.gt_normals = cloud.gt_normals;
    const KnnIndex index(noisy);
    const int center = static_cast<int>(rng.integer(noisy.size()));
    const Patch patch = extract_patch(noisy, index, center, o.r);

    ModelParams params;
    params.randomize(o.seed + trial, /*zero_final_layers=*/false);
    PipelineConfig pc{o.k, o.order, o.m, false};
    const GradCheckReport report =
        grad_check(params, patch, noisy.gt_normals[center], pc);
    worst = std::max(worst, report.max_rel_error);
    std::printf("patch %d: max relative error %.3e\n", trial,
                report.max_rel_error);
  }
  std::printf("gradcheck %s (worst %.3e, tolerance %.1e)\n",
              worst <= o.tolerance ? "PASS" : "FAIL", worst, o.tolerance);
  return worst <= o.tolerance ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-cloud normal estimation by learned weighted jet fitting"};
  app.require_subcommand(1);

  SynthOpts synth_opts;
  CLI::App* synth = app.add_subcommand("synth", "Generate synthetic clouds");
  synth->add_option("--shape", synth_opts.shape, "quadric | sphere | dihedral");
  synth->add_option("--coeffs", synth_opts.coeffs,
                    "jet coefficients for quadric shapes");
  synth->add_option("--radius", synth_opts.radius, "sphere radius");
  synth->add_option("--angle", synth_opts.angle, "dihedral angle, degrees");
  synth->add_option("--count", synth_opts.count, "points per shape");
  synth->add_option("--sigma,--noise", synth_opts.sigma,
                    "noise std, fraction of bbox diagonal");
  synth->add_option("--density", synth_opts.density,
                    "none | gradient | stripes");
  synth->add_option("--seed", synth_opts.seed, "RNG seed");
  synth->add_option("--out", synth_opts.out, "output .xyz path");
  synth->add_option("--corpus", synth_opts.corpus_dir,
                    "generate the desk-scale train/test corpus here");
  synth->set_config("--config");
  synth->allow_config_extras(false);

  EstimateOpts est_opts;
  CLI::App* estimate =
      app.add_subcommand("estimate", "Estimate per-point normals");
  estimate->add_option("--in", est_opts.in, "input .xyz cloud")->required();
  estimate->add_option("--method", est_opts.method, "pca | jet | learned");
  estimate->add_option("--patch-size", est_opts.patch_size, "neighbors r");
  estimate->add_option("--order", est_opts.order, "jet order 1-4");
  estimate->add_option("--k", est_opts.k, "selection size (learned)");
  estimate->add_option("--m", est_opts.m, "update neighborhood (learned)");
  estimate->add_option("--threads", est_opts.threads,
                       "worker threads (0 = machine parallelism)");
  estimate->add_option("--checkpoint", est_opts.checkpoint,
                       "trained checkpoint (learned)");
  estimate->add_option("--out", est_opts.out, "output .normals path")
      ->required();
  estimate->set_config("--config");
  estimate->allow_config_extras(false);

  TrainOpts train_opts;
  CLI::App* train_cmd =
      app.add_subcommand("train", "Train the weight network");
  train_cmd->add_option("--data", train_opts.data,
                        "cloud files or directories with .xyz/.normals")
      ->required();
  train_cmd->add_option("--patches-per-shape", train_opts.patches_per_shape,
                        "training patches sampled per cloud");
  train_cmd->add_option("--epochs", train_opts.config.epochs, "epochs")
      ->required();
  train_cmd->add_option("--batch-size", train_opts.config.batch_size,
                        "mini-batch size");
  train_cmd->add_option("--lr", train_opts.config.learning_rate,
                        "learning rate");
  train_cmd->add_option("--alpha1", train_opts.config.alpha1,
                        "neighbor loss weight");
  train_cmd->add_option("--alpha2", train_opts.config.alpha2,
                        "regularizer weight");
  train_cmd->add_option("--k", train_opts.config.k, "selection size");
  train_cmd->add_option("--patch-size", train_opts.config.r, "neighbors r");
  train_cmd->add_option("--order", train_opts.config.order, "jet order");
  train_cmd->add_option("--m", train_opts.config.m, "update neighborhood");
  train_cmd->add_option("--seed", train_opts.config.seed, "RNG seed");
  train_cmd->add_option("--out", train_opts.out, "checkpoint path")
      ->required();
  train_cmd->add_option("--trace", train_opts.trace, "loss trace CSV path");
  train_cmd->set_config("--config");
  train_cmd->allow_config_extras(false);

  EvalOpts eval_opts;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Evaluate estimated normals against truth");
  eval_cmd->add_option("--cloud", eval_opts.clouds,
                       "cloud .xyz (repeatable; needs .normals)")
      ->required();
  eval_cmd->add_option("--est", eval_opts.estimates,
                       "estimated .normals (one per cloud)")
      ->required();
  eval_cmd->add_option("--category", eval_opts.categories,
                       "category label per cloud");
  eval_cmd->add_option("--idx", eval_opts.idx_files,
                       "evaluation subset file per cloud");
  eval_cmd->add_option("--subset", eval_opts.subset, "evaluation subset size");
  eval_cmd->add_option("--seed", eval_opts.seed, "subset sampling seed");
  eval_cmd->add_option("--out", eval_opts.out, "report CSV path");
  eval_cmd->add_option("--heatmap", eval_opts.heatmap,
                       "per-point error export (first cloud)");
  eval_cmd->add_option("--heatmap-format", eval_opts.heatmap_format,
                       "csv | ply");
  eval_cmd->set_config("--config");
  eval_cmd->allow_config_extras(false);

  FitDebugOpts fit_opts;
  CLI::App* fit_debug =
      app.add_subcommand("fit-debug", "Inspect one patch's surface fit");
  fit_debug->add_option("--in", fit_opts.in, "input .xyz cloud")->required();
  fit_debug->add_option("--center", fit_opts.center, "query point index");
  fit_debug->add_option("--method", fit_opts.method, "jet | learned");
  fit_debug->add_option("--patch-size", fit_opts.patch_size, "neighbors r");
  fit_debug->add_option("--order", fit_opts.order, "jet order");
  fit_debug->add_option("--k", fit_opts.k, "selection size (learned)");
  fit_debug->add_option("--m", fit_opts.m, "update neighborhood");
  fit_debug->add_option("--checkpoint", fit_opts.checkpoint,
                        "trained checkpoint");
  fit_debug->add_option("--grid", fit_opts.grid, "surface grid resolution");
  fit_debug->add_option("--out", fit_opts.out_prefix, "output prefix")
      ->required();
  fit_debug->set_config("--config");
  fit_debug->allow_config_extras(false);

  GradCheckCliOpts gc_opts;
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "Verify gradients against finite differences");
  gradcheck->add_option("--r", gc_opts.r, "patch size");
  gradcheck->add_option("--k", gc_opts.k, "selection size");
  gradcheck->add_option("--order", gc_opts.order, "jet order");
  gradcheck->add_option("--m", gc_opts.m, "update neighborhood");
  gradcheck->add_option("--trials", gc_opts.trials, "number of patches");
  gradcheck->add_option("--tolerance", gc_opts.tolerance,
                        "max relative error");
  gradcheck->add_option("--seed", gc_opts.seed, "RNG seed");
  gradcheck->set_config("--config");
  gradcheck->allow_config_extras(false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth(synth_opts);
    if (estimate->parsed()) return run_estimate(est_opts);
    if (train_cmd->parsed()) return run_train(train_opts);
    if (eval_cmd->parsed()) return run_eval(eval_opts);
    if (fit_debug->parsed()) return run_fit_debug(fit_opts);
    if (gradcheck->parsed()) return run_gradcheck(gc_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
