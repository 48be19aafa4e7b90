#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "normest/evaluation.hpp"
#include "normest/io.hpp"
#include "test_helpers.hpp"

#ifndef NORMEST_CLI_PATH
#define NORMEST_CLI_PATH "normest"
#endif

using namespace normest;
using namespace normest::testing;

namespace {

namespace fs = std::filesystem;

struct CliDir {
  fs::path path;
  CliDir() {
    path = fs::temp_directory_path() / "normest_cli_test";
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~CliDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

int cli(const std::string& args) {
  const std::string cmd =
      std::string(NORMEST_CLI_PATH) + " " + args + " >/dev/null 2>/dev/null";
  return std::system(cmd.c_str());
}

}  // namespace

TEST_CASE("cli rejects unknown subcommands and flags") {
  CHECK(cli("frobnicate") != 0);
  CHECK(cli("estimate --no-such-flag 1") != 0);
  CHECK(cli("") != 0);  // a subcommand is required
}

TEST_CASE("cli estimate pca on a plane yields +-z normals") {
  CliDir tmp;
  {
    std::ofstream out(tmp.file("plane.xyz"));
    Rng rng(4);
    for (int i = 0; i < 400; ++i) {
      out << rng.uniform(-1, 1) << " " << rng.uniform(-1, 1) << " 0\n";
    }
  }
  REQUIRE(cli("estimate --in " + tmp.file("plane.xyz") +
              " --method pca --patch-size 64 --out " +
              tmp.file("plane.normals.est")) == 0);
  const auto normals = read_normals_file(tmp.file("plane.normals.est"));
  REQUIRE(normals.size() == 400);
  for (const Vec3& n : normals) {
    CHECK(std::abs(std::abs(n.z()) - 1.0) < 1e-9);
  }
}

TEST_CASE("cli dihedral jet errors concentrate at the crease") {
  CliDir tmp;
  REQUIRE(cli("synth --shape dihedral --angle 90 --noise 0 --count 6000"
              " --seed 3 --out " + tmp.file("d.xyz")) == 0);
  REQUIRE(cli("estimate --in " + tmp.file("d.xyz") +
              " --method jet --order 3 --patch-size 128 --out " +
              tmp.file("d.normals.est")) == 0);

  const PointCloud cloud = read_points(tmp.file("d.xyz"));
  const auto est = read_normals_file(tmp.file("d.normals.est"));
  REQUIRE(est.size() == cloud.points.size());

  // Counting oracle: mean error within 0.05 of the crease far exceeds the
  // mean error beyond 0.3 from it.
  double near_acc = 0, far_acc = 0;
  int near_n = 0, far_n = 0;
  for (int i = 0; i < cloud.size(); ++i) {
    const double dist = std::hypot(cloud.points[i].x(), cloud.points[i].z());
    const double err = unoriented_angle_error(est[i], cloud.gt_normals[i]);
    if (dist < 0.05) {
      near_acc += err;
      ++near_n;
    } else if (dist > 0.3) {
      far_acc += err;
      ++far_n;
    }
  }
  REQUIRE(near_n > 10);
  REQUIRE(far_n > 10);
  CHECK(near_acc / near_n > 5.0 * (far_acc / far_n + 1e-9));
  CHECK(near_acc / near_n > 1.0);

  // fit-debug on a crease point confirms the distorted surface export.
  int center = 0;
  double best = 1e9;
  for (int i = 0; i < cloud.size(); ++i) {
    const double dist = std::hypot(cloud.points[i].x(), cloud.points[i].z());
    if (dist < best) {
      best = dist;
      center = i;
    }
  }
  REQUIRE(cli("fit-debug --in " + tmp.file("d.xyz") + " --center " +
              std::to_string(center) +
              " --method jet --order 3 --patch-size 128 --grid 9 --out " +
              tmp.file("fd")) == 0);
  CHECK(fs::exists(tmp.file("fd.surface.csv")));
  CHECK(fs::exists(tmp.file("fd.selected.idx")));
  CHECK(fs::exists(tmp.file("fd.updated.xyz")));
  std::ifstream in(tmp.file("fd.surface.csv"));
  std::string header;
  std::getline(in, header);
  CHECK(header == "x,y,z");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 81);
}

TEST_CASE("cli eval with estimate equal to ground truth reports zero rmse") {
  CliDir tmp;
  REQUIRE(cli("synth --shape sphere --radius 1 --count 2000 --seed 7 --out " +
              tmp.file("s.xyz")) == 0);
  fs::copy_file(tmp.file("s.normals"), tmp.file("s.normals.est"));
  REQUIRE(cli("eval --cloud " + tmp.file("s.xyz") + " --est " +
              tmp.file("s.normals.est") + " --subset 500 --out " +
              tmp.file("report.csv")) == 0);
  std::ifstream in(tmp.file("report.csv"));
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(row.find(",0.000000,") != std::string::npos);  // rmse column
}

TEST_CASE("cli learned method with untrained checkpoint matches jet") {
  CliDir tmp;
  REQUIRE(cli("synth --shape quadric --count 1500 --seed 11 --sigma 0.005"
              " --out " + tmp.file("q.xyz")) == 0);
  REQUIRE(cli("estimate --in " + tmp.file("q.xyz") +
              " --method jet --order 3 --patch-size 64 --out " +
              tmp.file("jet.normals.est")) == 0);
  // k = patch size: the degenerate pipeline must reproduce the jet result.
  REQUIRE(cli("estimate --in " + tmp.file("q.xyz") +
              " --method learned --order 3 --patch-size 64 --k 64 --out " +
              tmp.file("learned.normals.est")) == 0);
  const auto jet = read_normals_file(tmp.file("jet.normals.est"));
  const auto learned = read_normals_file(tmp.file("learned.normals.est"));
  REQUIRE(jet.size() == learned.size());
  double worst = 0;
  for (std::size_t i = 0; i < jet.size(); ++i) {
    worst = std::max(worst, unoriented_angle_error(jet[i], learned[i]));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("cli config file supplies values and flags override") {
  CliDir tmp;
  {
    std::ofstream conf(tmp.file("synth.conf"));
    conf << "# synth settings\n"
         << "shape = sphere\n"
         << "radius = 2\n"
         << "count = 1000\n"
         << "seed = 5\n";
  }
  REQUIRE(cli("synth --config " + tmp.file("synth.conf") + " --out " +
              tmp.file("a.xyz")) == 0);
  const PointCloud a = read_points(tmp.file("a.xyz"));
  CHECK(a.size() == 1000);

  // flag overrides the config value
  REQUIRE(cli("synth --config " + tmp.file("synth.conf") +
              " --count 500 --out " + tmp.file("b.xyz")) == 0);
  CHECK(read_points(tmp.file("b.xyz")).size() == 500);

  {
    std::ofstream conf(tmp.file("bad.conf"));
    conf << "not_a_real_option = 1\n";
  }
  CHECK(cli("synth --config " + tmp.file("bad.conf") + " --out " +
            tmp.file("c.xyz")) != 0);
  CHECK_FALSE(fs::exists(tmp.file("c.xyz")));  // no partial output
}

TEST_CASE("cli invalid inputs exit nonzero without output files") {
  CliDir tmp;
  CHECK(cli("estimate --in /no/such/file.xyz --method jet --out " +
            tmp.file("x.normals.est")) != 0);
  CHECK_FALSE(fs::exists(tmp.file("x.normals.est")));

  CHECK(cli("synth --shape dihedral --angle 181 --out " +
            tmp.file("y.xyz")) != 0);
  CHECK_FALSE(fs::exists(tmp.file("y.xyz")));
}
