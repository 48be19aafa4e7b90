#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "normest/errors.hpp"
#include "normest/io.hpp"
#include "test_helpers.hpp"

using namespace normest;
using namespace normest::testing;

namespace {
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() / "normest_io_test";
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};
}  // namespace

TEST_CASE("read_points basics") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("a.xyz"));
    out << "0 0 0\n1 0 0\n";
  }
  const PointCloud cloud = read_points(tmp.file("a.xyz"));
  CHECK(cloud.size() == 2);
  CHECK(cloud.points[1] == Vec3(1, 0, 0));
  CHECK_FALSE(cloud.has_normals());
  CHECK(cloud.name == "a");
}

TEST_CASE("read_points parse errors name the line") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("bad.xyz"));
    out << "1 2\n";
  }
  try {
    read_points(tmp.file("bad.xyz"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }

  {
    std::ofstream out(tmp.file("bad2.xyz"));
    out << "1 2 3\nx y z\n";
  }
  try {
    read_points(tmp.file("bad2.xyz"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("companion normals load and are validated") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("c.xyz"));
    out << "0 0 0\n1 0 0\n";
    std::ofstream n(tmp.file("c.normals"));
    n << "0 0 1\n0.9999999 0 0\n";  // within 1e-3 of unit, renormalized
  }
  const PointCloud cloud = read_points(tmp.file("c.xyz"));
  REQUIRE(cloud.has_normals());
  CHECK(std::abs(cloud.gt_normals[1].norm() - 1.0) < 1e-12);

  {
    std::ofstream n(tmp.file("c.normals"));
    n << "0 0 2\n0 0 1\n";  // far from unit: rejected
  }
  CHECK_THROWS_AS(read_points(tmp.file("c.xyz")), InvalidInputError);

  {
    std::ofstream n(tmp.file("c.normals"));
    n << "0 0 1\n";  // count mismatch
  }
  CHECK_THROWS_AS(read_points(tmp.file("c.xyz")), InvalidInputError);
}

TEST_CASE("write/read round trip") {
  TempDir tmp;
  Rng rng(3);
  PointCloud cloud = random_cloud(100, rng, 3.0);
  write_points(tmp.file("rt.xyz"), cloud);
  const PointCloud loaded = read_points(tmp.file("rt.xyz"));
  REQUIRE(loaded.size() == cloud.size());
  for (int i = 0; i < cloud.size(); ++i) {
    CHECK((loaded.points[i] - cloud.points[i]).norm() < 1e-6);
  }

  std::vector<Vec3> normals;
  for (int i = 0; i < 50; ++i) {
    normals.push_back(
        Vec3(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1))
            .normalized());
  }
  write_normals(tmp.file("rt.normals"), normals);
  const auto loaded_n = read_normals_file(tmp.file("rt.normals"));
  REQUIRE(loaded_n.size() == normals.size());
  for (std::size_t i = 0; i < normals.size(); ++i) {
    CHECK((loaded_n[i] - normals[i]).norm() < 1e-6);
  }
}

TEST_CASE("write_normals of empty sequence gives an empty file") {
  TempDir tmp;
  write_normals(tmp.file("empty.normals"), {});
  CHECK(std::filesystem::file_size(tmp.file("empty.normals")) == 0);
}

TEST_CASE("index file round trip") {
  TempDir tmp;
  const std::vector<int> idx{0, 5, 17, 4999};
  write_index_file(tmp.file("s.idx"), idx);
  CHECK(read_index_file(tmp.file("s.idx")) == idx);
}

TEST_CASE("config file parsing") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("run.conf"));
    out << "# comment line\n"
        << "order = 3\n"
        << "k=50   # trailing comment\n"
        << "\n"
        << "sigma = 0.006\n";
  }
  const auto pairs = read_config_file(tmp.file("run.conf"));
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0] == std::pair<std::string, std::string>{"order", "3"});
  CHECK(pairs[1] == std::pair<std::string, std::string>{"k", "50"});
  CHECK(pairs[2] == std::pair<std::string, std::string>{"sigma", "0.006"});

  {
    std::ofstream out(tmp.file("bad.conf"));
    out << "this line has no equals\n";
  }
  CHECK_THROWS_AS(read_config_file(tmp.file("bad.conf")), ParseError);
}

TEST_CASE("loss trace format") {
  TempDir tmp;
  write_loss_trace(tmp.file("trace.csv"), {{0, 0.5}, {1, 0.25}});
  std::ifstream in(tmp.file("trace.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,mean_loss");
  std::getline(in, line);
  CHECK(line == "0,0.5");
  std::getline(in, line);
  CHECK(line == "1,0.25");
}

TEST_CASE("unwritable output paths raise IoError") {
  CHECK_THROWS_AS(write_points("/nonexistent_dir_zz/x.xyz", PointCloud{}),
                  IoError);
  CHECK_THROWS_AS(write_normals("/nonexistent_dir_zz/x.normals", {}),
                  IoError);
}
