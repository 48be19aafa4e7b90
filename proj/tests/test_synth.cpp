#include <doctest.h>

#include <cmath>

#include "normest/errors.hpp"
#include "normest/synth.hpp"
#include "test_helpers.hpp"

using namespace normest;
using namespace normest::testing;

TEST_CASE("shape spec validation") {
  ShapeSpec spec;
  spec.count = 4;  // below minimum
  spec.parameters = {0, 0, 0};
  CHECK_THROWS_AS(gen_shape(spec), InvalidInputError);

  spec.count = 100;
  spec.kind = ShapeKind::Sphere;
  spec.parameters = {-1.0};
  CHECK_THROWS_AS(gen_shape(spec), InvalidInputError);

  spec.kind = ShapeKind::DihedralEdge;
  spec.parameters = {180.0};
  CHECK_THROWS_AS(gen_shape(spec), InvalidInputError);

  spec.kind = ShapeKind::QuadricHeightField;
  spec.parameters = {1.0, 2.0};  // 2 is not a jet term count
  CHECK_THROWS_AS(gen_shape(spec), InvalidInputError);
}

TEST_CASE("flat quadric has constant +z normals") {
  ShapeSpec spec;
  spec.kind = ShapeKind::QuadricHeightField;
  spec.parameters = {0, 0, 0};  // plane z = 0
  spec.count = 64;
  spec.seed = 1;
  const PointCloud cloud = gen_shape(spec);
  REQUIRE(cloud.size() == 64);
  for (const Vec3& n : cloud.gt_normals) {
    CHECK((n - Vec3(0, 0, 1)).norm() < 1e-15);
  }
}

TEST_CASE("unit sphere normal equals position") {
  ShapeSpec spec;
  spec.kind = ShapeKind::Sphere;
  spec.parameters = {1.0};
  spec.count = 128;
  spec.seed = 5;
  const PointCloud cloud = gen_shape(spec);
  for (int i = 0; i < cloud.size(); ++i) {
    CHECK((cloud.points[i] - cloud.gt_normals[i]).norm() < 1e-12);
  }
}

TEST_CASE("saddle quadric normals are analytic") {
  // z = x^2 - y^2: normal(x, y) = normalize(-2x, 2y, 1)
  ShapeSpec spec;
  spec.kind = ShapeKind::QuadricHeightField;
  spec.parameters = {0, 0, 0, 1, 0, -1};
  spec.count = 200;
  spec.seed = 3;
  const PointCloud cloud = gen_shape(spec);
  for (int i = 0; i < cloud.size(); ++i) {
    const double x = cloud.points[i].x(), y = cloud.points[i].y();
    CHECK(std::abs(cloud.points[i].z() - (x * x - y * y)) < 1e-12);
    const Vec3 expected = Vec3(-2 * x, 2 * y, 1).normalized();
    CHECK((cloud.gt_normals[i] - expected).norm() < 1e-12);
  }
}

TEST_CASE("generated normals are unit and generation is deterministic") {
  for (ShapeKind kind : {ShapeKind::QuadricHeightField, ShapeKind::Sphere,
                         ShapeKind::DihedralEdge}) {
    ShapeSpec spec;
    spec.kind = kind;
    spec.parameters = kind == ShapeKind::QuadricHeightField
                          ? std::vector<double>{0.1, -0.2, 0.3, 0.4, 0.5, -0.6}
                          : std::vector<double>{kind == ShapeKind::Sphere
                                                    ? 2.0
                                                    : 90.0};
    spec.count = 256;
    spec.seed = 11;
    const PointCloud a = gen_shape(spec);
    const PointCloud b = gen_shape(spec);
    REQUIRE(a.size() == 256);
    for (int i = 0; i < a.size(); ++i) {
      CHECK(std::abs(a.gt_normals[i].norm() - 1.0) < 1e-9);
      CHECK(a.points[i] == b.points[i]);  // bit-identical
      CHECK(a.gt_normals[i] == b.gt_normals[i]);
    }
  }
}

TEST_CASE("dihedral normals come from exactly two planes") {
  ShapeSpec spec;
  spec.kind = ShapeKind::DihedralEdge;
  spec.parameters = {120.0};
  spec.count = 500;
  spec.seed = 2;
  const PointCloud cloud = gen_shape(spec);

  const double half = 0.5 * 120.0 * 3.14159265358979323846 / 180.0;
  const Vec3 na(-std::cos(half), 0, std::sin(half));
  const Vec3 nb(std::cos(half), 0, std::sin(half));
  for (int i = 0; i < cloud.size(); ++i) {
    const double da = (cloud.gt_normals[i] - na).norm();
    const double db = (cloud.gt_normals[i] - nb).norm();
    CHECK((da == 0.0 || db == 0.0));
  }
}

TEST_CASE("gaussian noise statistics") {
  ShapeSpec spec;
  spec.kind = ShapeKind::QuadricHeightField;
  spec.parameters = {0, 0, 0};
  spec.count = 100000;
  spec.seed = 7;
  const PointCloud clean = gen_shape(spec);

  SUBCASE("zero sigma is identity") {
    const PointCloud same = add_gaussian_noise(clean, 0.0, 99);
    for (int i = 0; i < clean.size(); ++i) {
      CHECK(same.points[i] == clean.points[i]);
    }
  }

  SUBCASE("per-axis displacement std within 10%") {
    const double diag = bounding_box_diagonal(clean);
    for (double sigma_rel : {0.00125, 0.006, 0.012}) {
      const PointCloud noisy = add_gaussian_noise(clean, sigma_rel, 31);
      REQUIRE(noisy.size() == clean.size());
      for (int axis = 0; axis < 3; ++axis) {
        double acc = 0.0;
        for (int i = 0; i < clean.size(); ++i) {
          const double d = noisy.points[i][axis] - clean.points[i][axis];
          acc += d * d;
        }
        const double sd = std::sqrt(acc / clean.size());
        CHECK(sd == doctest::Approx(sigma_rel * diag).epsilon(0.10));
      }
    }
  }

  SUBCASE("deterministic under fixed seed") {
    const PointCloud a = add_gaussian_noise(clean, 0.006, 13);
    const PointCloud b = add_gaussian_noise(clean, 0.006, 13);
    for (int i = 0; i < a.size(); ++i) CHECK(a.points[i] == b.points[i]);
  }

  SUBCASE("normals carried over unchanged") {
    const PointCloud noisy = add_gaussian_noise(clean, 0.01, 77);
    for (int i = 0; i < clean.size(); ++i) {
      CHECK(noisy.gt_normals[i] == clean.gt_normals[i]);
    }
  }
}

TEST_CASE("density modes") {
  ShapeSpec spec;
  spec.kind = ShapeKind::QuadricHeightField;
  spec.parameters = {0, 0, 0};
  spec.count = 100000;
  spec.seed = 19;
  const PointCloud uniform = gen_shape(spec);

  SUBCASE("none is identity") {
    const PointCloud same = apply_density(uniform, DensityMode::None, 1);
    CHECK(same.size() == uniform.size());
  }

  SUBCASE("gradient keeps ~10x more on the left") {
    const PointCloud thinned =
        apply_density(uniform, DensityMode::Gradient, 23);
    CHECK(thinned.size() < uniform.size());
    CHECK(thinned.gt_normals.size() == thinned.points.size());
    // Count kept points in the left and right x deciles.
    const auto decile_count = [&](const PointCloud& c, bool left) {
      int count = 0;
      for (const Vec3& p : c.points) {
        const double u = (p.x() + 1.0) / 2.0;
        if (left ? u < 0.1 : u > 0.9) ++count;
      }
      return count;
    };
    const double ratio =
        static_cast<double>(decile_count(thinned, true)) /
        static_cast<double>(decile_count(thinned, false));
    // Mean keep probability is 0.955 on the left decile, 0.145 on the right.
    const double expected = 0.955 / 0.145;
    CHECK(ratio == doctest::Approx(expected).epsilon(0.20));
  }

  SUBCASE("stripes form 10 alternating bands") {
    const PointCloud striped =
        apply_density(uniform, DensityMode::Stripes, 29);
    int counts[10] = {0};
    for (const Vec3& p : striped.points) {
      const int band =
          std::min(9, static_cast<int>((p.x() + 1.0) / 2.0 * 10.0));
      ++counts[band];
    }
    // Even bands keep everything (~10k per band), odd bands ~1k.
    for (int b = 0; b < 10; ++b) {
      if (b % 2 == 0) {
        CHECK(counts[b] > 8000);
      } else {
        CHECK(counts[b] < 2000);
        CHECK(counts[b] > 300);
      }
    }
  }

  SUBCASE("deterministic under fixed seed") {
    const PointCloud a = apply_density(uniform, DensityMode::Stripes, 5);
    const PointCloud b = apply_density(uniform, DensityMode::Stripes, 5);
    REQUIRE(a.size() == b.size());
    for (int i = 0; i < a.size(); ++i) CHECK(a.points[i] == b.points[i]);
  }
}
