#include <doctest.h>

#include <cmath>
#include <random>

#include "nearps/camera.hpp"
#include "nearps/errors.hpp"
#include "support.hpp"

using namespace nearps;

static CameraIntrinsics cam_at_origin(double f, int w = 64, int h = 64) {
  return CameraIntrinsics(f, Vec2(0.0, 0.0), w, h);
}

TEST_CASE("backproject on the optical axis and along a 45 degree ray") {
  const CameraIntrinsics cam = cam_at_origin(1000.0);
  CHECK((backproject(cam, {0, 0}, 700) - Vec3(0, 0, 700)).norm() == 0.0);
  CHECK((backproject(cam, {1000, 0}, 1000) - Vec3(1000, 0, 1000)).norm() == 0.0);

  const double f = 35.0 * (7360.0 / 36.0);
  const CameraIntrinsics big = cam_at_origin(f, 7360, 4912);
  const Vec3 x = backproject(big, {100, -50}, 500);
  CHECK(x.x() == doctest::Approx(500.0 * 100.0 / f).epsilon(1e-15));
  CHECK(x.y() == doctest::Approx(500.0 * -50.0 / f).epsilon(1e-15));
  CHECK(x.z() == doctest::Approx(500.0).epsilon(1e-15));
}

TEST_CASE("backproject rejects non-positive depth") {
  const CameraIntrinsics cam = cam_at_origin(100.0);
  CHECK_THROWS_AS(backproject(cam, {1, 2}, 0.0), DomainError);
  CHECK_THROWS_AS(backproject(cam, {1, 2}, -3.0), DomainError);
}

TEST_CASE("camera invariants") {
  CHECK_THROWS_AS(CameraIntrinsics(0.0, Vec2(1, 1), 4, 4), DomainError);
  CHECK_THROWS_AS(CameraIntrinsics(10.0, Vec2(5, 1), 4, 4), DomainError);
  CHECK_THROWS_AS(CameraIntrinsics(10.0, Vec2(1, 1), 0, 4), DomainError);
  CHECK(CameraIntrinsics::focal_from_mm(35.0, 36.0, 7360) == doctest::Approx(35.0 * 7360 / 36.0));
}

TEST_CASE("homogeneous pixel and projection round trip") {
  CHECK((homogeneous_pixel(cam_at_origin(1.0), {0, 0}) - Vec3(0, 0, 1)).norm() == 0.0);
  CHECK((homogeneous_pixel(cam_at_origin(5.0), {3, 4}) - Vec3(3, 4, 5)).norm() == 0.0);

  std::mt19937_64 rng(11);
  const CameraIntrinsics cam = cam_at_origin(420.0);
  for (int k = 0; k < 200; ++k) {
    const Vec2 p(test::uniform(rng, -300, 300), test::uniform(rng, -300, 300));
    const double z = test::uniform(rng, 10, 2000);
    const Vec3 x = backproject(cam, p, z);
    CHECK((x - (z / cam.f()) * homogeneous_pixel(cam, p)).norm() <= 1e-12 * x.norm());
    CHECK((project(cam, x) - p).norm() <= 1e-12 * std::max(1.0, p.norm()));
  }
}

TEST_CASE("q matrix") {
  const Mat3 q0 = q_matrix(cam_at_origin(7.0), {0, 0});
  CHECK((q0 - Vec3(7, 7, 1).asDiagonal().toDenseMatrix()).norm() == 0.0);
  Mat3 expected;
  expected << 1, 0, -2, 0, 1, -3, 0, 0, 1;
  CHECK((q_matrix(cam_at_origin(1.0), {2, 3}) - expected).norm() == 0.0);

  // Q^T [g; -1] = [f g; -1 - p.g], expanded by hand.
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    const double f = test::uniform(rng, 10, 1000);
    const Vec2 p(test::uniform(rng, -50, 50), test::uniform(rng, -50, 50));
    const Vec2 g(test::uniform(rng, -0.1, 0.1), test::uniform(rng, -0.1, 0.1));
    const Vec3 lhs = q_matrix(cam_at_origin(f), p).transpose() * Vec3(g.x(), g.y(), -1.0);
    const Vec3 rhs(f * g.x(), f * g.y(), -1.0 - p.x() * g.x() - p.y() * g.y());
    CHECK((lhs - rhs).norm() <= 1e-12 * rhs.norm());
  }
}

TEST_CASE("mask indexing") {
  std::vector<std::uint8_t> inside{1, 0, 1,
                                   1, 1, 0};
  const PixelMask mask(3, 2, inside);
  CHECK(mask.size() == 4);
  CHECK(mask.index(1, 0) == -1);
  for (int j = 0; j < mask.size(); ++j) CHECK(mask.index(mask.col(j), mask.row(j)) == j);
  CHECK(mask.right(mask.index(0, 1)) == mask.index(1, 1));
  CHECK(mask.right(mask.index(1, 1)) == -1);
  CHECK(mask.down(mask.index(0, 0)) == mask.index(0, 1));
  CHECK(mask.down(mask.index(2, 0)) == -1);
  CHECK(mask.connected_components().size() == 2);
  CHECK(mask.raster() == inside);
}

TEST_CASE("gradient operator") {
  const CameraIntrinsics cam(1.0, Vec2(0, 0), 8, 8);
  const PixelMask mask = PixelMask::full(8, 8);
  const GradientOperator G(mask);
  CHECK(G.matrix().rows() == 2 * mask.size());

  SUBCASE("constant field") {
    const Eigen::Matrix2Xd g = G.apply(Eigen::VectorXd::Constant(mask.size(), 3.5));
    CHECK(g.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("affine field") {
    Eigen::VectorXd v(mask.size());
    for (int j = 0; j < mask.size(); ++j) v[j] = 0.7 * mask.col(j) - 1.3 * mask.row(j);
    const Eigen::Matrix2Xd g = G.apply(v);
    for (int j = 0; j < mask.size(); ++j) {
      if (mask.right(j) >= 0) {
        CHECK(g(0, j) == doctest::Approx(0.7));
      } else {
        CHECK(g(0, j) == 0.0);
      }
      if (mask.down(j) >= 0) {
        CHECK(g(1, j) == doctest::Approx(-1.3));
      } else {
        CHECK(g(1, j) == 0.0);
      }
    }
  }
  SUBCASE("adjoint against the dense matrix") {
    std::mt19937_64 rng(5);
    Eigen::VectorXd x(mask.size());
    Eigen::Matrix2Xd y(2, mask.size());
    for (int j = 0; j < mask.size(); ++j) {
      x[j] = test::uniform(rng, -1, 1);
      y(0, j) = test::uniform(rng, -1, 1);
      y(1, j) = test::uniform(rng, -1, 1);
    }
    const Eigen::MatrixXd dense = Eigen::MatrixXd(G.matrix());
    const double lhs = (G.apply(x).array() * y.array()).sum();
    const double rhs = x.dot(G.apply_transpose(y));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    CHECK((dense.transpose() * GradientOperator::stack(y) - G.apply_transpose(y)).norm() < 1e-12);
    for (int r = 0; r < dense.rows(); ++r) CHECK((dense.row(r).array() != 0.0).count() <= 2);
  }
}

TEST_CASE("normal from depth: planes") {
  const CameraIntrinsics cam(100.0, Vec2(16, 16), 32, 32);
  const PixelMask mask = PixelMask::full(32, 32);
  const NormalField flat = normal_from_depth(cam, LogDepthMap::constant(mask, 500.0));
  for (const Vec3& n : flat.normals) CHECK((n - Vec3(0, 0, -1)).norm() < 1e-15);

  // Plane z = z0 + a x in scene coordinates: on the ray x = z u / f, so
  // z = z0 / (1 - a u / f); its normal is (a, 0, -1) / |(a, 0, -1)|.
  const double a = 0.3;
  const double z0 = 600.0;
  Eigen::VectorXd v(mask.size());
  for (int j = 0; j < mask.size(); ++j) {
    const Vec2 p = pixel_of(cam, mask, j);
    v[j] = std::log(z0 / (1.0 - a * p.x() / cam.f()));
  }
  const NormalField slanted = normal_from_depth(cam, LogDepthMap(mask, v));
  const Vec3 expected = Vec3(a, 0, -1).normalized();
  for (int j = 0; j < mask.size(); ++j) {
    if (mask.right(j) < 0) continue;
    // Forward differences of a curved z(u) differ from the tangent at first order.
    CHECK((slanted.normals[j] - expected).norm() < 5e-3);
  }
}

TEST_CASE("normal field is unit length and scale invariant") {
  const auto s = test::small_scene(32, 90.0);
  const NormalField n1 = normal_from_depth(s.cam, s.truth.zmap);
  for (const Vec3& n : n1.normals) CHECK(std::abs(n.norm() - 1.0) < 1e-12);
  for (const Vec3& n : n1.normals) CHECK(n.z() < 0.0);
  for (double kappa : {0.5, 2.0}) {
    const LogDepthMap scaled(s.truth.zmap.mask, s.truth.zmap.values.array() + std::log(kappa));
    const NormalField n2 = normal_from_depth(s.cam, scaled);
    for (int j = 0; j < s.truth.zmap.mask.size(); ++j) {
      CHECK((n1.normals[j] - n2.normals[j]).norm() < 1e-10);
    }
  }
}

TEST_CASE("gradient from normal") {
  const CameraIntrinsics cam(1.0, Vec2(0, 0), 1, 1);
  const PixelMask one = PixelMask::full(1, 1);
  NormalField nf{one, {Vec3(0, 0, -1)}, {0}};
  CHECK(gradient_from_normal(cam, nf).cwiseAbs().maxCoeff() == 0.0);
  nf.normals[0] = Vec3(1, 0, -1).normalized();
  const Eigen::Matrix2Xd g = gradient_from_normal(cam, nf);
  CHECK(g(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g(1, 0) == doctest::Approx(0.0));

  nf.normals[0] = Vec3(1, 0, 0);
  CHECK_THROWS_AS(gradient_from_normal(cam, nf), DomainError);
}

TEST_CASE("normal and gradient round trip on a smooth surface") {
  const auto s = test::small_scene(64, 180.0);
  const GradientOperator G(s.truth.zmap.mask);
  const NormalField nf = normal_from_depth(s.cam, s.truth.zmap);
  const Eigen::Matrix2Xd g = gradient_from_normal(s.cam, nf);
  CHECK((g - G.apply(s.truth.zmap.values)).cwiseAbs().maxCoeff() < 1e-6);
}
