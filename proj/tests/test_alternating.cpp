#include <doctest.h>

#include <cmath>
#include <random>

#include "nearps/alternating.hpp"
#include "nearps/errors.hpp"
#include "nearps/integrator.hpp"
#include "support.hpp"

using namespace nearps;

TEST_CASE("classical photometric stereo") {
  std::mt19937_64 rng(8);
  const PixelMask mask = PixelMask::full(5, 4);
  Eigen::MatrixX3d s(6, 3);
  for (int i = 0; i < 6; ++i) s.row(i) = Vec3(test::uniform(rng, -0.5, 0.5), test::uniform(rng, -0.5, 0.5), -1.0).transpose();
  std::vector<Vec3> n(mask.size());
  Eigen::VectorXd rho(mask.size());
  Eigen::MatrixXd d(6, mask.size());
  for (int j = 0; j < mask.size(); ++j) {
    n[j] = Vec3(test::uniform(rng, -0.3, 0.3), test::uniform(rng, -0.3, 0.3), -1.0).normalized();
    rho[j] = test::uniform(rng, 0.2, 1.0);
    d.col(j) = rho[j] * (s * n[j]);
  }
  const ClassicalResult r = classical_ps(ImageStack(mask, {d}), s);
  for (int j = 0; j < mask.size(); ++j) {
    CHECK(r.albedo[j] == doctest::Approx(rho[j]).epsilon(1e-12));
    CHECK((r.normals.normals[j] - n[j]).norm() < 1e-12);
  }

  const ClassicalResult dark = classical_ps(ImageStack(mask, {Eigen::MatrixXd::Zero(6, mask.size())}), s);
  CHECK(dark.normals.degenerate[0] == 1);
  Eigen::MatrixX3d flat = s;
  flat.col(2).setZero();
  CHECK_THROWS_AS(classical_ps(ImageStack(mask, {d}), flat), NumericError);
  CHECK_THROWS_AS(classical_ps(ImageStack(mask, {d}), s.topRows(5)), DomainError);
}

TEST_CASE("frozen inversion at the true depth") {
  const auto s = test::small_scene();
  const ImageStack img = render(s.truth, s.rig, s.cam);
  const NormalField nf = normal_from_depth(s.cam, s.truth.zmap);
  const FrozenInversion inv = invert_frozen_lighting(img, s.rig, s.cam, s.truth.zmap);
  CHECK(inv.flagged_count() == 0);
  for (int j = 0; j < img.pixels(); ++j) {
    CHECK((inv.m[j] - s.truth.albedo[0][j] * nf.normals[j]).norm() < 1e-10);
  }

  SUBCASE("too few valid observations are flagged and keep the previous value") {
    ImageStack sparse = img;
    for (int i = 2; i < sparse.images(); ++i) sparse.set_valid(i, 0, false);
    const std::vector<Vec3> previous(img.pixels(), Vec3(1, 2, 3));
    const FrozenInversion r = invert_frozen_lighting(sparse, s.rig, s.cam, s.truth.zmap, previous);
    CHECK(r.flagged[0] == 1);
    CHECK(r.m[0] == Vec3(1, 2, 3));
    CHECK(r.flagged_count() == 1);
  }
}

TEST_CASE("scale estimation recovers the anchor depth") {
  const auto s = test::small_scene();
  const ImageStack img = render(s.truth, s.rig, s.cam);
  const NormalField nf = normal_from_depth(s.cam, s.truth.zmap);
  std::vector<Vec3> m(img.pixels());
  for (int j = 0; j < img.pixels(); ++j) m[j] = s.truth.albedo[0][j] * nf.normals[j];
  const int c = centroid_pixel(s.truth.zmap.mask);
  const Eigen::VectorXd relative = s.truth.zmap.values.array() - s.truth.zmap.values[c];
  const double w_true = std::exp(s.truth.zmap.values[c]);

  CHECK(energy_alternating(img, s.rig, s.cam, relative, m, w_true) < 1e-18);
  CHECK(energy_alternating(img, s.rig, s.cam, relative, m, 1.05 * w_true) > 1e-6);

  const ScaleEstimate e = estimate_scale(img, s.rig, s.cam, relative, m, {100.0, 3000.0, 1e-9, 41});
  CHECK(e.depth == doctest::Approx(w_true).epsilon(1e-6));
  CHECK(e.energy < 1e-12);
  // A bracket that excludes the minimum puts it on the boundary.
  CHECK_THROWS_AS(estimate_scale(img, s.rig, s.cam, relative, m, {100.0, 400.0, 1e-9, 41}), NumericError);
}

TEST_CASE("alternating solver bookkeeping") {
  const auto s = test::small_scene();
  const ImageStack img = render(s.truth, s.rig, s.cam);
  AlternatingConfig cfg;
  cfg.z0 = 700.0;
  cfg.k_max = 6;
  cfg.stop_rel = 0.0;
  const SurfaceEstimate r = solve_alternating(img, s.rig, s.cam, cfg);
  CHECK(r.iterations == 6);
  CHECK(r.energy_trace.size() == 7u);
  CHECK(r.wall_time.size() == r.energy_trace.size());
  for (double e : r.energy_trace) CHECK(std::isfinite(e));
  for (double v : r.zmap.values) CHECK(std::isfinite(v));
  CHECK(r.albedo.size() == 1u);
  CHECK(relative_depth_rmse(r.zmap, s.truth.zmap) < 0.1);

  cfg.k_max = 0;
  const SurfaceEstimate plane = solve_alternating(img, s.rig, s.cam, cfg);
  CHECK(plane.iterations == 0);
  CHECK(plane.zmap.values.cwiseAbs().maxCoeff() == doctest::Approx(std::log(700.0)));
  cfg.k_max = -1;
  CHECK_THROWS_AS(solve_alternating(img, s.rig, s.cam, cfg), DomainError);
  cfg.k_max = 3;
  cfg.z0 = 0.0;
  CHECK_THROWS_AS(solve_alternating(img, s.rig, s.cam, cfg), DomainError);
}
