#include <doctest.h>

#include <cmath>
#include <random>

#include "nearps/arls.hpp"
#include "nearps/errors.hpp"
#include "support.hpp"

using namespace nearps;

namespace {

ArlsState true_state(const test::SmallScene& s) {
  const Eigen::VectorXd d = normalization(s.cam, s.truth.zmap);
  return {s.truth.zmap, {s.truth.albedo[0].cwiseQuotient(d)}};
}

ArlsConfig cauchy_clamp() {
  ArlsConfig cfg;
  cfg.estimator = Estimator::cauchy(0.1);
  cfg.shadow = ShadowOperator::positive_part();
  return cfg;
}

}  // namespace

TEST_CASE("zeta is the unnormalized shading") {
  const auto s = test::small_scene();
  const NormalField nf = normal_from_depth(s.cam, s.truth.zmap);
  const Eigen::VectorXd d = normalization(s.cam, s.truth.zmap);
  const Eigen::MatrixXd z = zeta_field(s.rig, s.cam, s.truth.zmap);
  for (int j = 0; j < s.truth.zmap.mask.size(); ++j) {
    const Vec2 p = pixel_of(s.cam, s.truth.zmap.mask, j);
    for (int i = 0; i < s.rig.size(); ++i) {
      const Vec3 t = t_field(s.rig.sources[i], s.cam, p, s.truth.zmap.values[j]).vector;
      CHECK(z(i, j) == doctest::Approx(d[j] * t.dot(nf.normals[j])).epsilon(1e-12));
      CHECK(zeta(s.rig, s.cam, s.truth.zmap, j, i) == z(i, j));
    }
  }
  // A fronto-parallel plane has d = 1.
  const LogDepthMap plane = LogDepthMap::constant(s.truth.zmap.mask, 700.0);
  CHECK((normalization(s.cam, plane).array() - 1.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("energy at the truth") {
  const auto s = test::small_scene();
  const ImageStack img = render(s.truth, s.rig, s.cam);
  const ArlsState t = true_state(s);
  for (const ArlsConfig& cfg : {ArlsConfig{}, cauchy_clamp()}) {
    CHECK(energy_arls(t, img, s.rig, s.cam, cfg) < 1e-24);
    ArlsState off = t;
    off.rho[0] *= 1.1;
    CHECK(energy_arls(off, img, s.rig, s.cam, cfg) > 1e-6);
  }
  ImageStack masked = img;
  masked.set(0, 0, 0, 50.0);
  const double with = energy_arls(t, masked, s.rig, s.cam, {});
  masked.set_valid(0, 0, false);
  CHECK(with > 1.0);
  CHECK(energy_arls(t, masked, s.rig, s.cam, {}) < 1e-24);
}

TEST_CASE("weights") {
  const auto s = test::small_scene(8, 20.0);
  const ImageStack img = render(s.truth, s.rig, s.cam);
  ArlsState st = true_state(s);
  st.rho[0] *= 1.2;
  const ArlsConfig c = cauchy_clamp();
  const auto w = arls_weights(st, img, s.rig, s.cam, c);
  const Eigen::MatrixXd z = zeta_field(s.rig, s.cam, st.zmap);
  for (int j = 0; j < img.pixels(); ++j) {
    for (int i = 0; i < img.images(); ++i) {
      const double r = st.rho[0][j] * std::max(z(i, j), 0.0) - img(i, j);
      CHECK(w[0](i, j) == doctest::Approx(2.0 / (1.0 + r * r / 0.01)).epsilon(1e-12));
    }
  }
  const auto exact = arls_weights(true_state(s), img, s.rig, s.cam, c);
  CHECK(exact[0].minCoeff() == doctest::Approx(2.0));
  ImageStack masked = img;
  masked.set_valid(2, 3, false);
  CHECK(arls_weights(st, masked, s.rig, s.cam, c)[0](2, 3) == 0.0);
}

TEST_CASE("depth Jacobian against finite differences") {
  const auto s = test::small_scene(6, 15.0);
  const ImageStack img = render(s.truth, s.rig, s.cam);
  std::mt19937_64 rng(4);
  ArlsState st = true_state(s);
  for (double& v : st.zmap.values) v += test::uniform(rng, -0.02, 0.02);
  for (const ArlsConfig& cfg : {ArlsConfig{}, cauchy_clamp()}) {
    const auto w = arls_weights(st, img, s.rig, s.cam, cfg);
    const DepthLinearization lin = linearize_depth(st, img, s.rig, s.cam, cfg, w);
    const Eigen::VectorXd grad = 2.0 * (lin.J.transpose() * lin.residual);
    CHECK(lin.residual.squaredNorm() == doctest::Approx(frozen_weight_objective(st, img, s.rig, s.cam, cfg, w)).epsilon(1e-12));
    for (int j = 0; j < img.pixels(); ++j) {
      const double h = 1e-6;
      ArlsState p = st, m = st;
      p.zmap.values[j] += h;
      m.zmap.values[j] -= h;
      const double fd = (frozen_weight_objective(p, img, s.rig, s.cam, cfg, w) -
                         frozen_weight_objective(m, img, s.rig, s.cam, cfg, w)) / (2 * h);
      CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-5).scale(1e-8));
    }
  }
}

TEST_CASE("updates at the truth stay put") {
  const auto s = test::small_scene();
  const ImageStack img = render(s.truth, s.rig, s.cam);
  const ArlsState t = true_state(s);
  const ArlsConfig c = cauchy_clamp();
  const auto rho = update_albedo(t, img, s.rig, s.cam, c);
  CHECK((rho[0] - t.rho[0]).cwiseAbs().maxCoeff() < 1e-14);
  const DepthStep step = depth_step(t, img, s.rig, s.cam, c);
  CHECK(step.delta.cwiseAbs().maxCoeff() < 1e-12);
  CHECK((update_depth(t, img, s.rig, s.cam, c).values - t.zmap.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("albedo update never raises the energy") {
  const auto s = test::small_scene();
  const ImageStack img = render_noisy(s.truth, s.rig, s.cam, 0.02, 3);
  ArlsConfig cfg = cauchy_clamp();
  cfg.max_outer = 8;
  cfg.stop_rel = 1e-12;
  const SurfaceEstimate r = solve_arls(img, s.rig, s.cam, cfg);
  CHECK(r.albedo_steps.size() == static_cast<std::size_t>(r.iterations));
  for (const auto& [before, after] : r.albedo_steps) CHECK(after <= before * (1 + 1e-12));
  CHECK(r.energy_trace.size() == static_cast<std::size_t>(r.iterations + 1));
  CHECK(r.energy_trace.back() < r.energy_trace.front());
}

TEST_CASE("initial state") {
  const auto s = test::small_scene();
  const ImageStack img = render(s.truth, s.rig, s.cam);
  ArlsConfig cfg;
  const ArlsState init = arls_initial_state(img, s.rig, s.cam, cfg);
  CHECK((init.zmap.values.array() - std::log(700.0)).abs().maxCoeff() < 1e-15);
  const Eigen::MatrixXd z = zeta_field(s.rig, s.cam, init.zmap).cwiseMax(0.0);
  CHECK(init.rho[0][0] == doctest::Approx(img.channel(0).mean() / z.mean()).epsilon(1e-12));
  cfg.rho0 = 0.4;
  CHECK(arls_initial_state(img, s.rig, s.cam, cfg).rho[0].maxCoeff() == 0.4);
  cfg.z0 = -1.0;
  CHECK_THROWS_AS(arls_initial_state(img, s.rig, s.cam, cfg), DomainError);
}

TEST_CASE("colored stacks") {
  const auto s = test::small_scene();
  const LedRig rgb = ring_rig_rgb({0.8e6, 1.0e6, 1.2e6});
  SceneTruth truth = s.truth;
  truth.albedo = {s.truth.albedo[0], 0.5 * s.truth.albedo[0], Eigen::VectorXd::Constant(s.truth.albedo[0].size(), 0.7)};
  const ImageStack img = render(truth, rgb, s.cam);
  ArlsConfig cfg;
  cfg.max_outer = 3;
  const SurfaceEstimate r = solve_arls_rgb(img, rgb, s.cam, cfg);
  CHECK(r.albedo.size() == 3u);
  CHECK(r.energy_trace.back() < r.energy_trace.front());
  CHECK_THROWS_AS(solve_arls_rgb(img.channel_stack(0), s.rig, s.cam, cfg), DomainError);
}
