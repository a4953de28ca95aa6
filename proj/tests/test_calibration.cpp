#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Geometry>

#include "nearps/calibration.hpp"
#include "nearps/errors.hpp"
#include "nearps/scene.hpp"
#include "support.hpp"

using namespace nearps;

namespace {

// Lambertian plane through `center` with normal `n`, lit by `src`.
PlanePoseObservation plane_pose(const LedSource& src, const Vec3& center, const Vec3& n, int pose,
                                std::mt19937_64& rng) {
  PlanePoseObservation obs{pose, n, {}};
  const Vec3 a = n.unitOrthogonal();
  const Vec3 b = n.cross(a);
  for (int k = 0; k < 30; ++k) {
    const Vec3 x = center + test::uniform(rng, -60, 60) * a + test::uniform(rng, -60, 60) * b;
    PlaneSample s{x, {}};
    for (int c = 0; c < src.channels(); ++c) {
      const Vec3 l = test::oracle_lighting(src.position(), src.direction(), src.mu(), src.psi(c), x);
      s.intensity[c] = std::max(0.0, l.dot(n));
    }
    obs.samples.push_back(s);
  }
  return obs;
}

std::vector<PlanePoseObservation> poses(const LedSource& src, std::uint64_t seed, int q = 6) {
  std::mt19937_64 rng(seed);
  std::vector<PlanePoseObservation> out;
  for (int k = 0; k < q; ++k) {
    const Vec3 n = Vec3(test::uniform(rng, -0.3, 0.3), test::uniform(rng, -0.3, 0.3), -1.0).normalized();
    out.push_back(plane_pose(src, Vec3(test::uniform(rng, -30, 30), test::uniform(rng, -30, 30), 700), n, k, rng));
  }
  return out;
}

}  // namespace

TEST_CASE("triangulation") {
  std::mt19937_64 rng(13);
  const Vec3 xs(120, -80, 3);
  std::vector<Ray> rays;
  for (int k = 0; k < 8; ++k) {
    const Vec3 o(test::uniform(rng, -100, 100), test::uniform(rng, -100, 100), test::uniform(rng, 500, 900));
    rays.push_back({o, (xs - o).normalized()});
  }
  const Triangulation t = triangulate_source(rays);
  CHECK((t.point - xs).norm() < 1e-9);
  CHECK(t.rms_distance < 1e-9);

  // Two rays x = (0, 0, s) and y = (1, s, 0) meet nowhere; the optimum sits midway.
  const Triangulation skew = triangulate_source({{Vec3(0, 0, 0), Vec3::UnitZ()}, {Vec3(1, 0, 0), Vec3::UnitY()}});
  CHECK((skew.point - Vec3(0.5, 0, 0)).norm() < 1e-12);
  CHECK(skew.rms_distance == doctest::Approx(0.5));

  CHECK_THROWS_AS(triangulate_source({rays[0]}), DomainError);
  CHECK_THROWS_AS(triangulate_source({rays[0], rays[0]}), NumericError);
}

TEST_CASE("isotropic intensity") {
  const LedSource src(Vec3(50, 20, 0), Vec3::UnitZ(), 0.0, 2.5e6);
  const auto obs = poses(src, 3);
  CHECK(calibrate_isotropic(obs, src.position()) == doctest::Approx(2.5e6).epsilon(1e-12));
  CHECK_THROWS_AS(calibrate_isotropic({}, src.position()), NumericError);
}

TEST_CASE("anisotropic calibration recovers direction and intensity") {
  std::mt19937_64 rng(77);
  for (int k = 0; k < 10; ++k) {
    const Vec3 ns = Vec3(test::uniform(rng, -0.3, 0.3), test::uniform(rng, -0.3, 0.3), 1.0).normalized();
    const double mu = test::uniform(rng, 0.5, 3.0);
    const double psi = test::uniform(rng, 1e5, 1e7);
    const LedSource src(Vec3(test::uniform(rng, -300, 300), test::uniform(rng, -300, 300), 0.0), ns, mu, psi);
    const auto obs = poses(src, 100 + k);
    const AnisotropicCalibration c = calibrate_anisotropic(obs, src.position(), mu);
    CHECK((c.direction - ns).norm() < 1e-9);
    CHECK(c.psi == doctest::Approx(psi).epsilon(1e-9));
    CHECK(c.residual < 1e-9 * std::pow(psi, 1.0 / mu));
    CHECK(anisotropic_residual(obs, src.position(), mu, ns, psi) < 1e-9 * std::pow(psi, 1.0 / mu));
    CHECK(anisotropic_residual(obs, src.position(), mu, ns, 1.1 * psi) > 0.0);
  }
}

TEST_CASE("calibration from the synthetic rig") {
  const LedRig rig = ring_rig(8);
  const CalibrationData data = synthetic_calibration(rig, 10, 10);
  CHECK(data.rays.size() == 8u);
  CHECK(data.poses.size() == 8u);
  for (int i = 0; i < rig.size(); ++i) {
    const Triangulation t = triangulate_source(data.rays[i]);
    CHECK((t.point - rig.sources[i].position()).norm() < 1e-6);
    const AnisotropicCalibration c = calibrate_anisotropic(data.poses[i], t.point, 1.0);
    CHECK(c.direction.dot(rig.sources[i].direction()) > 1.0 - 1e-10);
    CHECK(c.psi == doctest::Approx(1e6).epsilon(1e-8));
  }
}

TEST_CASE("colored calibration") {
  const Vec3 ns = Vec3(0.1, -0.05, 1.0).normalized();
  const LedSource src(Vec3(-200, 90, 0), ns, 1.5, std::array<double, 3>{3.1e6, 5.49e6, 4.2e6});
  const auto obs = poses(src, 55);
  const RgbCalibration c = calibrate_rgb(obs, src.position(), 1.5);
  CHECK(c.psi[0] == doctest::Approx(3.1e6).epsilon(1e-9));
  CHECK(c.psi[1] == doctest::Approx(5.49e6).epsilon(1e-9));
  CHECK(c.psi[2] == doctest::Approx(4.2e6).epsilon(1e-9));
  CHECK((c.fused_direction - ns).norm() < 1e-9);
}

TEST_CASE("spherical mean") {
  const Vec3 a = Vec3(0.2, 0.0, 1.0).normalized();
  CHECK((spherical_mean({a, a, a}, {1, 2, 3}) - a).norm() < 1e-14);
  const Vec3 m = spherical_mean({Vec3::UnitX(), Vec3::UnitY()}, {1, 1});
  CHECK(std::abs(m.norm() - 1.0) < 1e-14);
  CHECK(m.x() == doctest::Approx(m.y()));
}
