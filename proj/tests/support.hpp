#pragma once

#include <cmath>
#include <random>

#include <Eigen/Core>

#include "nearps/camera.hpp"
#include "nearps/led.hpp"
#include "nearps/render.hpp"
#include "nearps/scene.hpp"

namespace test {

using nearps::Vec2;
using nearps::Vec3;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

// Straight transcription of psi cos^mu(theta) (x_s - x) / |x_s - x|^3.
inline Vec3 oracle_lighting(const Vec3& xs, const Vec3& ns, double mu, double psi, const Vec3& x) {
  const double dx = xs.x() - x.x();
  const double dy = xs.y() - x.y();
  const double dz = xs.z() - x.z();
  const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
  const double c = -(ns.x() * dx + ns.y() * dy + ns.z() * dz) / r;
  if (mu > 0.0 && c < 0.0) return Vec3::Zero();
  const double k = psi * std::pow(c, mu) / (r * r * r);
  return Vec3(k * dx, k * dy, k * dz);
}

// Smooth bump on a plane, small enough to be lit by every ring source.
inline nearps::LogDepthMap bump_depth(const nearps::CameraIntrinsics& cam,
                                      const nearps::PixelMask& mask, double z0 = 700.0,
                                      double height = 25.0, double sigma = 8.0) {
  Eigen::VectorXd v(mask.size());
  for (int j = 0; j < mask.size(); ++j) {
    const Vec2 p = nearps::pixel_of(cam, mask, j);
    v[j] = std::log(z0 - height * std::exp(-p.squaredNorm() / (2.0 * sigma * sigma)));
  }
  return nearps::LogDepthMap(mask, v);
}

struct SmallScene {
  nearps::CameraIntrinsics cam;
  nearps::LedRig rig;
  nearps::SceneTruth truth;
};

// 24 x 24 bump with checker albedo under the 8-source ring; no self-shadows.
inline SmallScene small_scene(int size = 24, double f = 60.0) {
  const nearps::CameraIntrinsics cam = nearps::benchmark_camera(size, size, f);
  const nearps::PixelMask mask = nearps::PixelMask::full(size, size);
  nearps::SceneTruth truth{bump_depth(cam, mask), {nearps::checker_albedo(mask, 6)}, std::nullopt};
  return {cam, nearps::ring_rig(), std::move(truth)};
}

}  // namespace test
