#include "nearps/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "nearps/errors.hpp"

namespace nearps {

CameraIntrinsics benchmark_camera(int width, int height, double f) {
  return CameraIntrinsics(f, Vec2(width / 2.0, height / 2.0), width, height);
}

namespace {

std::vector<std::pair<Vec3, Vec3>> ring_geometry(int m, double ring_radius, double aim_depth) {
  if (m < 1) throw DomainError("ring_rig: at least one source");
  std::vector<std::pair<Vec3, Vec3>> out;
  const Vec3 target(0.0, 0.0, aim_depth);
  for (int i = 0; i < m; ++i) {
    const double a = 2.0 * std::numbers::pi * i / m;
    const Vec3 pos(ring_radius * std::cos(a), ring_radius * std::sin(a), 0.0);
    out.emplace_back(pos, (target - pos).normalized());
  }
  return out;
}

}  // namespace

LedRig ring_rig(int m, double ring_radius, double aim_depth, double mu, double psi) {
  std::vector<LedSource> sources;
  for (const auto& [pos, dir] : ring_geometry(m, ring_radius, aim_depth)) {
    sources.emplace_back(pos, dir, mu, psi);
  }
  return LedRig(std::move(sources));
}

LedRig ring_rig_rgb(const std::array<double, 3>& psi_rgb, int m, double ring_radius,
                    double aim_depth, double mu) {
  std::vector<LedSource> sources;
  for (const auto& [pos, dir] : ring_geometry(m, ring_radius, aim_depth)) {
    sources.emplace_back(pos, dir, mu, psi_rgb);
  }
  return LedRig(std::move(sources));
}

LogDepthMap plane_depth(const CameraIntrinsics&, const PixelMask& mask, double z0) {
  return LogDepthMap::constant(mask, z0);
}

LogDepthMap hemisphere_depth(const CameraIntrinsics& cam, const PixelMask& mask, double z0,
                             double radius) {
  if (!(z0 > radius) || !(radius > 0.0)) {
    throw DomainError("hemisphere: need 0 < radius < z0");
  }
  Eigen::VectorXd values(mask.size());
  const Vec3 center(0.0, 0.0, z0);
  for (int j = 0; j < mask.size(); ++j) {
    const Vec3 d = homogeneous_pixel(cam, pixel_of(cam, mask, j)).normalized();
    // |t d - c|^2 = R^2 with the nearest root.
    const double dc = d.dot(center);
    const double disc = dc * dc - (center.squaredNorm() - radius * radius);
    double z = z0;
    if (disc > 0.0) z = std::min((dc - std::sqrt(disc)) * d.z(), z0);
    values[j] = std::log(z);
  }
  return LogDepthMap(mask, values);
}

Eigen::VectorXd checker_albedo(const PixelMask& mask, int square, double high, double low) {
  Eigen::VectorXd a(mask.size());
  for (int j = 0; j < mask.size(); ++j) {
    const bool even = ((mask.col(j) / square) + (mask.row(j) / square)) % 2 == 0;
    a[j] = even ? high : low;
  }
  return a;
}

std::vector<Eigen::VectorXd> colored_albedo(const PixelMask& mask, int square) {
  std::vector<Eigen::VectorXd> out(3, Eigen::VectorXd(mask.size()));
  for (int j = 0; j < mask.size(); ++j) {
    const int cu = mask.col(j) / square;
    const int cv = mask.row(j) / square;
    const int cu2 = (mask.col(j) + square / 2) / square;
    const bool a = (cu + cv) % 2 == 0;
    const bool b = (cu2 + cv) % 2 == 0;
    out[0][j] = a ? 1.0 : 0.5;
    out[1][j] = b ? 0.8 : 0.4;
    out[2][j] = a ? 0.5 : 0.9;
  }
  return out;
}

Benchmark benchmark_scene() {
  const CameraIntrinsics cam = benchmark_camera();
  const PixelMask mask = PixelMask::full(cam.width(), cam.height());
  SceneTruth truth{hemisphere_depth(cam, mask, 700.0, 80.0), {checker_albedo(mask)}, std::nullopt};
  return {cam, ring_rig(), std::move(truth)};
}

Benchmark benchmark_scene_rgb(const std::array<double, 3>& psi_rgb) {
  const CameraIntrinsics cam = benchmark_camera();
  const PixelMask mask = PixelMask::full(cam.width(), cam.height());
  SceneTruth truth{hemisphere_depth(cam, mask, 700.0, 80.0), colored_albedo(mask), std::nullopt};
  return {cam, ring_rig_rgb(psi_rgb), std::move(truth)};
}

double max_intensity(const ImageStack& stack) {
  double out = 0.0;
  for (int c = 0; c < stack.channels(); ++c) out = std::max(out, stack.channel(c).maxCoeff());
  return out;
}

double relative_depth_rmse(const LogDepthMap& estimate, const LogDepthMap& truth) {
  if (!(estimate.mask == truth.mask)) throw DomainError("relative_depth_rmse: mask mismatch");
  const Eigen::VectorXd ze = estimate.depths();
  const Eigen::VectorXd zt = truth.depths();
  return (ze - zt).norm() / zt.norm();
}

double relative_rmse(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth) {
  if (estimate.size() != truth.size()) throw DomainError("relative_rmse: size mismatch");
  return (estimate - truth).norm() / truth.norm();
}

ImageStack zero_regions(const ImageStack& stack, const std::vector<int>& images, double fraction,
                        std::uint64_t seed) {
  std::vector<Eigen::MatrixXd> data;
  for (int c = 0; c < stack.channels(); ++c) data.push_back(stack.channel(c));
  std::mt19937_64 rng(seed);
  const int n = stack.pixels();
  const int count = static_cast<int>(std::lround(fraction * n));
  for (int i : images) {
    if (i < 0 || i >= stack.images()) throw DomainError("zero_regions: image index out of range");
    std::vector<int> order(n);
    for (int j = 0; j < n; ++j) order[j] = j;
    std::shuffle(order.begin(), order.end(), rng);
    for (int k = 0; k < count; ++k) {
      for (auto& d : data) d(i, order[k]) = 0.0;
    }
  }
  ImageStack out(stack.mask(), std::move(data));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < stack.images(); ++i) out.set_valid(i, j, stack.valid(i, j));
  }
  return out;
}

CalibrationData synthetic_calibration(const LedRig& rig, int q, int rays_per_source,
                                      double plane_depth, std::uint64_t seed) {
  if (q < 1 || rays_per_source < 2) throw DomainError("synthetic_calibration: too few poses or rays");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> tilt(-0.35, 0.35);
  std::uniform_real_distribution<double> offset(-40.0, 40.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  struct Pose {
    Vec3 normal;
    std::vector<Vec3> points;
  };
  std::vector<Pose> poses;
  for (int j = 0; j < q; ++j) {
    const Vec3 normal = Vec3(tilt(rng), tilt(rng), -1.0).normalized();
    const Vec3 center(offset(rng), offset(rng), plane_depth + offset(rng));
    const Vec3 e1 = normal.cross(Vec3::UnitY()).normalized();
    const Vec3 e2 = normal.cross(e1).normalized();
    Pose pose{normal, {}};
    for (int a = -3; a <= 3; ++a) {
      for (int b = -3; b <= 3; ++b) pose.points.push_back(center + 30.0 * a * e1 + 30.0 * b * e2);
    }
    poses.push_back(std::move(pose));
  }

  CalibrationData out;
  for (const auto& src : rig.sources) {
    std::vector<PlanePoseObservation> obs;
    for (int j = 0; j < q; ++j) {
      PlanePoseObservation o{j, poses[j].normal, {}};
      for (const Vec3& x : poses[j].points) {
        PlaneSample s{x, {}};
        for (int c = 0; c < src.channels(); ++c) {
          s.intensity[c] = std::max(lighting_vector(src, x, c).vector.dot(poses[j].normal), 0.0);
        }
        o.samples.push_back(s);
      }
      obs.push_back(std::move(o));
    }
    out.poses.push_back(std::move(obs));

    std::vector<Ray> rays;
    for (int k = 0; k < rays_per_source; ++k) {
      Vec3 u;
      do {
        u = Vec3(unit(rng), unit(rng), unit(rng));
      } while (u.norm() < 0.1 || u.norm() > 1.0);
      u.normalize();
      if (u.z() < 0.0) u.z() = -u.z();
      const Vec3 origin = src.position() + 500.0 * u;
      rays.push_back({origin, -u});
    }
    out.rays.push_back(std::move(rays));
  }
  return out;
}

}  // namespace nearps
