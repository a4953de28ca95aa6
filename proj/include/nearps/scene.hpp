#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "nearps/calibration.hpp"
#include "nearps/camera.hpp"
#include "nearps/led.hpp"
#include "nearps/render.hpp"

namespace nearps {

/// 64 x 64 pixels, f = 180 px, principal point at the image center.
CameraIntrinsics benchmark_camera(int width = 64, int height = 64, double f = 180.0);

/// m sources evenly spaced on a ring of radius `ring_radius` in the plane
/// z = 0, all aimed at (0, 0, aim_depth).
LedRig ring_rig(int m = 8, double ring_radius = 300.0, double aim_depth = 700.0, double mu = 1.0,
                double psi = 1e6);

/// Same geometry with per-channel intensities.
LedRig ring_rig_rgb(const std::array<double, 3>& psi_rgb, int m = 8, double ring_radius = 300.0,
                    double aim_depth = 700.0, double mu = 1.0);

/// Fronto-parallel plane z = z0.
LogDepthMap plane_depth(const CameraIntrinsics& cam, const PixelMask& mask, double z0);

/// Front half of a sphere of the given radius centered on the plane z = z0
/// at the optical axis; rays missing the sphere hit the plane.
LogDepthMap hemisphere_depth(const CameraIntrinsics& cam, const PixelMask& mask, double z0,
                             double radius);

/// Checkerboard of `square`-pixel cells alternating between two levels.
Eigen::VectorXd checker_albedo(const PixelMask& mask, int square = 16, double high = 1.0,
                               double low = 0.5);

/// Three channels with distinct checker phases and levels.
std::vector<Eigen::VectorXd> colored_albedo(const PixelMask& mask, int square = 16);

struct Benchmark {
  CameraIntrinsics cam;
  LedRig rig;
  SceneTruth truth;
};

/// Hemisphere (radius 80) on the plane z = 700, full 64 x 64 mask, ring of 8
/// Lambertian sources (psi = 1e6), two-level checker albedo.
Benchmark benchmark_scene();

/// benchmark_scene() with colored albedo and per-channel intensities.
Benchmark benchmark_scene_rgb(const std::array<double, 3>& psi_rgb = {0.8e6, 1.0e6, 1.2e6});

/// Largest value over channels, images and pixels.
double max_intensity(const ImageStack& stack);

/// sqrt(mean((z - z_true)^2)) / sqrt(mean(z_true^2)) in depth (not log-depth).
double relative_depth_rmse(const LogDepthMap& estimate, const LogDepthMap& truth);

/// Relative RMSE of an albedo channel: |a - b| / |b|.
double relative_rmse(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth);

/// Zeroes `fraction` of the pixels (chosen by the seed) in each listed image.
ImageStack zero_regions(const ImageStack& stack, const std::vector<int>& images, double fraction,
                        std::uint64_t seed);

struct CalibrationData {
  /// Rays per source, aimed exactly at the source.
  std::vector<std::vector<Ray>> rays;
  /// Plane observations per source.
  std::vector<std::vector<PlanePoseObservation>> poses;
};

/// q tilted Lambertian planes around z = plane_depth with albedo 1, rendered
/// under every source of the rig, and `rays_per_source` exact reflected rays.
CalibrationData synthetic_calibration(const LedRig& rig, int q = 10, int rays_per_source = 10,
                                      double plane_depth = 700.0, std::uint64_t seed = 7);

}  // namespace nearps
