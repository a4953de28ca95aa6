#pragma once

#include <vector>

#include <Eigen/Core>

#include "nearps/camera.hpp"
#include "nearps/integrator.hpp"
#include "nearps/led.hpp"
#include "nearps/render.hpp"
#include "nearps/surface.hpp"

namespace nearps {

struct ClassicalResult {
  Eigen::VectorXd albedo;
  NormalField normals;
};

/// Directional photometric stereo: m(p) = S^+ I(p), rho = |m|, n = m / |m|.
/// S is m x 3 with one lighting vector per row. Zero m(p) is flagged.
ClassicalResult classical_ps(const ImageStack& stack, const Eigen::MatrixX3d& lighting);

struct FrozenInversion {
  std::vector<Vec3> m;
  std::vector<std::uint8_t> flagged;
  int flagged_count() const;
};

/// m(p) = T(x_k)^+ I(p) using the valid observations at each pixel; rows of T
/// are the t-fields at the current depth. Rank-deficient pixels are flagged
/// and keep `previous[j]` (zero when `previous` is empty).
FrozenInversion invert_frozen_lighting(const ImageStack& stack, const LedRig& rig,
                                       const CameraIntrinsics& cam, const LogDepthMap& zmap,
                                       const std::vector<Vec3>& previous = {});

struct ScaleBracket {
  double w_min = 0.0;
  double w_max = 0.0;
  double relative_tolerance = 1e-6;
  int coarse_samples = 41;
};

/// Reprojection energy sum_p |I(p) - T(x_w(p)) m(p)|^2 where x_w places the
/// integrated log-depth `relative` (zero at the anchor) at depth w there.
double energy_alternating(const ImageStack& stack, const LedRig& rig, const CameraIntrinsics& cam,
                          const Eigen::VectorXd& relative, const std::vector<Vec3>& m, double w);

struct ScaleEstimate {
  double depth = 0.0;
  double energy = 0.0;
};

/// Minimizes energy_alternating over w in the bracket: a coarse log-spaced
/// scan, then golden-section search in log w. Throws NumericError when the
/// minimum sits on the bracket boundary or the energy is flat.
ScaleEstimate estimate_scale(const ImageStack& stack, const LedRig& rig,
                             const CameraIntrinsics& cam, const Eigen::VectorXd& relative,
                             const std::vector<Vec3>& m, const ScaleBracket& bracket);

struct AlternatingConfig {
  double z0 = 700.0;
  int k_max = 15;
  /// Empty bracket (w_max == 0) means [z0 / 4, 4 z0].
  ScaleBracket bracket;
  /// Stop early when the relative energy change falls below this (0 = never).
  double stop_rel = 1e-4;
};

/// Alternates frozen-lighting inversion, normalization, least-squares
/// integration (anchored at the mask centroid) and scale estimation.
SurfaceEstimate solve_alternating(const ImageStack& stack, const LedRig& rig,
                                  const CameraIntrinsics& cam, const AlternatingConfig& cfg);

}  // namespace nearps
