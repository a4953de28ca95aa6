#pragma once

#include <vector>

#include <Eigen/Core>

#include "nearps/camera.hpp"
#include "nearps/led.hpp"
#include "nearps/render.hpp"
#include "nearps/surface.hpp"

namespace nearps {

/// One pair equation a . grad z~ = b at a pixel, from images i < k.
struct RatioRow {
  int pixel = 0;
  int i = 0;
  int k = 0;
  Vec2 a;
  double b = 0.0;
};

/// All pair rows, assembled as a sparse (rows x 2n) matrix acting on the
/// stacked gradient of GradientOperator and a right-hand side.
struct RatioSystem {
  std::vector<RatioRow> rows;
  SparseMatrix A;
  Eigen::VectorXd b;
};

/// a^i = f [t1, t2] - t3 p, b^i = t3, and per pair a^{ik} = I^i a^k - I^k a^i,
/// b^{ik} = I^i b^k - I^k b^i. Pairs touching an invalid observation are
/// dropped.
RatioSystem ratio_coefficients(const ImageStack& stack, const LedRig& rig,
                               const CameraIntrinsics& cam, const LogDepthMap& zmap);

/// |A(z~) G z~ - b(z~)|^2.
double energy_ratio(const ImageStack& stack, const LedRig& rig, const CameraIntrinsics& cam,
                    const LogDepthMap& zmap);

struct FixedPointConfig {
  int iterations = 10;
  double cg_tolerance = 1e-9;
};

/// Frozen-coefficient iterations; each linear solve keeps z~ at the mask
/// centroid fixed to its current value.
SurfaceEstimate solve_fixed_point(const ImageStack& stack, const LedRig& rig,
                                  const CameraIntrinsics& cam, const LogDepthMap& init,
                                  const FixedPointConfig& cfg);

struct AdmmConfig {
  double nu0 = 1.0;
  double mu_adapt = 10.0;
  double tau_incr = 2.0;
  double tau_decr = 2.0;
  double stop_rel = 1e-4;
  int max_outer = 50;
  double cg_tolerance = 1e-9;
  double lm_damping = 1e-3;
  int lm_max_iterations = 30;
};

struct ScalarLmResult {
  double z = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Local z-bar objective at pixel j for a fixed gradient g:
/// sum over pairs (a^{ik}(zb) . g - b^{ik}(zb))^2 + (zt - zb + h)^2 / (2 nu).
double local_ratio_objective(const ImageStack& stack, const LedRig& rig,
                             const CameraIntrinsics& cam, int j, const Vec2& g, double zb,
                             double zt, double h, double nu);

/// Scalar Levenberg-Marquardt on local_ratio_objective from zb0.
ScalarLmResult minimize_local_ratio(const ImageStack& stack, const LedRig& rig,
                                    const CameraIntrinsics& cam, int j, const Vec2& g,
                                    double zb0, double zt, double h, double nu,
                                    const AdmmConfig& cfg);

/// ADMM on the split z~ = z-bar with scaled dual h and residual balancing of
/// the step nu. flagged_pixels counts z-bar updates rejected after LM failed.
SurfaceEstimate solve_admm(const ImageStack& stack, const LedRig& rig, const CameraIntrinsics& cam,
                           const LogDepthMap& init, const AdmmConfig& cfg);

/// Least-squares albedo for a fixed depth: sum I s / sum s^2 with the clamped
/// shading s of each valid observation (0 when every shading vanishes).
Eigen::VectorXd fit_albedo(const ImageStack& stack, const LedRig& rig, const CameraIntrinsics& cam,
                           const LogDepthMap& zmap, int channel = 0);

}  // namespace nearps
