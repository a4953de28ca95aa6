#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "nearps/camera.hpp"
#include "nearps/estimators.hpp"
#include "nearps/led.hpp"
#include "nearps/render.hpp"
#include "nearps/surface.hpp"

namespace nearps {

struct ArlsConfig {
  Estimator estimator = Estimator::least_squares();
  ShadowOperator shadow = ShadowOperator::identity();
  double stop_rel = 1e-3;
  double cg_rel = 1e-4;
  int max_outer = 50;
  /// Initial plane depth.
  double z0 = 700.0;
  /// Initial constant albedo; defaults to mean(I) / mean({zeta(z0)}_+).
  std::optional<double> rho0;
};

/// Log-depth and albedo rho~ = rho / d per channel.
struct ArlsState {
  LogDepthMap zmap;
  std::vector<Eigen::VectorXd> rho;
};

/// zeta^i_j = [Q_j t^i_j(z~_j)] . [(G z~)_j; -1] for one pixel and source.
double zeta(const LedRig& rig, const CameraIntrinsics& cam, const LogDepthMap& zmap, int j, int i,
            int channel = 0);

/// All zeta values of a channel, m x n.
Eigen::MatrixXd zeta_field(const LedRig& rig, const CameraIntrinsics& cam, const LogDepthMap& zmap,
                           int channel = 0);

/// d = |[f G z~; -1 - p . G z~]| per pixel.
Eigen::VectorXd normalization(const CameraIntrinsics& cam, const LogDepthMap& zmap);

/// sum over channels, pixels and valid images of phi(rho~ {zeta}_+ - I).
double energy_arls(const ArlsState& state, const ImageStack& stack, const LedRig& rig,
                   const CameraIntrinsics& cam, const ArlsConfig& cfg);

/// Lagged weights phi'(r) / r per channel (m x n each), phi''(0) at exact fits; 0
/// for invalid entries.
std::vector<Eigen::MatrixXd> arls_weights(const ArlsState& state, const ImageStack& stack,
                                          const LedRig& rig, const CameraIntrinsics& cam,
                                          const ArlsConfig& cfg);

/// Weighted closed-form albedo per pixel and channel; a pixel keeps its value
/// when the denominator vanishes or when the candidate would raise its energy.
std::vector<Eigen::VectorXd> update_albedo(const ArlsState& state, const ImageStack& stack,
                                           const LedRig& rig, const CameraIntrinsics& cam,
                                           const ArlsConfig& cfg);

/// Gauss-Newton linearization in z~ with frozen weights: Jacobian rows
/// sqrt(w) rho~ chi(zeta) d zeta / d z~ and residuals sqrt(w) r, one per
/// channel, valid image and pixel.
struct DepthLinearization {
  SparseMatrix J;
  Eigen::VectorXd residual;
};

DepthLinearization linearize_depth(const ArlsState& state, const ImageStack& stack,
                                   const LedRig& rig, const CameraIntrinsics& cam,
                                   const ArlsConfig& cfg,
                                   const std::vector<Eigen::MatrixXd>& weights);

/// sum w r^2 with the given frozen weights (its gradient is 2 J^T (sqrt(w) r)).
double frozen_weight_objective(const ArlsState& state, const ImageStack& stack, const LedRig& rig,
                               const CameraIntrinsics& cam, const ArlsConfig& cfg,
                               const std::vector<Eigen::MatrixXd>& weights);

struct DepthStep {
  Eigen::VectorXd delta;
  int cg_iterations = 0;
  double cg_residual = 0.0;
};

/// Solves J^T J delta = -J^T (sqrt(w) r) by Jacobi PCG from delta = 0.
DepthStep depth_step(const ArlsState& state, const ImageStack& stack, const LedRig& rig,
                     const CameraIntrinsics& cam, const ArlsConfig& cfg);

/// z~ + delta.
LogDepthMap update_depth(const ArlsState& state, const ImageStack& stack, const LedRig& rig,
                         const CameraIntrinsics& cam, const ArlsConfig& cfg);

/// Initial state: plane at z0 and constant albedo.
ArlsState arls_initial_state(const ImageStack& stack, const LedRig& rig,
                             const CameraIntrinsics& cam, const ArlsConfig& cfg);

/// Alternates albedo and depth updates until the relative energy change
/// drops below stop_rel or max_outer is reached. Works on 1- or 3-channel
/// stacks; the output albedo is rho~ d.
SurfaceEstimate solve_arls(const ImageStack& stack, const LedRig& rig, const CameraIntrinsics& cam,
                           const ArlsConfig& cfg);

/// solve_arls restricted to 3-channel stacks and colored rigs.
SurfaceEstimate solve_arls_rgb(const ImageStack& stack, const LedRig& rig,
                               const CameraIntrinsics& cam, const ArlsConfig& cfg);

}  // namespace nearps
