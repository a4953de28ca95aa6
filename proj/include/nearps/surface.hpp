#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "nearps/camera.hpp"

namespace nearps {

/// Joint solver output.
struct SurfaceEstimate {
  LogDepthMap zmap;
  /// Relative albedo per channel.
  std::vector<Eigen::VectorXd> albedo;
  NormalField normals;
  /// Energy after each outer iteration; entry 0 is the initial energy.
  std::vector<double> energy_trace;
  /// Seconds since solver start for each energy_trace entry.
  std::vector<double> wall_time;
  int iterations = 0;
  bool converged = false;

  /// Pixels flagged or kept at their previous value during the run (rank
  /// deficient inversions, LM failures), summed over iterations.
  int flagged_pixels = 0;
  /// ARLS only: total energy just before and after every albedo update.
  std::vector<std::pair<double, double>> albedo_steps;
};

}  // namespace nearps
