#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "nearps/camera.hpp"

namespace nearps {

/// Target log-depth gradient (g_u, g_v) per mask pixel, as a 2 x n matrix.
struct GradientField {
  PixelMask mask;
  Eigen::Matrix2Xd values;
};

/// Fixes the additive constant: z~ at dense pixel index `pixel` equals `value`.
struct Anchor {
  int pixel = 0;
  double value = 0.0;
};

struct IntegrationResult {
  LogDepthMap zmap;
  int iterations = 0;
  /// |G z~ - g| at every CG iterate, including the starting point.
  std::vector<double> residual_history;
};

/// Least-squares integration: minimizes |G z~ - g|^2 with CG on the normal
/// equations (relative residual 1e-9), then shifts so the anchor holds.
/// Throws DomainError listing the components of a disconnected mask.
IntegrationResult integrate_least_squares(const GradientField& g, const Anchor& anchor,
                                          double relative_tolerance = 1e-9);

/// Accumulates forward-difference increments along a 4-connected pixel path
/// (col, row) that starts next to the anchor pixel. Returns z~ at the last
/// pixel, or the anchor value for an empty path.
double integrate_path(const GradientField& g, const Anchor& anchor,
                      const std::vector<std::pair<int, int>>& path);

/// Dense index of the mask pixel nearest to the mask centroid.
int centroid_pixel(const PixelMask& mask);

}  // namespace nearps
