#include "nearps/integrator.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "nearps/errors.hpp"
#include "nearps/pcg.hpp"

namespace nearps {

IntegrationResult integrate_least_squares(const GradientField& g, const Anchor& anchor,
                                          double relative_tolerance) {
  const PixelMask& mask = g.mask;
  const int n = mask.size();
  if (g.values.cols() != n) throw DomainError("integrate: gradient field size mismatch");
  if (!g.values.allFinite()) throw DomainError("integrate: gradient field has non-finite values");
  if (anchor.pixel < 0 || anchor.pixel >= n) throw DomainError("integrate: anchor outside mask");

  const auto components = mask.connected_components();
  if (components.size() > 1) {
    std::ostringstream msg;
    msg << "integrate: mask has " << components.size() << " connected components:";
    for (std::size_t c = 0; c < components.size(); ++c) {
      const int j = components[c].front();
      msg << " [" << c << ": " << components[c].size() << " px from (" << mask.col(j) << ", "
          << mask.row(j) << ")]";
    }
    throw DomainError(msg.str());
  }

  const GradientOperator grad(mask);
  const SparseMatrix& G = grad.matrix();
  const SparseMatrix GtG = SparseMatrix(G.transpose()) * G;
  const Eigen::VectorXd target = GradientOperator::stack(g.values);
  const Eigen::VectorXd rhs = G.transpose() * target;

  IntegrationResult out{LogDepthMap(mask, Eigen::VectorXd::Zero(n)), 0, {}};
  PcgOptions options;
  options.relative_tolerance = relative_tolerance;
  const PcgResult solve = pcg([&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return GtG * x; },
                              GtG.diagonal(), rhs, Eigen::VectorXd::Zero(n), options,
                              [&](const Eigen::VectorXd& x) {
                                out.residual_history.push_back((G * x - target).norm());
                              });
  out.iterations = solve.iterations;
  out.zmap.values = solve.x.array() + (anchor.value - solve.x[anchor.pixel]);
  return out;
}

double integrate_path(const GradientField& g, const Anchor& anchor,
                      const std::vector<std::pair<int, int>>& path) {
  const PixelMask& mask = g.mask;
  if (anchor.pixel < 0 || anchor.pixel >= mask.size()) {
    throw DomainError("integrate_path: anchor outside mask");
  }
  double value = anchor.value;
  int current = anchor.pixel;
  for (const auto& [col, row] : path) {
    const int next = mask.index(col, row);
    if (next < 0) {
      std::ostringstream msg;
      msg << "integrate_path: pixel (" << col << ", " << row << ") is outside the mask";
      throw DomainError(msg.str());
    }
    const int dc = col - mask.col(current);
    const int dr = row - mask.row(current);
    if (dc == 1 && dr == 0) {
      value += g.values(0, current);
    } else if (dc == -1 && dr == 0) {
      value -= g.values(0, next);
    } else if (dc == 0 && dr == 1) {
      value += g.values(1, current);
    } else if (dc == 0 && dr == -1) {
      value -= g.values(1, next);
    } else {
      std::ostringstream msg;
      msg << "integrate_path: step to (" << col << ", " << row << ") is not a 4-neighbour move";
      throw DomainError(msg.str());
    }
    current = next;
  }
  return value;
}

int centroid_pixel(const PixelMask& mask) {
  double mc = 0.0;
  double mr = 0.0;
  for (int j = 0; j < mask.size(); ++j) {
    mc += mask.col(j);
    mr += mask.row(j);
  }
  mc /= mask.size();
  mr /= mask.size();
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int j = 0; j < mask.size(); ++j) {
    const double d = std::hypot(mask.col(j) - mc, mask.row(j) - mr);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

}  // namespace nearps
