#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

namespace nearps {

struct PcgOptions {
  double relative_tolerance = 1e-9;
  int max_iterations = 0;  // 0: 10 * unknowns
};

struct PcgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Jacobi-preconditioned conjugate gradient for a symmetric positive
/// (semi-)definite operator. The tolerance is on |b - A x| / |b|. `monitor`
/// sees every iterate, starting with x0. Throws NumericError on breakdown.
PcgResult pcg(const LinearOperator& apply, const Eigen::VectorXd& diagonal,
              const Eigen::VectorXd& b, const Eigen::VectorXd& x0, const PcgOptions& options,
              const std::function<void(const Eigen::VectorXd&)>& monitor = {});

}  // namespace nearps
