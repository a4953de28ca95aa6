#include "nearps/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nearps/errors.hpp"

namespace nearps {

Estimator Estimator::cauchy(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw DomainError("cauchy estimator: lambda must be positive");
  }
  return Estimator(Kind::cauchy, lambda);
}

double Estimator::phi(double x) const {
  if (kind_ == Kind::least_squares) return x * x;
  const double l2 = lambda_ * lambda_;
  return l2 * std::log1p(x * x / l2);
}

double Estimator::dphi(double x) const {
  if (kind_ == Kind::least_squares) return 2.0 * x;
  return 2.0 * x / (1.0 + x * x / (lambda_ * lambda_));
}

double Estimator::d2phi(double x) const {
  if (kind_ == Kind::least_squares) return 2.0;
  const double s = x * x / (lambda_ * lambda_);
  return 2.0 * (1.0 - s) / ((1.0 + s) * (1.0 + s));
}

double Estimator::weight(double r) const {
  if (r == 0.0) return 0.0;
  if (kind_ == Kind::least_squares) return 2.0;
  return 2.0 / (1.0 + r * r / (lambda_ * lambda_));
}

MajorizationCheck check_majorization(const std::function<double(double)>& dphi,
                                     const std::function<double(double)>& d2phi,
                                     std::span<const double> grid) {
  if (grid.empty()) throw DomainError("check_majorization: empty grid");
  MajorizationCheck out;
  out.worst_margin = std::numeric_limits<double>::infinity();
  for (double x : grid) {
    const double margin = x == 0.0 ? 0.0 : dphi(x) / x - d2phi(x);
    out.worst_margin = std::min(out.worst_margin, margin);
  }
  out.holds = out.worst_margin >= -1e-12;
  return out;
}

MajorizationCheck check_majorization(const Estimator& est, std::span<const double> grid) {
  return check_majorization([&](double x) { return est.dphi(x); },
                            [&](double x) { return est.d2phi(x); }, grid);
}

}  // namespace nearps
