#pragma once

#include <functional>
#include <span>

namespace nearps {

/// An even M-estimator phi with phi(0) = 0.
class Estimator {
 public:
  enum class Kind { least_squares, cauchy };

  static Estimator least_squares() { return Estimator(Kind::least_squares, 0.0); }
  /// phi(x) = lambda^2 log(1 + x^2 / lambda^2).
  static Estimator cauchy(double lambda = 0.1);

  Kind kind() const { return kind_; }
  double lambda() const { return lambda_; }

  double phi(double x) const;
  double dphi(double x) const;
  double d2phi(double x) const;

  /// phi'(r) / r, or 0 at r = 0.
  double weight(double r) const;

 private:
  Estimator(Kind kind, double lambda) : kind_(kind), lambda_(lambda) {}

  Kind kind_;
  double lambda_;
};

struct MajorizationCheck {
  bool holds = true;
  double worst_margin = 0.0;
};

/// Checks phi'(x)/x - phi''(x) >= -1e-12 on the grid, using the analytic limit
/// at x = 0 (where the margin is 0 for any smooth even phi).
MajorizationCheck check_majorization(const Estimator& est, std::span<const double> grid);

/// Same check for an arbitrary (phi', phi'') pair.
MajorizationCheck check_majorization(const std::function<double(double)>& dphi,
                                     const std::function<double(double)>& d2phi,
                                     std::span<const double> grid);

/// The {.}_+ applied to shading values, with its subderivative chi.
class ShadowOperator {
 public:
  enum class Kind { identity, positive_part };

  static ShadowOperator identity() { return ShadowOperator(Kind::identity); }
  static ShadowOperator positive_part() { return ShadowOperator(Kind::positive_part); }

  Kind kind() const { return kind_; }

  double apply(double x) const { return kind_ == Kind::identity ? x : (x > 0.0 ? x : 0.0); }
  /// chi(0) = 0 for the positive part.
  double chi(double x) const { return kind_ == Kind::identity ? 1.0 : (x > 0.0 ? 1.0 : 0.0); }

 private:
  explicit ShadowOperator(Kind kind) : kind_(kind) {}

  Kind kind_;
};

}  // namespace nearps
