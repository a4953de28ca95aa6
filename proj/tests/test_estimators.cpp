#include <doctest.h>

#include <cmath>
#include <vector>

#include "nearps/errors.hpp"
#include "nearps/estimators.hpp"

using namespace nearps;

namespace {

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int k = 0; k < n; ++k) g.push_back(lo + (hi - lo) * k / (n - 1));
  return g;
}

}  // namespace

TEST_CASE("least squares") {
  const Estimator ls = Estimator::least_squares();
  CHECK(ls.phi(0.0) == 0.0);
  CHECK(ls.phi(-3.0) == 9.0);
  CHECK(ls.dphi(1.5) == 3.0);
  CHECK(ls.d2phi(7.0) == 2.0);
  CHECK(ls.weight(0.4) == 2.0);
  CHECK(ls.weight(0.0) == 0.0);
}

TEST_CASE("cauchy values") {
  const Estimator c = Estimator::cauchy(0.1);
  CHECK(c.phi(0.0) == 0.0);
  CHECK(c.phi(0.1) == doctest::Approx(0.01 * std::log(2.0)).epsilon(1e-14));
  CHECK(c.dphi(0.1) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(c.weight(0.1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c.weight(0.0) == 0.0);
  CHECK(c.d2phi(0.0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(Estimator::cauchy(0.0), DomainError);
  CHECK_THROWS_AS(Estimator::cauchy(-1.0), DomainError);
  CHECK_THROWS_AS(Estimator::cauchy(NAN), DomainError);
}

TEST_CASE("estimator properties") {
  for (const Estimator& e : {Estimator::least_squares(), Estimator::cauchy(0.1), Estimator::cauchy(2.0)}) {
    for (double x : grid(-5.0, 5.0, 201)) {
      CHECK(e.phi(x) == doctest::Approx(e.phi(-x)).epsilon(1e-15));
      CHECK(e.phi(x) >= 0.0);
      const double h = 1e-5 * std::max(1.0, std::abs(x));
      const double fd1 = (e.phi(x + h) - e.phi(x - h)) / (2 * h);
      const double fd2 = (e.dphi(x + h) - e.dphi(x - h)) / (2 * h);
      CHECK(e.dphi(x) == doctest::Approx(fd1).epsilon(1e-6).scale(1.0));
      CHECK(e.d2phi(x) == doctest::Approx(fd2).epsilon(1e-6).scale(1.0));
      if (x != 0.0) CHECK(e.weight(x) * x == doctest::Approx(e.dphi(x)).epsilon(1e-14));
    }
    // phi increasing on the positive half-line.
    double prev = -1.0;
    for (double x : grid(0.0, 10.0, 101)) {
      CHECK(e.phi(x) > prev);
      prev = e.phi(x);
    }
  }
  // Cauchy grows logarithmically.
  const Estimator c = Estimator::cauchy(0.1);
  CHECK(c.phi(1e6) < 0.01 * std::log(1e14) + 1e-9);
}

TEST_CASE("majorization condition") {
  const std::vector<double> g = grid(-10.0, 10.0, 2001);
  for (const Estimator& e : {Estimator::least_squares(), Estimator::cauchy(0.1), Estimator::cauchy(3.0)}) {
    const MajorizationCheck m = check_majorization(e, g);
    CHECK(m.holds);
    CHECK(m.worst_margin >= -1e-12);
  }
  // phi(x) = x^4 has phi'/x - phi'' = -8 x^2 < 0.
  const MajorizationCheck quartic = check_majorization([](double x) { return 4 * x * x * x; },
                                                       [](double x) { return 12 * x * x; }, g);
  CHECK_FALSE(quartic.holds);
  CHECK(quartic.worst_margin == doctest::Approx(-800.0));
  CHECK_THROWS_AS(check_majorization(Estimator::least_squares(), std::vector<double>{}), DomainError);
}

TEST_CASE("shadow operator") {
  const ShadowOperator id = ShadowOperator::identity();
  const ShadowOperator pp = ShadowOperator::positive_part();
  CHECK(id.apply(-2.0) == -2.0);
  CHECK(id.chi(-2.0) == 1.0);
  CHECK(pp.apply(-2.0) == 0.0);
  CHECK(pp.apply(2.0) == 2.0);
  CHECK(pp.chi(0.0) == 0.0);
  CHECK(pp.chi(1e-300) == 1.0);
  CHECK(pp.chi(-1.0) == 0.0);
}
