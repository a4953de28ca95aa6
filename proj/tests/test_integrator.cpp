#include <doctest.h>

#include <cmath>
#include <random>

#include "nearps/errors.hpp"
#include "nearps/integrator.hpp"
#include "support.hpp"

using namespace nearps;

TEST_CASE("constant gradient gives a plane") {
  const PixelMask mask = PixelMask::full(5, 5);
  const GradientField zero{mask, Eigen::Matrix2Xd::Zero(2, mask.size())};
  const IntegrationResult flat = integrate_least_squares(zero, {0, std::log(700.0)});
  for (int j = 0; j < mask.size(); ++j) CHECK(flat.zmap.values[j] == doctest::Approx(std::log(700.0)));

  // Consistent affine field with Neumann zeros on the far edges.
  GradientField a{mask, Eigen::Matrix2Xd::Zero(2, mask.size())};
  for (int j = 0; j < mask.size(); ++j) {
    if (mask.right(j) >= 0) a.values(0, j) = 0.1;
    if (mask.down(j) >= 0) a.values(1, j) = -0.05;
  }
  const int anchor = mask.index(0, 0);
  const IntegrationResult ramp = integrate_least_squares(a, {anchor, 2.0});
  for (int j = 0; j < mask.size(); ++j) {
    CHECK(ramp.zmap.values[j] == doctest::Approx(2.0 + 0.1 * mask.col(j) - 0.05 * mask.row(j)).epsilon(1e-8));
  }
  CHECK(ramp.residual_history.size() == static_cast<std::size_t>(ramp.iterations + 1));
  CHECK(ramp.residual_history.back() < 1e-8);
}

TEST_CASE("integration recovers a sampled surface up to the anchor") {
  const auto s = test::small_scene(24, 60.0);
  const PixelMask& mask = s.truth.zmap.mask;
  const GradientOperator G(mask);
  const GradientField g{mask, G.apply(s.truth.zmap.values)};
  const int c = centroid_pixel(mask);
  const IntegrationResult r = integrate_least_squares(g, {c, s.truth.zmap.values[c]});
  CHECK(r.zmap.values[c] == s.truth.zmap.values[c]);
  CHECK((r.zmap.values - s.truth.zmap.values).cwiseAbs().maxCoeff() < 1e-7);

  SUBCASE("path integration agrees on a consistent field") {
    std::vector<std::pair<int, int>> path;
    int col = mask.col(c), row = mask.row(c);
    for (int k = 0; k < 5; ++k) path.emplace_back(++col, row);
    for (int k = 0; k < 7; ++k) path.emplace_back(col, --row);
    for (int k = 0; k < 3; ++k) path.emplace_back(--col, row);
    const double v = integrate_path(g, {c, s.truth.zmap.values[c]}, path);
    CHECK(v == doctest::Approx(s.truth.zmap.values[mask.index(col, row)]).epsilon(1e-12));
    CHECK(integrate_path(g, {c, 1.25}, {}) == 1.25);
  }
}

TEST_CASE("residual history is non-increasing in the normal-equations norm") {
  std::mt19937_64 rng(3);
  const PixelMask mask = PixelMask::full(12, 9);
  GradientField g{mask, Eigen::Matrix2Xd(2, mask.size())};
  for (Eigen::Index k = 0; k < g.values.size(); ++k) g.values(k) = test::uniform(rng, -1, 1);
  const IntegrationResult r = integrate_least_squares(g, {0, 0.0});
  // CG minimizes the energy norm, so |G z - g| itself decreases monotonically.
  for (std::size_t k = 1; k < r.residual_history.size(); ++k) {
    CHECK(r.residual_history[k] <= r.residual_history[k - 1] * (1 + 1e-12));
  }
  // Optimality: G^T (G z - g) vanishes.
  const GradientOperator G(mask);
  const Eigen::VectorXd normal = G.apply_transpose(G.apply(r.zmap.values) - g.values);
  CHECK(normal.norm() < 1e-7 * G.apply_transpose(g.values).norm());
}

TEST_CASE("integration input checks") {
  std::vector<std::uint8_t> inside{1, 1, 0, 1, 1,
                                   1, 1, 0, 1, 1};
  const PixelMask split(5, 2, inside);
  const GradientField g{split, Eigen::Matrix2Xd::Zero(2, split.size())};
  CHECK_THROWS_AS(integrate_least_squares(g, {0, 0.0}), DomainError);

  const PixelMask mask = PixelMask::full(3, 3);
  GradientField nan{mask, Eigen::Matrix2Xd::Zero(2, 9)};
  nan.values(0, 4) = NAN;
  CHECK_THROWS_AS(integrate_least_squares(nan, {0, 0.0}), DomainError);
  const GradientField ok{mask, Eigen::Matrix2Xd::Zero(2, 9)};
  CHECK_THROWS_AS(integrate_least_squares(ok, {9, 0.0}), DomainError);
  CHECK_THROWS_AS(integrate_path(ok, {0, 0.0}, {{2, 2}}), DomainError);

  std::vector<std::uint8_t> holes{1, 0, 1,
                                  1, 1, 1,
                                  1, 1, 1};
  const PixelMask holed(3, 3, holes);
  const GradientField h{holed, Eigen::Matrix2Xd::Zero(2, holed.size())};
  CHECK_THROWS_AS(integrate_path(h, {0, 0.0}, {{1, 0}}), DomainError);
  CHECK(centroid_pixel(mask) == mask.index(1, 1));
}
