#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qtraj/quadrature.hpp"

using namespace qtraj;

TEST(GaussHermite, TwoNodeRule) {
  const auto r = quad::gauss_hermite(2);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_NEAR(r.nodes[0], -1.0 / std::numbers::sqrt2, 1e-15);
  EXPECT_NEAR(r.nodes[1], 1.0 / std::numbers::sqrt2, 1e-15);
  EXPECT_NEAR(r.weights[0], std::sqrt(std::numbers::pi) / 2.0, 1e-15);
  EXPECT_NEAR(r.weights[1], std::sqrt(std::numbers::pi) / 2.0, 1e-15);
}

TEST(GaussHermite, ExactThroughDegree2nMinus1) {
  for (int n = 1; n <= 12; ++n) {
    const auto r = quad::gauss_hermite(n);
    for (int deg = 0; deg <= 2 * n - 1; ++deg) {
      double s = 0.0, scale = 0.0;
      for (std::size_t i = 0; i < r.size(); ++i) {
        s += r.weights[i] * std::pow(r.nodes[i], deg);
        scale += r.weights[i] * std::pow(std::abs(r.nodes[i]), deg);
      }
      // integral x^deg exp(-x^2) = Gamma((deg+1)/2) for even deg, 0 for odd.
      const double want = deg % 2 == 0 ? std::tgamma((deg + 1) / 2.0) : 0.0;
      EXPECT_NEAR(s, want, 1e-12 * std::max(1.0, scale)) << "n=" << n << " deg=" << deg;
    }
  }
}

TEST(GaussHermite, NotExactAtDegree2n) {
  const auto r = quad::gauss_hermite(2);
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], 4);
  EXPECT_GT(std::abs(s - std::tgamma(2.5)), 0.1);
}

TEST(GaussLaguerre, ExactThroughDegree2nMinus1) {
  for (int n = 1; n <= 10; ++n) {
    const auto r = quad::gauss_laguerre(n);
    for (int deg = 0; deg <= 2 * n - 1; ++deg) {
      double s = 0.0;
      for (std::size_t i = 0; i < r.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], deg);
      const double want = std::tgamma(deg + 1.0);
      EXPECT_NEAR(s / want, 1.0, 1e-11) << "n=" << n << " deg=" << deg;
    }
  }
}

TEST(Quadrature, RejectsEmptyRules) {
  EXPECT_THROW(quad::gauss_hermite(0), ConfigError);
  EXPECT_THROW(quad::gauss_laguerre(0), ConfigError);
}
