#include <gtest/gtest.h>

#include <cmath>

#include "mflab/error.hpp"
#include "mflab/measure.hpp"

using namespace mflab;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::shared_ptr<const Grid> line(double lo = -10, double hi = 10, std::size_t n = 2048) {
  return Grid::make({Axis{lo, hi, n}});
}

GridDensity gauss(double m, double s2, std::shared_ptr<const Grid> g = line(-14, 14, 4001)) {
  return gaussian_on_grid(std::move(g), Vec::Constant(1, m), Mat::Constant(1, 1, s2));
}

}  // namespace

TEST(Normalize, StandardGaussian) {
  auto g = line();
  const auto p = normalize_from_log_potential(g, [](const auto& x) { return -0.5 * x[0] * x[0]; });
  EXPECT_NEAR(p.mass(), 1.0, 1e-8);
  double err = 0.0;
  for (std::size_t k = 0; k < g->size(); ++k) {
    const double x = g->node(k)[0];
    err = std::max(err, std::abs(p.density()[k] - std::exp(-0.5 * x * x) / std::sqrt(2 * kPi)));
  }
  EXPECT_LT(err, 1e-8);
}

TEST(Normalize, ConstantIsUniform) {
  auto g = line(-2, 3, 101);
  const auto p = normalize_from_log_potential(g, Vec::Constant(101, 4.2));
  for (Eigen::Index k = 0; k < 101; ++k) EXPECT_NEAR(p.density()[k], 0.2, 1e-14);
}

TEST(Normalize, ShiftInvariant) {
  auto g = line();
  Vec lu(g->size());
  for (std::size_t k = 0; k < g->size(); ++k) lu[k] = -std::abs(g->node(k)[0]) + 0.1 * g->node(k)[0];
  const auto a = normalize_from_log_potential(g, lu);
  const auto b = normalize_from_log_potential(g, (lu.array() + 37.5).matrix());
  EXPECT_LT((a.density() - b.density()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Normalize, EmptyThrows) {
  auto g = line(-1, 1, 11);
  EXPECT_THROW(normalize_from_log_potential(g, Vec::Constant(11, -INFINITY)), EmptyMeasure);
}

TEST(Normalize, TwoDimensional) {
  auto g = Grid::make({Axis{-9, 9, 301}, Axis{-9, 9, 301}});
  Mat cov(2, 2);
  cov << 1.0, 0.3, 0.3, 0.5;
  const auto p = gaussian_on_grid(g, Vec::Zero(2), cov);
  EXPECT_NEAR(p.mass(), 1.0, 1e-8);
  EXPECT_LT((p.covariance() - cov).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Kl, Identical) { EXPECT_NEAR(kl_divergence(gauss(0, 1), gauss(0, 1)), 0.0, 1e-15); }

TEST(Kl, GaussianShift) { EXPECT_NEAR(kl_divergence(gauss(0, 1), gauss(0.7, 1)), 0.49 / 2, 1e-6); }

TEST(Kl, GaussianScale) {
  const double s2 = 0.6;
  EXPECT_NEAR(kl_divergence(gauss(0, s2), gauss(0, 1)), (s2 - 1 - std::log(s2)) / 2, 1e-6);
}

TEST(Kl, SupportError) {
  auto g = line(-1, 1, 11);
  Vec lq = Vec::Zero(11);
  lq[3] = -INFINITY;
  const auto q = normalize_from_log_potential(g, lq);
  const auto p = normalize_from_log_potential(g, Vec::Zero(11));
  EXPECT_THROW(kl_divergence(p, q), SupportError);
}

TEST(Covariance, GaussianMeasureExact) {
  Mat cov(2, 2);
  cov << 2.0, 0.5, 0.5, 1.0;
  const auto s = covariance_opnorm(GaussianMeasure(Vec::Zero(2), cov));
  EXPECT_EQ(s.covariance, cov);
  EXPECT_NEAR(s.opnorm, 1.5 + std::sqrt(0.5), 1e-12);
}

TEST(Covariance, GridGaussian) { EXPECT_NEAR(covariance_opnorm(gauss(0.3, 0.45)).opnorm, 0.45, 1e-6); }

TEST(Covariance, TwoAtoms) {
  Points x(2, 1);
  x << -1.0, 1.0;
  EXPECT_DOUBLE_EQ(covariance_opnorm(EmpiricalMeasure(x)).opnorm, 1.0);
}

TEST(W2, Cases) {
  EXPECT_NEAR(w2_distance_1d(gauss(0, 1), gauss(0, 1)), 0.0, 1e-6);
  EXPECT_NEAR(w2_distance_1d(gauss(0, 1), gauss(0.8, 1)), 0.8, 1e-6);
  EXPECT_NEAR(w2_distance_1d(gauss(0, 1), gauss(0, 0.49)), 0.3, 1e-6);
}

TEST(Quantile, InvertsCdf) {
  const auto p = gauss(0, 1);
  const Vec F = cumulative_1d(p);
  EXPECT_NEAR(quantile_1d(p, F, 0.5), 0.0, 1e-9);
  EXPECT_NEAR(quantile_1d(p, F, 0.975), 1.959963984540054, 1e-7);
}

TEST(Lsi, GaussianQuotientBelowConstant) {
  // N(0, s2) has log-Sobolev constant s2; the quotient of g = exp(x) attains it.
  const double s2 = 0.7;
  const auto p = gauss(0, s2);
  Vec g(p.size()), dg(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double x = p.grid().node(k)[0];
    g[k] = std::exp(0.5 * x);
    dg[k] = 0.5 * g[k];
  }
  EXPECT_NEAR(lsi_quotient_1d(p, g, dg), s2, 1e-6);
}
