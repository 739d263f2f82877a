#include <gtest/gtest.h>

#include <cmath>

#include "mflab/error.hpp"
#include "mflab/meanfield.hpp"
#include "mflab/presets.hpp"

using namespace mflab;

namespace {

constexpr double kPi = 3.14159265358979323846;

double max_gap_to_gaussian(const GridDensity& p, double m, double v) {
  double err = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double x = p.grid().node(k)[0];
    const double g = std::exp(-(x - m) * (x - m) / (2 * v)) / std::sqrt(2 * kPi * v);
    err = std::max(err, std::abs(p.density()[k] - g));
  }
  return err;
}

}  // namespace

TEST(Solver, ZeroModelIsGaussian) {
  const auto m = ModelSpec::zero(1, 1.3, 0.7);
  const auto sys = solve_self_consistent(m, std::nullopt, default_grid(m, std::nullopt, 2049));
  ASSERT_EQ(sys.per_particle.size(), 1u);
  EXPECT_LT(max_gap_to_gaussian(sys.mean_measure, 0.0, 1.3 * 1.3 / 1.4), 1e-7);
  EXPECT_NEAR(sys.mean_measure.mass(), 1.0, 1e-8);
}

TEST(Solver, QuadraticFixedPoint) {
  const double sigma = 0.8, lambda = 1.5, kappa = 2.0, c = -0.3;
  const auto m = ModelSpec::quadratic_oracle(sigma, lambda, kappa, c, Vec::Ones(1));
  const auto sys = solve_self_consistent(m, std::nullopt, default_grid(m, std::nullopt, 2049));
  // Stationarity of lambda x + kappa (mbar - c) at x = mbar.
  const double mbar = kappa * c / (lambda + kappa);
  EXPECT_NEAR(sys.mean_measure.mean()[0], mbar, 1e-6);
  EXPECT_NEAR(sys.mean_measure.covariance()(0, 0), sigma * sigma / (2 * lambda), 1e-6);
  EXPECT_LT(sys.residual, 1e-9);
}

TEST(Solver, TiltedZeroModel) {
  const auto m = ModelSpec::zero(1, 1.0, 1.0);
  const double t = 0.4;
  Points y(3, 1);
  y << -1.0, 0.5, 2.0;
  const TiltSpec tilt{t, y};
  const auto sys = solve_self_consistent(m, tilt, default_grid(m, tilt, 4097));
  ASSERT_EQ(sys.per_particle.size(), 3u);
  const double a = 2.0 - 1.0 + 1.0 / t;
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_LT(max_gap_to_gaussian(sys.per_particle[i], y(i, 0) / (t * a), 1.0 / a), 1e-7);
}

TEST(Solver, MeanIsAverage) {
  const auto m = relu_preset();
  Points y(2, 1);
  y << -0.5, 1.0;
  const TiltSpec tilt{0.7, y};
  const auto sys = solve_self_consistent(m, tilt, default_grid(m, tilt, 1025));
  const Vec avg = 0.5 * (sys.per_particle[0].density() + sys.per_particle[1].density());
  EXPECT_LT((avg - sys.mean_measure.density()).cwiseAbs().maxCoeff(), 1e-12);
  for (const auto& p : sys.per_particle) EXPECT_NEAR(p.mass(), 1.0, 1e-8);
  EXPECT_LT(proximal_residual(sys, m, tilt), 1e-9);
}

TEST(Residual, ShiftedZeroSystem) {
  const auto m = ModelSpec::zero(1, 1.0, 1.0);
  auto sys = solve_self_consistent(m, std::nullopt, default_grid(m, std::nullopt, 2049));
  const auto shifted = gaussian_on_grid(sys.mean_measure.grid_ptr(), Vec::Constant(1, 0.1), Mat::Constant(1, 1, 0.5));
  sys.per_particle[0] = shifted;
  sys.mean_measure = shifted;
  EXPECT_NEAR(proximal_residual(sys, m, std::nullopt), max_gap_to_gaussian(shifted, 0.0, 0.5), 1e-12);
}

TEST(Residual, RelabelInvariant) {
  const auto m = relu_preset();
  Points y = Points::Constant(3, 1, 0.4);
  const TiltSpec tilt{0.5, y};
  auto sys = solve_self_consistent(m, tilt, default_grid(m, tilt, 1025));
  const double before = proximal_residual(sys, m, tilt);
  std::swap(sys.per_particle[0], sys.per_particle[2]);
  EXPECT_EQ(proximal_residual(sys, m, tilt), before);
}

TEST(Solver, NonConvergenceCarriesTrace) {
  const auto m = relu_preset();
  SolverConfig cfg;
  cfg.max_iter = 2;
  cfg.tol = 1e-15;
  try {
    solve_self_consistent(m, std::nullopt, default_grid(m, std::nullopt, 513), cfg);
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_EQ(e.residual_trace.size(), 2u);
  }
}

TEST(Solver, RejectsBadDamping) {
  const auto m = relu_preset();
  SolverConfig cfg;
  cfg.damping = 0.0;
  EXPECT_THROW(solve_self_consistent(m, std::nullopt, default_grid(m, std::nullopt, 513), cfg), InvalidInput);
}
