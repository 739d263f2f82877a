#include <gtest/gtest.h>

#include <cmath>

#include "mflab/chaos.hpp"
#include "mflab/meanfield.hpp"
#include "mflab/presets.hpp"

using namespace mflab;

namespace {

ChaosConfig small_config() {
  ChaosConfig c;
  c.mcmc.n_samples = 8000;
  c.mcmc.n_burnin = 1000;
  c.pi_draws = 40000;
  return c;
}

// KL between the exact N-particle Gaussian and the product Gaussian for the
// quadratic oracle: one direction (the particle mean) has precision ratio
// lambda/(lambda + kappa), the rest agree.
double quadratic_kl(double lambda, double kappa) {
  const double r = lambda / (lambda + kappa);
  return 0.5 * (r - 1.0 - std::log(r));
}

}  // namespace

TEST(Bregman, Cases) {
  const auto q = ModelSpec::quadratic_oracle(1, 1, 2.0, 0.3, Vec::Ones(1));
  const auto pibar = solve_self_consistent(q, std::nullopt, default_grid(q, std::nullopt, 1025)).mean_measure;
  EXPECT_NEAR(bregman_divergence(q, Measure{pibar}, pibar), 0.0, 1e-14);
  const GaussianMeasure nu(Vec::Constant(1, 1.1), Mat::Constant(1, 1, 0.3));
  const double d = 1.1 - pibar.mean()[0];
  EXPECT_NEAR(bregman_divergence(q, Measure{nu}, pibar), 0.5 * 2.0 * d * d, 1e-10);
  const auto z = zero_preset();
  const auto zp = solve_self_consistent(z, std::nullopt, default_grid(z, std::nullopt, 513)).mean_measure;
  EXPECT_EQ(bregman_divergence(z, Measure{nu}, zp), 0.0);
}

TEST(Bregman, NonnegativeForNetwork) {
  const auto m = relu_preset();
  const auto pibar = solve_self_consistent(m, std::nullopt, default_grid(m, std::nullopt, 1025)).mean_measure;
  for (double mu : {-2.0, -0.5, 0.0, 0.7, 3.0})
    EXPECT_GE(bregman_divergence(m, Measure{GaussianMeasure(Vec::Constant(1, mu), Mat::Constant(1, 1, 0.2))}, pibar),
              -1e-12);
}

TEST(EstimateKl, ZeroModel) {
  const auto r = estimate_kl(zero_preset(), 4, small_config(), 1);
  EXPECT_EQ(r.bregman_mu.value, 0.0);
  EXPECT_EQ(r.bregman_pi.value, 0.0);
  EXPECT_NEAR(r.kl.value, 0.0, std::max(r.kl.half_width, 1e-12));
  EXPECT_TRUE(r.checks.all());
}

TEST(EstimateKl, QuadraticOracle) {
  const auto r = estimate_kl(quadratic_preset(), 4, small_config(), 2);
  EXPECT_NEAR(r.kl.value, quadratic_kl(1.0, 1.0), 2 * r.kl.half_width);
  EXPECT_NEAR(r.log_Z.value, -0.5 * std::log(2.0), 2 * r.log_Z.half_width + 1e-3);
  EXPECT_TRUE(r.checks.jensen);
  EXPECT_TRUE(r.checks.all());
}

TEST(EstimateKl, Reproducible) {
  const auto a = estimate_kl(relu_preset(), 2, small_config(), 3);
  const auto b = estimate_kl(relu_preset(), 2, small_config(), 3);
  EXPECT_EQ(a.kl.value, b.kl.value);
  EXPECT_EQ(a.log_Z.half_width, b.log_Z.half_width);
}

TEST(BatchMeans, ConstantSeries) {
  const auto e = batch_means(std::vector<double>(100, 2.5), 2, 5, 1.96);
  EXPECT_DOUBLE_EQ(e.value, 2.5);
  EXPECT_EQ(e.half_width, 0.0);
}
