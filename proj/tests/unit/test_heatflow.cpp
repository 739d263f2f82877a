#include <gtest/gtest.h>

#include <cmath>

#include "mflab/error.hpp"
#include "mflab/heatflow.hpp"
#include "mflab/presets.hpp"

using namespace mflab;

namespace {

std::shared_ptr<const Grid> line(double half, std::size_t n) { return Grid::make({Axis{-half, half, n}}); }

GridDensity gauss(std::shared_ptr<const Grid> g, double m, double v) {
  return gaussian_on_grid(std::move(g), Vec::Constant(1, m), Mat::Constant(1, 1, v));
}

double sup_gap(const GridDensity& a, const GridDensity& b) {
  return (a.density() - b.density()).cwiseAbs().maxCoeff();
}

BoundInputs unit_inputs() {
  BoundInputs in;
  in.sigma = in.lambda = 1.0;
  in.beta_hat = in.B = 0.0;
  return in;
}

}  // namespace

TEST(Tilt, GaussianCovariance) {
  const double s2 = 0.6;
  const auto mu = gauss(line(10, 8193), 0.0, s2);
  for (double t : {0.05, 0.5, 3.0})
    for (double y : {-2.0, 0.0, 1.5}) {
      const auto p = tilted_measure(mu, t, Vec::Constant(1, y), 1.0 / s2);
      EXPECT_NEAR(p.covariance()(0, 0), 1.0 / (1.0 / t - 1.0 + 1.0 / s2), 1e-8);
      EXPECT_NEAR(p.mass(), 1.0, 1e-8);
    }
}

TEST(Tilt, LargeTimeLimit) {
  const auto mu = finite_particle_density(relu_preset(), 1, line(8, 4097));
  const auto far = tilted_measure(mu, 1e12, Vec::Zero(1), 2.0);
  EXPECT_LT(sup_gap(far, tilt_limit(mu, 2.0)), 1e-8);
}

TEST(Tilt, PresetsNormalized) {
  for (const auto& name : preset_names()) {
    const auto m = rescale_model(preset_by_name(name));
    const auto mu = finite_particle_density(m, 1, line(8, 4097));
    EXPECT_NEAR(tilted_measure(mu, 0.3, Vec::Constant(1, 1.0), 2.0).mass(), 1.0, 1e-8) << name;
  }
}

TEST(Tilt, NonNormalizable) {
  const auto mu = gauss(line(10, 2049), 0.0, 2.0);
  EXPECT_THROW(tilted_measure(mu, 10.0, Vec::Zero(1), 0.5), DomainError);
}

TEST(Profile, ZeroModelExact) {
  const auto mu = finite_particle_density(zero_preset(), 1, line(8, 8193));
  const auto ts = profile_times(INFINITY, 40, 1.0);
  Points y(3, 1);
  y << -3, 0, 3;
  const auto prof = covariance_profile(mu, ts, y, unit_inputs());
  ASSERT_EQ(prof.rows.size(), 120u);
  for (const auto& r : prof.rows) {
    EXPECT_NEAR(r.opnorm, 1.0 / (1.0 + 1.0 / r.t), 1e-8);
    EXPECT_NEAR(r.alpha_t, 1.0 + 1.0 / r.t, 1e-12);
  }
  const auto fit = fit_regime_constants(prof, unit_inputs());
  EXPECT_LT(fit.small, 1e-6);
  EXPECT_TRUE(check_small_t(prof).pass);
}

TEST(Profile, LimitVariance) {
  const auto m = rescale_model(relu_preset());
  const auto mu = finite_particle_density(m, 1, line(8, 8193));
  Points y = Points::Zero(1, 1);
  auto in = model_constants(m);
  const auto prof = covariance_profile(mu, {1e8}, y, in);
  EXPECT_NEAR(prof.rows[0].opnorm, tilt_limit(mu, 2.0).covariance()(0, 0), 1e-6);
}

TEST(Profile, TimesAroundThreshold) {
  const auto ts = profile_times(0.5, 40);
  ASSERT_EQ(ts.size(), 40u);
  EXPECT_NEAR(ts.front(), 0.005, 1e-15);
  EXPECT_NEAR(ts.back(), 50.0, 1e-12);
}

TEST(Ou, GaussianStationary) {
  auto g = line(10, 2049);
  const auto gamma = gauss(g, 0.0, 1.0);
  for (double t : {0.01, 0.3, 2.0}) EXPECT_LT(sup_gap(ou_evolve(gamma, t), gamma), 1e-10);
}

TEST(Ou, GaussianMoments) {
  auto g = line(10, 2049);
  const double m = 0.8, s2 = 0.3;
  const auto mu = gauss(g, m, s2);
  for (double t : {0.001, 0.05, 0.5, 3.0}) {
    const auto p = ou_evolve(mu, t);
    EXPECT_NEAR(p.mean()[0], m * std::exp(-t), 1e-7);
    EXPECT_NEAR(p.covariance()(0, 0), 1.0 + (s2 - 1.0) * std::exp(-2 * t), 1e-7);
  }
}

TEST(Ou, Semigroup) {
  const auto mu = finite_particle_density(rescale_model(relu_preset()), 1, line(10, 2049));
  EXPECT_LT(sup_gap(ou_evolve(ou_evolve(mu, 0.2), 0.5), ou_evolve(mu, 0.7)), 1e-6);
}

TEST(Ou, TwoDimensionalMoments) {
  auto g = Grid::make({Axis{-8, 8, 257}, Axis{-8, 8, 257}});
  Mat cov(2, 2);
  cov << 0.5, 0.1, 0.1, 0.3;
  const auto mu = gaussian_on_grid(g, Vec::Zero(2), cov);
  const double t = 0.4, e = std::exp(-2 * t);
  const Mat want = e * cov + (1 - e) * Mat::Identity(2, 2);
  EXPECT_LT((ou_evolve(mu, t).covariance() - want).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Flow, GaussianIsIdentity) {
  const auto map = reverse_flow_map(gauss(line(10, 2049), 0.0, 1.0));
  EXPECT_LT((map.mapped - map.z).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Flow, LinearForGaussian) {
  const double s = 0.7;
  const auto map = reverse_flow_map(gauss(line(10, 2049), 0.0, s * s));
  for (Eigen::Index i = 0; i < map.z.size(); ++i)
    if (std::abs(map.z[i]) <= 4.0) EXPECT_NEAR(map.mapped[i], s * map.z[i], 1e-4);
  EXPECT_NEAR(lipschitz_estimate(map), s, 1e-4);
}

TEST(Flow, ReluPushforward) {
  auto g = line(10, 2049);
  const auto mu = finite_particle_density(rescale_model(relu_preset()), 1, g);
  const auto map = reverse_flow_map(mu);
  EXPECT_LT(w2_distance_1d(pushforward_density(map, g), mu), 1e-3);
  for (Eigen::Index i = 1; i < map.mapped.size(); ++i) ASSERT_GT(map.mapped[i], map.mapped[i - 1]);
}

TEST(Lipschitz, LinearMaps) {
  FlowMap id;
  id.z = Vec::LinSpaced(101, -6, 6);
  id.mapped = id.z;
  EXPECT_NEAR(lipschitz_estimate(id), 1.0, 1e-12);
  FlowMap lin = id;
  lin.mapped = 0.37 * id.z;
  EXPECT_NEAR(lipschitz_estimate(lin), 0.37, 1e-6);
}

TEST(Integrals, HeatFlowIdentity) {
  for (double a : {1.0, 2.0, 4.0})
    for (double k : {1.5, 2.0, 3.0, 4.0}) {
      EXPECT_NEAR(heat_flow_integral(a, k), 1.0 / (2.0 * (k - 1.0) * std::pow(a, k - 1.0)), 1e-6);
      EXPECT_NEAR(heat_flow_integral_closed(a, k), 1.0 / (2.0 * (k - 1.0) * std::pow(a, k - 1.0)), 1e-15);
    }
}

TEST(Integrals, LogTerm) {
  for (double a : {0.5, 1.0, 2.0, 4.0}) EXPECT_NEAR(log_term_integral(a), -0.5 * std::log(a), 1e-6);
}

TEST(Integrals, BoundComposesWithQuadrature) {
  for (double a : {0.0, 1.0, 3.0})
    for (double k : {1.5, 2.0, 3.0}) {
      const double C = 0.8;
      const double L = heatflow_lipschitz_bound(a, {{C, k}});
      EXPECT_NEAR(std::log(L) + 0.5 * std::log(a + 1.0), C * heat_flow_integral(a + 1.0, k), 1e-6);
    }
}

TEST(EnvelopeFit, RecoversInjectedConstant) {
  CovarianceProfile prof;
  const double a = 1.0, C = 0.3, k = 2.0;
  for (double t : {0.01, 0.1, 1.0, 10.0}) {
    ProfileRow r;
    r.t = t;
    const double p = a + 1.0 / t;
    r.opnorm = 1.0 / p + C / std::pow(p, k);
    prof.rows.push_back(r);
  }
  EXPECT_NEAR(fit_envelope_constant(prof, a, k), C, 1e-12);
  const auto fit = fit_heatflow_bound(prof, a, {2.0});
  EXPECT_NEAR(fit.bound, heatflow_lipschitz_bound(a, {{C, 2.0}}), 1e-12);
}
