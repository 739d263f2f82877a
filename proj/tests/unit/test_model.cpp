#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mflab/error.hpp"
#include "mflab/model.hpp"
#include "mflab/presets.hpp"

using namespace mflab;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

Measure gaussian(double m, double s2) { return GaussianMeasure(v1(m), Mat::Constant(1, 1, s2)); }

Measure grid_gaussian(double m, double s2) {
  auto g = Grid::make({Axis{-12, 12, 4001}});
  return gaussian_on_grid(g, v1(m), Mat::Constant(1, 1, s2));
}

ModelSpec tanh_model() {
  std::vector<Datum> data{{v1(0.7), 0.3, 0.5}, {v1(-1.2), -0.4, 0.5}};
  return ModelSpec::example_nn(1.0, 1.0, data, Loss{LossKind::Squared, 1.0, 2.0}, Activation::Tanh);
}

}  // namespace

TEST(Energy, ZeroModel) { EXPECT_EQ(energy(zero_preset(), gaussian(0.3, 2.0)), 0.0); }

TEST(Energy, QuadraticAtom) {
  const auto m = ModelSpec::quadratic_oracle(1, 1, 2.0, 0.0, v1(1));
  EXPECT_DOUBLE_EQ(energy(m, EmpiricalMeasure(Points::Constant(1, 1, 3.0))), 9.0);
}

TEST(Energy, NetworkAgainstMonteCarlo) {
  std::vector<Datum> data{{v1(1.5), 0.2, 1.0}};
  const auto m = ModelSpec::example_nn(1, 1, data, Loss{}, Activation::ReLU);
  const double mean = 0.4, sd = 0.9;
  std::mt19937_64 gen(12345);
  std::normal_distribution<double> normal(mean, sd);
  const int n = 1000000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double h = std::max(0.0, 1.5 * normal(gen));
    s += h;
    s2 += h * h;
  }
  const double fhat = s / n;
  const double se = std::sqrt((s2 / n - fhat * fhat) / n);
  const double f = m.features(gaussian(mean, sd * sd))[0];
  EXPECT_NEAR(f, fhat, 3 * se);
  const double r = fhat - 0.2;
  EXPECT_NEAR(energy(m, gaussian(mean, sd * sd)), 0.5 * r * r, 3 * se * std::abs(r) + 1e-12);
}

TEST(FirstVariation, ZeroModel) { EXPECT_EQ(first_variation(zero_preset(), gaussian(1, 1), v1(2)), 0.0); }

TEST(FirstVariation, QuadraticHand) {
  const auto m = ModelSpec::quadratic_oracle(1, 1, 1.0, 0.0, v1(1));
  EXPECT_NEAR(first_variation(m, gaussian(0.7, 0.5), v1(-2.0)), 0.7 * -2.0, 1e-12);
}

TEST(FirstVariation, GateauxDerivative) {
  for (const auto& m : {relu_preset(), tanh_model()}) {
    const auto p = std::get<GridDensity>(grid_gaussian(0.2, 0.6));
    const auto q = std::get<GridDensity>(grid_gaussian(-0.5, 1.3));
    const double s = 1e-5;
    const double fd = (energy(m, mix(p, q, s)) - energy(m, p)) / s;
    const Vec fp = m.features(p);
    const double exact = q.expect([&](const auto& x) { return m.first_variation_at(fp, x); }) -
                         p.expect([&](const auto& x) { return m.first_variation_at(fp, x); });
    EXPECT_NEAR(fd, exact, 1e-4 * std::abs(exact));
  }
}

TEST(FirstVariation, QuadraticMatchesNetworkPath) {
  const double kappa = 1.7, c = 0.3;
  const auto q = ModelSpec::quadratic_oracle(1, 1, kappa, c, v1(1));
  std::vector<Datum> data{{v1(1), c, 1.0}};
  const auto n = ModelSpec::example_nn(1, 1, data, Loss{LossKind::Squared, kappa}, Activation::Identity);
  std::mt19937_64 gen(7);
  std::normal_distribution<double> z;
  for (int i = 0; i < 50; ++i) {
    const auto nu = gaussian(z(gen), 0.5 + std::abs(z(gen)));
    const Vec x = v1(3 * z(gen));
    EXPECT_NEAR(first_variation(q, nu, x), first_variation(n, nu, x), 1e-10);
  }
}

TEST(WassersteinGradient, ZeroModel) {
  EXPECT_EQ(wasserstein_gradient(zero_preset(2), GaussianMeasure(Vec::Zero(2), Mat::Identity(2, 2)), Vec::Ones(2)),
            Vec::Zero(2));
}

TEST(WassersteinGradient, FiniteDifferences) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> z;
  for (const auto& m : {relu_preset(), tanh_model()}) {
    for (int i = 0; i < 20; ++i) {
      const auto nu = gaussian(z(gen), 0.3 + std::abs(z(gen)));
      double x = 2 * z(gen);
      // Stay away from the ReLU kinks at x = 0.
      if (std::abs(x) < 0.05) x += 0.1;
      const double h = 1e-6;
      const double fd = (first_variation(m, nu, v1(x + h)) - first_variation(m, nu, v1(x - h))) / (2 * h);
      EXPECT_NEAR(wasserstein_gradient(m, nu, v1(x))[0], fd, 1e-5);
    }
  }
}

TEST(WassersteinGradient, BoundedByLhLell) {
  const auto m = relu_preset();
  const auto c = model_constants(m);
  std::mt19937_64 gen(11);
  std::normal_distribution<double> z;
  for (int i = 0; i < 1000; ++i) {
    const auto nu = gaussian(3 * z(gen), 0.1 + std::abs(z(gen)));
    EXPECT_LE(wasserstein_gradient(m, nu, v1(5 * z(gen))).norm(), c.L_h * c.L_ell + 1e-12);
  }
}

TEST(SecondVariation, Cases) {
  EXPECT_EQ(second_variation(zero_preset(), gaussian(0, 1), v1(1), v1(2)), 0.0);
  const auto q = ModelSpec::quadratic_oracle(1, 1, 2.5, 0.0, v1(1));
  EXPECT_NEAR(second_variation(q, gaussian(0, 1), v1(1.2), v1(-0.5)), 2.5 * 1.2 * -0.5, 1e-12);
  const auto m = relu_preset();
  const auto nu = gaussian(0.1, 0.8);
  EXPECT_EQ(second_variation(m, nu, v1(0.3), v1(-1.1)), second_variation(m, nu, v1(-1.1), v1(0.3)));
}

TEST(Constants, Presets) {
  const auto relu = model_constants(relu_preset());
  EXPECT_DOUBLE_EQ(relu.L_h, 1.0);
  EXPECT_DOUBLE_EQ(relu.beta_hat, 1.0);
  EXPECT_DOUBLE_EQ(relu.B, 2.0);
  EXPECT_DOUBLE_EQ(relu.beta_hat, relu.L_h * relu.L_h * relu.beta_ell);
  EXPECT_DOUBLE_EQ(relu.B, relu.L_h * relu.L_ell);
  const auto zero = model_constants(zero_preset());
  EXPECT_EQ(zero.beta_hat, 0.0);
  EXPECT_EQ(zero.B, 0.0);
  EXPECT_DOUBLE_EQ(model_constants(ModelSpec::quadratic_oracle(1, 1, 3.0, 0, v1(1))).beta_hat, 3.0);
}

TEST(Validation, Rejects) {
  EXPECT_THROW(ModelSpec::zero(1, 0.0, 1.0), InvalidInput);
  EXPECT_THROW(ModelSpec::zero(1, 1.0, -1.0), InvalidInput);
  std::vector<Datum> bad{{v1(1), 0, 0.4}, {v1(2), 0, 0.4}};
  EXPECT_THROW(ModelSpec::example_nn(1, 1, bad, Loss{}, Activation::ReLU), InvalidInput);
  EXPECT_THROW(ModelSpec::quadratic_oracle(1, 1, 1, 0, v1(2)), InvalidInput);
  EXPECT_THROW(first_variation(relu_preset(), gaussian(0, 1), Vec::Zero(2)), InvalidInput);
}

TEST(Rescale, PushesThroughEta) {
  const auto m = ModelSpec::quadratic_oracle(1.0, 4.0, 1.0, 0.5, v1(1));
  const auto r = rescale_model(m);
  EXPECT_DOUBLE_EQ(r.eta(), 2.0);
  EXPECT_DOUBLE_EQ(r.lambda(), 1.0);
  EXPECT_TRUE(r.rescaled());
  // F0 of the pushforward: energy of delta_{eta x} under r equals energy of delta_x under m.
  EXPECT_NEAR(r.energy_at(r.point_features(v1(2.0 * 0.7))), m.energy_at(m.point_features(v1(0.7))), 1e-14);
  const auto n = relu_preset();
  const auto rn = rescale_model(n);
  EXPECT_NEAR(rn.energy_at(rn.point_features(v1(rn.eta() * -0.3))), n.energy_at(n.point_features(v1(-0.3))), 1e-14);
  EXPECT_THROW(rescale_model(r), std::exception);
}
