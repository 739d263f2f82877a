#include <gtest/gtest.h>

#include <cmath>

#include "mflab/bounds.hpp"
#include "mflab/error.hpp"

using namespace mflab;

namespace {

BoundInputs inputs(double sigma, double lambda, double beta, double B, std::size_t d = 1) {
  BoundInputs in;
  in.sigma = sigma;
  in.lambda = lambda;
  in.beta_hat = beta;
  in.B = B;
  in.d = d;
  in.d_prox = 1;
  return in;
}

void expect_rel(double got, double want, double rel = 1e-12) { EXPECT_NEAR(got, want, rel * std::abs(want)); }

}  // namespace

TEST(HeatflowBound, EmptyTerms) {
  EXPECT_DOUBLE_EQ(heatflow_lipschitz_bound(0.0, {}), 1.0);
  expect_rel(heatflow_lipschitz_bound(3.0, {}), 0.5);
}

TEST(HeatflowBound, SingleTerm) {
  expect_rel(heatflow_lipschitz_bound(1.0, {{2.0, 2.0}}), std::exp(0.5) / std::sqrt(2.0));
}

TEST(HeatflowBound, RejectsBadInputs) {
  EXPECT_THROW(heatflow_lipschitz_bound(-1.0, {}), DomainError);
  EXPECT_THROW(heatflow_lipschitz_bound(1.0, {{1.0, 1.0}}), DomainError);
  EXPECT_THROW(heatflow_lipschitz_bound(1.0, {{-1.0, 2.0}}), DomainError);
}

TEST(MainBound, NoPerturbation) {
  for (double s : {0.5, 1.0, 3.0})
    for (double l : {0.25, 1.0, 7.0}) expect_rel(main_bound(inputs(s, l, 0, 0), MainVariant::Generic), s / std::sqrt(l));
}

TEST(MainBound, UnitGeneric) { expect_rel(main_bound(inputs(1, 1, 1, 0), MainVariant::Generic), std::exp(1.0)); }

TEST(MainBound, MonotoneInEachArgument) {
  const double base = main_bound(inputs(1, 1, 0.5, 0.5, 1), MainVariant::Generic);
  EXPECT_GT(main_bound(inputs(1, 1, 0.6, 0.5, 1), MainVariant::Generic), base);
  EXPECT_GT(main_bound(inputs(1, 1, 0.5, 0.6, 1), MainVariant::Generic), base);
  EXPECT_GT(main_bound(inputs(1, 1, 0.5, 0.5, 2), MainVariant::Generic), base);
}

TEST(MainBound, SpecificNeverExceedsGeneric) {
  int checked = 0;
  for (double s : {0.5, 1.0, 2.0, 4.0})
    for (double l : {0.5, 1.0, 3.0})
      for (double Lh : {0.5, 1.0, 1.5})
        for (double Lell : {0.0, 1.0, 2.0}) {
          BoundInputs in = inputs(s, l, 0, 0);
          in.L_h = Lh;
          in.L_ell = Lell;
          in.beta_ell = 0.7;
          in.beta_hat = Lh * Lh * in.beta_ell;
          in.B = Lh * Lell;
          EXPECT_LE(main_bound(in, MainVariant::Specific), main_bound(in, MainVariant::Generic) * (1 + 1e-14));
          EXPECT_LE(main_bound(in, MainVariant::Specific), main_bound(in, MainVariant::SpecificFull) * (1 + 1e-14));
          ++checked;
        }
  EXPECT_GE(checked, 100);
}

TEST(LsiPert, Examples) {
  expect_rel(lsi_pert_bound(3.0, 0.0), 1.0 / 3.0);
  expect_rel(lsi_pert_bound(1.0, 1.0), std::exp(5.0));
  expect_rel(lsi_pert_bound(4.0, 2.0), std::exp(5.0) / 4.0);
}

TEST(LsiPi, Examples) {
  expect_rel(lsi_pi_bound(inputs(1.5, 2.0, 0, 0)), 1.5 * 1.5 / 4.0);
  expect_rel(lsi_pi_bound(inputs(1, 1, 0, 1)), 0.5 * std::exp(2.0 + 4.0 * std::sqrt(2.0)));
  expect_rel(lsi_pi_bound(inputs(2, 1, 0, 0)), 4.0 * lsi_pi_bound(inputs(1, 1, 0, 0)));
}

TEST(Songbo, Examples) {
  expect_rel(songbo_bound(0.0, 3, 0.5, 2.0, 10.0), 2.0 / 2.0);
  EXPECT_NEAR(songbo_bound(0.0, 3, 1e-9, 2.0, 10.0), 0.5, 1e-8);
  double prev = 0.0;
  for (double k = 0.0; k <= 0.2; k += 0.02) {
    const double v = songbo_bound(k, 2, 0.5, 1.0, 1e4);
    EXPECT_GT(v, prev);
    prev = v;
  }
  EXPECT_THROW(songbo_bound(5.0, 1, 0.5, 1.0, 4.0), DomainError);
}

TEST(Winf, Examples) {
  EXPECT_EQ(winf_bound(2.0, 0.0), 0.0);
  expect_rel(winf_bound(2.0, 3.0), 1.5);
  expect_rel(winf_bound(6.0, 9.0), winf_bound(2.0, 3.0));
}

TEST(Rescale, Identity) {
  const auto r = rescale_parameters(inputs(2.0, 4.0, 0.3, 0.7));
  expect_rel(r.beta_hat, 0.3);
  expect_rel(r.lambda, 4.0);
  expect_rel(r.B, 0.7);
  EXPECT_TRUE(r.rescaled);
}

TEST(Rescale, Substitution) {
  const auto r = rescale_parameters(inputs(1, 4, 1, 1));
  expect_rel(r.beta_hat, 0.25);
  expect_rel(r.lambda, 1.0);
  expect_rel(r.B, 0.5);
}

TEST(Rescale, RefusesTwice) {
  const auto r = rescale_parameters(inputs(1, 4, 1, 1));
  EXPECT_THROW(rescale_parameters(r), DomainError);
}

TEST(Rescale, ExponentInvariant) {
  for (double l : {0.5, 2.0, 9.0}) {
    const auto in = inputs(1.3, l, 0.4, 0.8, 2);
    const auto r = rescale_parameters(in);
    EXPECT_NEAR(main_bound_exponent(r, MainVariant::Generic), main_bound_exponent(in, MainVariant::Generic), 1e-12);
    // L scales with 1/eta.
    expect_rel(main_bound(in, MainVariant::Generic), main_bound(r, MainVariant::Generic) * 1.3 / std::sqrt(l));
  }
}

TEST(Poc, Examples) {
  EXPECT_EQ(poc_bound(inputs(1, 1, 0, 1), 1.0, 1.0, PocVariant::Generic), 0.0);
  expect_rel(poc_bound(inputs(1, 1, 1, 0), 1.0, 1.0, PocVariant::Generic), 4.0);
  expect_rel(poc_bound(inputs(1, 1, 1, 0), 1.0, 1.0, PocVariant::ExampleNN), 1.0);
}

TEST(Regime, Threshold) {
  expect_rel(regime_threshold(inputs(1, 1, 1, 2)), 1.0 / 79.0);
  EXPECT_TRUE(std::isinf(regime_threshold(inputs(1, 1, 0, 0))));
  expect_rel(alpha_t(inputs(1, 1, 0, 0), 0.5), 3.0);
}

TEST(Parse, Variants) {
  EXPECT_EQ(parse_main_variant("specific_full"), MainVariant::SpecificFull);
  EXPECT_EQ(to_string(parse_poc_variant("example_nn")), "example_nn");
  EXPECT_THROW(parse_main_variant("x"), std::exception);
}
