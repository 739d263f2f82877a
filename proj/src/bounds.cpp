#include "mflab/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "mflab/error.hpp"

namespace mflab {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0)) throw DomainError(std::string(name) + " must be positive");
}

void require_nonnegative(double v, const char* name) {
  if (!(v >= 0.0)) throw DomainError(std::string(name) + " must be nonnegative");
}

}  // namespace

void BoundInputs::validate() const {
  require_positive(sigma, "sigma");
  require_positive(lambda, "lambda");
  require_nonnegative(beta_hat, "beta_hat");
  require_nonnegative(B, "B");
  require_nonnegative(L_h, "L_h");
  require_nonnegative(L_ell, "L_ell");
  require_nonnegative(beta_ell, "beta_ell");
  if (d == 0) throw DomainError("d must be at least 1");
  if (N == 0) throw DomainError("N must be at least 1");
  if (d_prox != 1 && d_prox != d) throw DomainError("d_prox must be 1 or d");
}

double heatflow_lipschitz_bound(double a, const std::vector<HeatFlowTerm>& terms) {
  if (!(a > -1.0)) throw DomainError("heat-flow bound needs a > -1");
  const double ap1 = a + 1.0;
  double exponent = 0.0;
  for (const auto& term : terms) {
    if (!(term.k > 1.0)) throw DomainError("divergent integral: every k_m must exceed 1");
    require_nonnegative(term.C, "C_m");
    exponent += term.C / (2.0 * (term.k - 1.0) * std::pow(ap1, term.k - 1.0));
  }
  return std::exp(exponent) / std::sqrt(ap1);
}

double main_bound_exponent(const BoundInputs& in, MainVariant variant) {
  in.validate();
  const double s2 = in.sigma * in.sigma;
  const double lam = in.lambda;
  switch (variant) {
    case MainVariant::Generic: {
      const double beta = in.beta_hat, B = in.B, d = static_cast<double>(in.d);
      return beta * d / lam + B * B / (lam * s2) + beta * B * B * d / (lam * lam * s2) +
             beta * B * B * B * B / (lam * lam * lam * s2 * s2);
    }
    case MainVariant::Specific: {
      const double Lh2 = in.L_h * in.L_h, Ll = in.L_ell;
      return Lh2 * in.beta_ell / lam + Lh2 * Ll * Ll / (lam * s2) +
             Lh2 * Lh2 * Lh2 * Ll * Ll * Ll * Ll * in.beta_ell / (lam * lam * lam * s2 * s2);
    }
    case MainVariant::SpecificFull: {
      // Four-term exponent before the cross term is absorbed.
      const double beta = in.L_h * in.L_h * in.beta_ell, B = in.L_h * in.L_ell;
      return beta / lam + B * B / (lam * s2) + beta * B * B / (lam * lam * s2) +
             beta * B * B * B * B / (lam * lam * lam * s2 * s2);
    }
  }
  throw DomainError("unknown main-bound variant");
}

double main_bound(const BoundInputs& in, MainVariant variant) {
  return in.sigma / std::sqrt(in.lambda) * std::exp(main_bound_exponent(in, variant));
}

double lsi_pert_bound(double alpha, double L) {
  require_positive(alpha, "alpha");
  require_nonnegative(L, "L");
  return std::exp(L * L / alpha + 4.0 * L / std::sqrt(alpha)) / alpha;
}

double lsi_pi_bound(const BoundInputs& in) {
  require_positive(in.sigma, "sigma");
  require_positive(in.lambda, "lambda");
  require_nonnegative(in.B, "B");
  const double s = in.sigma, lam = in.lambda, B = in.B;
  return s * s / (2.0 * lam) *
         std::exp(2.0 * B * B / (lam * s * s) + 4.0 * std::sqrt(2.0) * B / (std::sqrt(lam) * s));
}

double songbo_bound(double kappa, std::size_t d, double epsilon, double rho, double N) {
  require_nonnegative(kappa, "kappa");
  require_positive(rho, "rho");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in (0, 1)");
  if (!(N > kappa)) throw DomainError("songbo bound needs N > kappa");
  const double inv_eps_m1 = 1.0 / epsilon - 1.0;
  const double dd = static_cast<double>(d);
  const double numer = 1.0 + 2.0 * dd * (5.0 + 3.0 * inv_eps_m1 * kappa) * kappa / (1.0 - kappa / N);
  const double denom = 1.0 - epsilon - (8.0 * kappa + 6.0 * inv_eps_m1) * kappa * kappa / N;
  if (!(denom > 0.0)) throw DomainError("songbo bound is vacuous: nonpositive denominator");
  return numer / denom / rho;
}

double winf_bound(double alpha, double L) {
  require_positive(alpha, "alpha");
  require_nonnegative(L, "L");
  return L / alpha;
}

BoundInputs rescale_parameters(const BoundInputs& in) {
  if (in.rescaled) throw DomainError("inputs are already rescaled");
  require_positive(in.sigma, "sigma");
  require_positive(in.lambda, "lambda");
  // x -> eta x with eta = sqrt(lambda)/sigma.
  const double eta = std::sqrt(in.lambda) / in.sigma;
  BoundInputs out = in;
  out.beta_hat = in.beta_hat / (eta * eta);
  out.lambda = in.sigma * in.sigma;
  out.B = in.B / eta;
  out.L_h = in.L_h / eta;
  out.rescaled = true;
  return out;
}

double poc_bound(const BoundInputs& in, double cbar_pi, double alpha, PocVariant variant) {
  if (!(alpha > 0.0)) throw DomainError("poc bound needs alpha > 0");
  if (!(cbar_pi > 0.0)) throw DomainError("poc bound needs a positive Poincare constant");
  const double s2 = in.sigma * in.sigma, s4 = s2 * s2;
  const double B2 = in.B * in.B;
  if (in.beta_hat == 0.0) return 0.0;
  if (variant == PocVariant::Generic) {
    const double d = static_cast<double>(in.d);
    const double second = 2.0 * d / alpha + 4.0 * B2 / (alpha * alpha * s4);
    return 4.0 * in.beta_hat / s2 * std::min(cbar_pi * d, second);
  }
  const double second = 2.0 / alpha + 8.0 * B2 / (alpha * alpha * s4);
  return in.beta_hat / s2 * std::min(cbar_pi, second);
}

double alpha_t(const BoundInputs& in, double t) {
  require_positive(t, "t");
  return 2.0 * in.lambda / (in.sigma * in.sigma) - 1.0 + 1.0 / t;
}

double regime_threshold(const BoundInputs& in) {
  const double s2 = in.sigma * in.sigma;
  const double bracket = 20.0 * in.B * in.B / (s2 * s2) - 2.0 * in.lambda / s2 + 1.0;
  if (!(bracket > 0.0)) return std::numeric_limits<double>::infinity();
  return 1.0 / bracket;
}

std::string to_string(PocVariant v) {
  return v == PocVariant::Generic ? "generic" : "example_nn";
}

std::string to_string(MainVariant v) {
  switch (v) {
    case MainVariant::Generic: return "generic";
    case MainVariant::Specific: return "specific";
    case MainVariant::SpecificFull: return "specific_full";
  }
  return "generic";
}

PocVariant parse_poc_variant(const std::string& s) {
  if (s == "generic") return PocVariant::Generic;
  if (s == "example_nn") return PocVariant::ExampleNN;
  throw InvalidInput("unknown poc variant '" + s + "'");
}

MainVariant parse_main_variant(const std::string& s) {
  if (s == "generic") return MainVariant::Generic;
  if (s == "specific") return MainVariant::Specific;
  if (s == "specific_full") return MainVariant::SpecificFull;
  throw InvalidInput("unknown main-bound variant '" + s + "'");
}

}  // namespace mflab
