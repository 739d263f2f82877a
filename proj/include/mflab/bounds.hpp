#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace mflab {

// Scalar constants consumed by every closed-form bound. B (and L_ell) may be
// +infinity for models whose Wasserstein gradient is unbounded.
struct BoundInputs {
  double sigma = 1.0;
  double lambda = 1.0;
  double beta_hat = 0.0;
  double B = 0.0;
  double L_h = 1.0;
  double L_ell = 1.0;
  double beta_ell = 1.0;
  std::size_t d = 1;
  std::size_t N = 1;
  // 1 when the two-layer-network structure is available, d otherwise.
  std::size_t d_prox = 1;
  // Set by rescale_parameters; a second rescaling is refused.
  bool rescaled = false;

  void validate() const;
};

struct HeatFlowTerm {
  double C = 0.0;
  double k = 2.0;
};

enum class PocVariant { Generic, ExampleNN };
enum class MainVariant { Generic, Specific, SpecificFull };

double heatflow_lipschitz_bound(double a, const std::vector<HeatFlowTerm>& terms);

// Exponent of the main Lipschitz bound with all implied constants set to one.
double main_bound_exponent(const BoundInputs& in, MainVariant variant);
double main_bound(const BoundInputs& in, MainVariant variant);

double lsi_pert_bound(double alpha, double L);
double lsi_pi_bound(const BoundInputs& in);

// Log-Sobolev constant bound of a concurrent uniform-in-N result; comparison
// tables only. kappa = beta / rho.
double songbo_bound(double kappa, std::size_t d, double epsilon, double rho, double N);

double winf_bound(double alpha, double L);

BoundInputs rescale_parameters(const BoundInputs& in);

double poc_bound(const BoundInputs& in, double cbar_pi, double alpha, PocVariant variant);

// alpha_t = 2 lambda / sigma^2 - 1 + 1/t.
double alpha_t(const BoundInputs& in, double t);

// Boundary between the small- and large-t covariance regimes,
// (20 B^2/sigma^4 - 2 lambda/sigma^2 + 1)^{-1}; +infinity when the bracket is
// nonpositive (every t is then in the small regime).
double regime_threshold(const BoundInputs& in);

std::string to_string(PocVariant v);
std::string to_string(MainVariant v);
PocVariant parse_poc_variant(const std::string& s);
MainVariant parse_main_variant(const std::string& s);

}  // namespace mflab
