#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mflab/bounds.hpp"
#include "mflab/meanfield.hpp"
#include "mflab/model.hpp"
#include "mflab/sampler.hpp"

namespace mflab {

// Point estimate with a symmetric confidence half-width.
struct Estimate {
  double value = 0.0;
  double half_width = 0.0;
};

struct ChaosConfig {
  MalaConfig mcmc{20000, 2000, 0.1, 1, 4, 0.574, true};
  std::size_t pi_draws = 100000;
  std::size_t bootstrap = 200;
  std::size_t batches_per_chain = 10;
  std::size_t grid_nodes = 2049;
  double z = 1.96;
  SolverConfig solver;
  std::size_t workers = 1;
};

struct ChaosChecks {
  bool kl_nonnegative = false;   // kl >= -half_width
  bool bregman_nonnegative = false;
  bool jensen = false;           // -log Z <= (2N/sigma^2) E_pi B + slack
  bool kl_below_pi_bregman = false;  // kl <= (2N/sigma^2) E_pi B + 2 CI
  bool variance_bound = false;   // E_pi B <= (beta_ell/(2N^2)) sum_i sum_j p_j var_{pi^i}(h_j) + CI
  bool below_poc = false;
  bool below_poc_ii = false;

  bool all() const {
    return kl_nonnegative && bregman_nonnegative && jensen && kl_below_pi_bregman && variance_bound && below_poc &&
           below_poc_ii;
  }
};

struct ChaosReport {
  std::size_t N = 0;
  Estimate kl;
  Estimate bregman_mu;  // E_mu B
  Estimate bregman_pi;  // E_pi B
  Estimate log_Z;
  double scale = 0.0;   // 2N/sigma^2
  double ess_Z = 0.0;
  bool ess_warning = false;
  double bregman_min = 0.0;
  double variance_bound = 0.0;
  double alpha = 0.0;
  double B_eff = 0.0;
  double cbar_pi = 0.0;
  double bound_poc = 0.0;
  double bound_poc_ii = 0.0;
  double acceptance_rate = 0.0;
  bool acceptance_warning = false;
  double ess_mu = 0.0;
  std::size_t solver_iterations = 0;
  ChaosChecks checks;
};

// B_F0(nu, pibar) = F0(nu) - F0(pibar) - <dF0(pibar), nu - pibar>.
double bregman_divergence(const ModelSpec& model, const Measure& nu, const GridDensity& pibar);
// Same, from precomputed feature vectors.
double bregman_from_features(const ModelSpec& model, const Vec& nu_features, const Vec& pibar_features);

// Lipschitz constant of x -> dF0(pibar, x).
double effective_gradient_bound(const ModelSpec& model, const GridDensity& pibar);

// KL(mu^{1:N} || pi^{1:N}) = -(2N/sigma^2) E_mu[B] - log Z, both sides by Monte Carlo.
// With tilts the tilted pair (mu_{t,y}, pi_{t,y}) is used. Grid-based, d = 1.
ChaosReport estimate_kl(const ModelSpec& model, std::size_t N, const ChaosConfig& config, std::uint64_t seed,
                        const std::optional<TiltSpec>& tilts = std::nullopt);

// Batch-means half-width of the mean of `series`, split into `chains` equal chain blocks.
Estimate batch_means(const std::vector<double>& series, std::size_t chains, std::size_t batches_per_chain, double z);

}  // namespace mflab
