#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mflab/measure.hpp"
#include "mflab/model.hpp"

namespace mflab {

struct ParticleState {
  Points x;
  std::uint64_t step_count = 0;
  std::uint64_t rng_stream_id = 0;
};

// Gaussian tilt (t, y^{1:N}): adds -|x^i - y^i|^2/(2t) + |x^i|^2/2 per particle.
struct TiltSpec {
  double t = 1.0;
  Points y;
};

// Target density of the N-particle Gibbs measure
//   exp(-(2/sigma^2)[sum_i V(x^i) + N F0(rho_x)])  (+ tilt terms).
// With `rescaled` set the model is pushed through x -> eta x first.
struct TargetSpec {
  ModelSpec model;
  std::size_t N = 1;
  std::optional<TiltSpec> tilt;
  bool rescaled = false;

  // The model the density is actually built from (rescaled when requested).
  ModelSpec effective_model() const;
  // Checks dimensions and alpha_t > 0; throws InvalidInput.
  void validate() const;
  // Per-particle precision of the quadratic part: 2 lambda/sigma^2 (- 1 + 1/t).
  double base_precision() const;
};

double n_particle_log_density(const TargetSpec& target, const Points& x);
Points n_particle_log_density_grad(const TargetSpec& target, const ParticleState& state);

struct MalaConfig {
  std::size_t n_samples = 10000;
  std::size_t n_burnin = 2000;
  double step_size = 0.1;  // initial; tuned during burn-in
  std::size_t thin = 1;
  std::size_t chains = 1;
  double target_acceptance = 0.574;
  bool adapt = true;
};

struct ChainDiagnostics {
  double acceptance_rate = 0.0;
  double step_size = 0.0;
  // ESS of the particle-averaged first coordinate and of the log density.
  double ess_mean = 0.0;
  double ess_log_density = 0.0;
};

struct MalaDiagnostics {
  std::vector<ChainDiagnostics> chains;
  double acceptance_rate = 0.0;
  double ess_mean = 0.0;
  double ess_log_density = 0.0;
  bool acceptance_warning = false;
};

struct MalaResult {
  // Chain-major: all samples of chain 0, then chain 1, ...
  std::vector<ParticleState> samples;
  MalaDiagnostics diagnostics;
};

// Independent start for chain `chain`: each particle drawn from the Gaussian
// that ignores the interaction.
ParticleState default_initial_state(const TargetSpec& target, std::uint64_t seed, std::uint64_t chain);

MalaResult mala_sample(const TargetSpec& target, const MalaConfig& config, std::uint64_t seed,
                       std::size_t workers = 1);

// Initial positive sequence estimator (Geyer) of the effective sample size.
double effective_sample_size(const std::vector<double>& series);

struct MfldConfig {
  double horizon = 10.0;
  double step = 1e-3;
  // Keep every k-th state (the initial and final states are always kept).
  std::size_t record_every = 1000;
  double guard = 1e6;
  // Multiplies sigma in the noise term only; 0 gives the deterministic flow.
  double noise_scale = 1.0;
};

struct MfldTrajectory {
  std::vector<double> times;
  std::vector<ParticleState> states;
};

// Euler-Maruyama for dX^i = -(lambda X^i + grad dF0(rho_X, X^i)) dt + sigma dB^i.
MfldTrajectory mfld_simulate(const ModelSpec& model, const Points& initial, const MfldConfig& config,
                             std::uint64_t seed);
// Same, starting from N i.i.d. draws of N(0, sigma^2/(2 lambda) I).
MfldTrajectory mfld_simulate(const ModelSpec& model, std::size_t N, const MfldConfig& config,
                             std::uint64_t seed);

}  // namespace mflab
