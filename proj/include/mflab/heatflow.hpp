#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "mflab/bounds.hpp"
#include "mflab/measure.hpp"
#include "mflab/model.hpp"

namespace mflab {

// mu^{1:N} ∝ exp(-(2/sigma^2)[sum_i V(x^i) + N F0(rho_x)]) on a grid of
// dimension N*d (at most 2). Grid coordinates are the stacked particles.
GridDensity finite_particle_density(const ModelSpec& model, std::size_t N, std::shared_ptr<const Grid> grid);

// mu_{t,y} ∝ exp(-|x-y|^2/(2t) + |x|^2/2) mu. `base_precision` is the strong
// log-concavity of mu (2 lambda/sigma^2); alpha_t = base_precision - 1 + 1/t
// must be positive. Throws DomainError when it is not, or when the tilted
// mass piles up at the grid boundary.
GridDensity tilted_measure(const GridDensity& mu, double t, const Vec& y, double base_precision);

// Limit t -> infinity at y = 0: mu ∝ exp(|x|^2/2) mu.
GridDensity tilt_limit(const GridDensity& mu, double base_precision);

struct EnvelopeConstants {
  double small = 1.0;
  double large = 1.0;
};

struct ProfileRow {
  double t = 0.0;
  std::size_t y_index = 0;
  Vec y;
  double opnorm = 0.0;
  double alpha_t = 0.0;
  double small_ref = 0.0;
  double large_ref = 0.0;
  bool small_regime = true;
};

struct CovarianceProfile {
  double t_star = 0.0;
  std::vector<ProfileRow> rows;
};

// Reference envelope of the small-t lemma with unit-free constant c:
// [1/sqrt(alpha_t) + c (sqrt(beta d_prox)/sigma + B/sigma^2)/alpha_t]^2.
double small_regime_envelope(const BoundInputs& in, double t, double c);
// [1/sqrt(alpha_t) + c B/(alpha_t sigma^2)]^2 + c (beta B^2 d_prox/(alpha_t^3 sigma^6) + beta B^4/(alpha_t^4 sigma^10)).
double large_regime_envelope(const BoundInputs& in, double t, double c);

// Smallest constants (>= 0) for which every row lies below its regime's envelope.
EnvelopeConstants fit_regime_constants(const CovarianceProfile& profile, const BoundInputs& inputs);

// `y_list` holds one tilt centre per row, each of the density's dimension.
CovarianceProfile covariance_profile(const GridDensity& mu, const std::vector<double>& t_list, const Points& y_list,
                                     const BoundInputs& inputs, const EnvelopeConstants& env = {},
                                     std::size_t workers = 1);

// 40 log-spaced points on [t*/100, 100 t*]; t* is replaced by t_ref when infinite.
std::vector<double> profile_times(double t_star, std::size_t n = 40, double t_ref = 1.0);

// Exact OU action: law of e^{-t} X + sqrt(1 - e^{-2t}) G on the same grid.
GridDensity ou_evolve(const GridDensity& mu, double t);

// OU action over a fixed time step as a banded matrix on a 1-d axis; applied
// to raw density values.
class OuPropagator {
 public:
  OuPropagator(const Axis& axis, double tau, double band_sds = 12.0);
  void apply(const Vec& in, Vec& out) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> first_;
  std::vector<std::vector<double>> rows_;
};

struct FlowConfig {
  double t_max = 8.0;
  double dt = 1e-3;
  // Output grid for T on [-z_half, z_half].
  double z_half = 6.0;
  std::size_t n_out = 1201;
  // Source nodes keep CDF values in [tail, 1 - tail].
  double tail = 1e-12;
};

// Forward flow S on source nodes and its inverse T = S^{-1} on a Gaussian grid.
struct FlowMap {
  Vec source;   // x
  Vec forward;  // S_{t_max}(x)
  Vec z;
  Vec mapped;   // T(z)
  double dt = 0.0;
  double t_max = 0.0;

  // T at arbitrary points inside the forward range (monotone cubic interpolation).
  double apply(double z) const;
};

FlowMap reverse_flow_map(const GridDensity& mu, const FlowConfig& config = {});

// Density of T#gamma on `grid`, from gamma(S(x)) S'(x).
GridDensity pushforward_density(const FlowMap& map, std::shared_ptr<const Grid> grid);

// Largest adjacent difference quotient of T over |z| <= window.
double lipschitz_estimate(const FlowMap& map, double window = 6.0);

// int_0^inf e^{2t}(e^{2t}-1)^{k-2} / (alpha(e^{2t}-1)+1)^k dt by quadrature.
double heat_flow_integral(double alpha, double k);
double heat_flow_integral_closed(double alpha, double k);
// int_0^inf (1-alpha)/(alpha(e^{2t}-1)+1) dt by quadrature.
double log_term_integral(double alpha);
double log_term_integral_closed(double alpha);

// Envelope opnorm <= 1/(a+1/t) + C/(a+1/t)^k fitted to profile rows:
// C = max(0, max_rows (opnorm - 1/(a+1/t)) (a+1/t)^k).
double fit_envelope_constant(const CovarianceProfile& profile, double a, double k);

struct EnvelopeFit {
  std::vector<HeatFlowTerm> candidates;  // one single-term fit per k
  HeatFlowTerm best;
  double bound = 0.0;  // heatflow_lipschitz_bound(a, {best})
};
EnvelopeFit fit_heatflow_bound(const CovarianceProfile& profile, double a,
                               const std::vector<double>& ks = {1.5, 2.0, 3.0, 4.0});

// opnorm/t -> 1 check: C is fitted as max |opnorm/t - 1|/sqrt(t) over the
// upper half of the small-t rows; the lower half must satisfy
// |opnorm/t - 1| <= slack * C * sqrt(t).
struct SmallTCheck {
  double C = 0.0;
  double worst_ratio = 0.0;  // max over tested rows of |opnorm/t - 1| / (C sqrt t)
  double smallest_t_deviation = 0.0;  // |opnorm/t - 1| at the smallest t
  bool pass = false;
};
SmallTCheck check_small_t(const CovarianceProfile& profile, double slack = 2.0);

}  // namespace mflab
