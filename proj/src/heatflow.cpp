#include "mflab/heatflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

// pchip.hpp in Boost 1.74 calls isnan unqualified.
namespace boost::math::interpolators {
using std::isnan;
}
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>

#include "mflab/error.hpp"
#include "mflab/parallel.hpp"
#include "mflab/quadrature.hpp"

namespace mflab {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Pchip = boost::math::interpolators::pchip<std::vector<double>>;

Pchip make_pchip(const Vec& x, const Vec& y) {
  return Pchip(std::vector<double>(x.data(), x.data() + x.size()), std::vector<double>(y.data(), y.data() + y.size()));
}

double log_sum_exp(const std::vector<double>& v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// One-dimensional OU action on log-density values along an axis.
Vec ou_axis(const Axis& axis, const Vec& logp, double t) {
  const auto n = static_cast<Eigen::Index>(axis.n);
  if (t == 0.0) return logp;
  const double e = std::exp(-t);
  const double s2 = -std::expm1(-2.0 * t);
  const double s = std::sqrt(s2);
  const double h = axis.step();
  Vec out(n);
  if (s / e >= 3.0 * h) {
    // Trapezoid quadrature against the Gaussian kernel in log space.
    const Vec w = trapezoid_weights(axis.n, h);
    std::vector<double> terms(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const double y = axis.node(static_cast<std::size_t>(i));
      for (Eigen::Index j = 0; j < n; ++j) {
        const double r = y - e * axis.node(static_cast<std::size_t>(j));
        terms[static_cast<std::size_t>(j)] = logp[j] + std::log(w[j]) - r * r / (2.0 * s2);
      }
      out[i] = log_sum_exp(terms) + std::log(kInvSqrt2Pi / s);
    }
    return out;
  }
  // Narrow kernel: mu_t(y) = e^t E[mu(e^t (y - s G))], log-linear interpolation of mu.
  const GaussHermiteRule gh = gauss_hermite(32);
  auto interp = [&](double x) {
    const double u = (x - axis.lo) / h;
    if (u < 0.0 || u > static_cast<double>(n - 1)) return kNegInf;
    const auto k = std::min<Eigen::Index>(static_cast<Eigen::Index>(u), n - 2);
    const double f = u - static_cast<double>(k);
    if (logp[k] == kNegInf || logp[k + 1] == kNegInf) return kNegInf;
    return (1.0 - f) * logp[k] + f * logp[k + 1];
  };
  std::vector<double> terms(static_cast<std::size_t>(gh.nodes.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = axis.node(static_cast<std::size_t>(i));
    for (Eigen::Index q = 0; q < gh.nodes.size(); ++q)
      terms[static_cast<std::size_t>(q)] = std::log(gh.weights[q]) + interp((y - s * gh.nodes[q]) / e);
    out[i] = t + log_sum_exp(terms);
  }
  return out;
}

void check_same_dim(const GridDensity& mu, const Vec& y) {
  if (static_cast<std::size_t>(y.size()) != mu.dim()) throw InvalidInput("tilt centre has the wrong dimension");
}

}  // namespace

GridDensity finite_particle_density(const ModelSpec& model, std::size_t N, std::shared_ptr<const Grid> grid) {
  if (N == 0) throw InvalidInput("N must be at least 1");
  if (grid->dim() != N * model.dim())
    throw Unsupported("finite-particle grids need total dimension N*d = grid dimension (at most 2)");
  const double scale = 2.0 / (model.sigma() * model.sigma());
  const auto d = static_cast<Eigen::Index>(model.dim());
  Points x(static_cast<Eigen::Index>(N), d);
  return normalize_from_log_potential(grid, [&](const auto& node) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) x.row(i) = node.segment(i * d, d).transpose();
    double conf = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) conf += model.confinement(x.row(i).transpose());
    return -scale * (conf + static_cast<double>(N) * model.energy_at(model.features_of_points(x)));
  });
}

GridDensity tilted_measure(const GridDensity& mu, double t, const Vec& y, double base_precision) {
  if (!(t > 0.0)) throw DomainError("tilt time t must be positive");
  check_same_dim(mu, y);
  const double a = base_precision - 1.0 + 1.0 / t;
  if (!(a > 0.0)) throw DomainError("tilt is not normalizable: alpha_t = " + std::to_string(a) + " <= 0");
  const auto& g = mu.grid();
  Vec lp(static_cast<Eigen::Index>(g.size()));
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto x = g.node(k);
    lp[static_cast<Eigen::Index>(k)] =
        mu.log_density()[static_cast<Eigen::Index>(k)] - (x - y).squaredNorm() / (2.0 * t) + 0.5 * x.squaredNorm();
  }
  GridDensity out = normalize_from_log_potential(mu.grid_ptr(), lp);
  if (out.boundary_mass_fraction() > 1e-8) throw DomainError("tilted measure reaches the grid boundary");
  return out;
}

GridDensity tilt_limit(const GridDensity& mu, double base_precision) {
  if (!(base_precision > 1.0)) throw DomainError("tilt limit needs base precision > 1");
  const auto& g = mu.grid();
  Vec lp(static_cast<Eigen::Index>(g.size()));
  for (std::size_t k = 0; k < g.size(); ++k)
    lp[static_cast<Eigen::Index>(k)] = mu.log_density()[static_cast<Eigen::Index>(k)] + 0.5 * g.node(k).squaredNorm();
  return normalize_from_log_potential(mu.grid_ptr(), lp);
}

double small_regime_envelope(const BoundInputs& in, double t, double c) {
  const double a = alpha_t(in, t);
  const double s2 = in.sigma * in.sigma;
  const double v = 1.0 / std::sqrt(a) +
                   c / a * (std::sqrt(in.beta_hat * static_cast<double>(in.d_prox)) / in.sigma + in.B / s2);
  return v * v;
}

double large_regime_envelope(const BoundInputs& in, double t, double c) {
  const double a = alpha_t(in, t);
  const double s2 = in.sigma * in.sigma;
  const double B2 = in.B * in.B;
  const double v = 1.0 / std::sqrt(a) + c * in.B / (a * s2);
  return v * v + c * (in.beta_hat * B2 * static_cast<double>(in.d_prox) / (a * a * a * s2 * s2 * s2) +
                      in.beta_hat * B2 * B2 / (a * a * a * a * std::pow(in.sigma, 10.0)));
}

EnvelopeConstants fit_regime_constants(const CovarianceProfile& profile, const BoundInputs& in) {
  EnvelopeConstants fit{0.0, 0.0};
  const double s2 = in.sigma * in.sigma;
  const double dp = static_cast<double>(in.d_prox);
  for (const auto& r : profile.rows) {
    const double a = alpha_t(in, r.t);
    const double u = 1.0 / std::sqrt(a);
    if (r.opnorm <= u * u * (1.0 + 1e-9)) continue;  // quadrature rounding on the Gaussian part
    double c;
    if (r.small_regime) {
      const double x = (std::sqrt(in.beta_hat * dp) / in.sigma + in.B / s2) / a;
      c = x > 0.0 ? (std::sqrt(r.opnorm) - u) / x : std::numeric_limits<double>::infinity();
      fit.small = std::max(fit.small, c);
    } else {
      // (u + c v)^2 + c w = opnorm, positive root.
      const double v = in.B / (a * s2);
      const double w = in.beta_hat * in.B * in.B * dp / (a * a * a * s2 * s2 * s2) +
                       in.beta_hat * std::pow(in.B, 4) / (std::pow(a, 4) * std::pow(in.sigma, 10.0));
      const double qa = v * v, qb = 2.0 * u * v + w, qc = u * u - r.opnorm;
      if (qa > 0.0)
        c = (-qb + std::sqrt(qb * qb - 4.0 * qa * qc)) / (2.0 * qa);
      else
        c = qb > 0.0 ? -qc / qb : std::numeric_limits<double>::infinity();
      fit.large = std::max(fit.large, c);
    }
  }
  return fit;
}

CovarianceProfile covariance_profile(const GridDensity& mu, const std::vector<double>& t_list, const Points& y_list,
                                     const BoundInputs& inputs, const EnvelopeConstants& env, std::size_t workers) {
  if (static_cast<std::size_t>(y_list.cols()) != mu.dim()) throw InvalidInput("tilt centres have the wrong dimension");
  CovarianceProfile prof;
  prof.t_star = regime_threshold(inputs);
  const double base = 2.0 * inputs.lambda / (inputs.sigma * inputs.sigma);
  const std::size_t ny = static_cast<std::size_t>(y_list.rows());
  prof.rows.resize(t_list.size() * ny);
  parallel_for(prof.rows.size(), workers, [&](std::size_t idx) {
    const std::size_t ti = idx / ny, yi = idx % ny;
    ProfileRow row;
    row.t = t_list[ti];
    row.y_index = yi;
    row.y = y_list.row(static_cast<Eigen::Index>(yi)).transpose();
    const GridDensity tilted = tilted_measure(mu, row.t, row.y, base);
    row.opnorm = covariance_opnorm(Measure{tilted}).opnorm;
    row.alpha_t = alpha_t(inputs, row.t);
    row.small_ref = small_regime_envelope(inputs, row.t, env.small);
    row.large_ref = large_regime_envelope(inputs, row.t, env.large);
    row.small_regime = row.t <= prof.t_star;
    prof.rows[idx] = std::move(row);
  });
  return prof;
}

std::vector<double> profile_times(double t_star, std::size_t n, double t_ref) {
  const double c = std::isfinite(t_star) ? t_star : t_ref;
  const Vec v = log_space(c / 100.0, c * 100.0, n);
  return std::vector<double>(v.data(), v.data() + v.size());
}

GridDensity ou_evolve(const GridDensity& mu, double t) {
  if (!(t >= 0.0)) throw InvalidInput("OU time must be nonnegative");
  const auto& axes = mu.grid().axes();
  if (mu.dim() == 1) return normalize_from_log_potential(mu.grid_ptr(), ou_axis(axes[0], mu.log_density(), t));
  // Separable in two dimensions: node k = i * n1 + j.
  const auto n0 = static_cast<Eigen::Index>(axes[0].n), n1 = static_cast<Eigen::Index>(axes[1].n);
  Vec lp = mu.log_density();
  Vec line(n1);
  for (Eigen::Index i = 0; i < n0; ++i) {
    line = lp.segment(i * n1, n1);
    lp.segment(i * n1, n1) = ou_axis(axes[1], line, t);
  }
  Vec col(n0);
  for (Eigen::Index j = 0; j < n1; ++j) {
    for (Eigen::Index i = 0; i < n0; ++i) col[i] = lp[i * n1 + j];
    const Vec r = ou_axis(axes[0], col, t);
    for (Eigen::Index i = 0; i < n0; ++i) lp[i * n1 + j] = r[i];
  }
  return normalize_from_log_potential(mu.grid_ptr(), lp);
}

OuPropagator::OuPropagator(const Axis& axis, double tau, double band_sds) : n_(axis.n) {
  if (!(tau > 0.0)) throw InvalidInput("propagator step must be positive");
  const double e = std::exp(-tau);
  const double s2 = -std::expm1(-2.0 * tau);
  const double s = std::sqrt(s2);
  const double h = axis.step();
  const Vec w = trapezoid_weights(axis.n, h);
  first_.resize(n_);
  rows_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    const double y = axis.node(i);
    // |y - e x| <= band * s  <=>  x in [(y - band s)/e, (y + band s)/e].
    const double xlo = (y - band_sds * s) / e, xhi = (y + band_sds * s) / e;
    const auto jlo = static_cast<std::size_t>(std::clamp(std::ceil((xlo - axis.lo) / h), 0.0, double(n_ - 1)));
    const auto jhi = static_cast<std::size_t>(std::clamp(std::floor((xhi - axis.lo) / h), 0.0, double(n_ - 1)));
    first_[i] = jlo;
    for (std::size_t j = jlo; j <= jhi; ++j) {
      const double r = y - e * axis.node(j);
      rows_[i].push_back(w[static_cast<Eigen::Index>(j)] * kInvSqrt2Pi / s * std::exp(-r * r / (2.0 * s2)));
    }
  }
}

void OuPropagator::apply(const Vec& in, Vec& out) const {
  out.resize(static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    const double* src = in.data() + first_[i];
    const auto& r = rows_[i];
    double acc = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) acc += r[j] * src[j];
    out[static_cast<Eigen::Index>(i)] = acc;
  }
}

namespace {

// Score field grad log(mu_t / gamma) at the grid nodes from raw density values.
Vec score_field(const Axis& axis, const Vec& rho) {
  const auto n = static_cast<Eigen::Index>(axis.n);
  const double h = axis.step();
  Vec lr = rho.array().log();
  Vec g(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double d;
    if (k == 0)
      d = (lr[1] - lr[0]) / h;
    else if (k == n - 1)
      d = (lr[n - 1] - lr[n - 2]) / h;
    else
      d = (lr[k + 1] - lr[k - 1]) / (2.0 * h);
    g[k] = d + axis.node(static_cast<std::size_t>(k));
  }
  return g;
}

// Velocity -score at arbitrary positions, linear in between nodes and linearly
// extrapolated beyond the ends.
void velocity(const Axis& axis, const Vec& field, const Vec& pos, Vec& out) {
  const auto n = static_cast<Eigen::Index>(axis.n);
  const double h = axis.step();
  out.resize(pos.size());
  for (Eigen::Index p = 0; p < pos.size(); ++p) {
    const double u = (pos[p] - axis.lo) / h;
    const auto k = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(u)), 0, n - 2);
    const double f = u - static_cast<double>(k);
    out[p] = -((1.0 - f) * field[k] + f * field[k + 1]);
  }
}

}  // namespace

FlowMap reverse_flow_map(const GridDensity& mu, const FlowConfig& config) {
  if (mu.dim() != 1) throw Unsupported("the reverse flow map is implemented in one dimension only");
  if (!(config.dt > 0.0) || !(config.t_max > 0.0)) throw InvalidInput("flow needs dt > 0 and t_max > 0");
  if (config.n_out < 2 || !(config.z_half > 0.0)) throw InvalidInput("flow output grid is empty");
  const Axis& axis = mu.grid().axes()[0];
  const Vec& rho0 = mu.density();
  for (Eigen::Index k = 1; k + 1 < rho0.size(); ++k)
    if (!(rho0[k] > 0.0)) throw InvalidInput("flow needs a density that is positive on the grid interior");

  const Vec F = cumulative_1d(mu);
  std::vector<double> src;
  for (Eigen::Index k = 0; k < F.size(); ++k)
    if (F[k] >= config.tail && F[k] <= 1.0 - config.tail) src.push_back(axis.node(static_cast<std::size_t>(k)));
  if (src.size() < 4) throw InvalidInput("flow grid resolves too few source nodes");

  FlowMap map;
  map.dt = config.dt;
  map.t_max = config.t_max;
  map.source = Eigen::Map<const Vec>(src.data(), static_cast<Eigen::Index>(src.size()));
  Vec S = map.source;

  const OuPropagator half(axis, 0.5 * config.dt);
  const auto steps = static_cast<std::size_t>(std::llround(config.t_max / config.dt));
  Vec rho = rho0, rho_half, rho_next;
  Vec k1, k2, k3, k4, tmp;
  Vec f0 = score_field(axis, rho);
  for (std::size_t n = 0; n < steps; ++n) {
    half.apply(rho, rho_half);
    half.apply(rho_half, rho_next);
    const double mass = rho_next.sum();
    rho_half /= mass;
    rho_next /= mass;
    const Vec fh = score_field(axis, rho_half);
    const Vec f1 = score_field(axis, rho_next);
    velocity(axis, f0, S, k1);
    tmp = S + 0.5 * config.dt * k1;
    velocity(axis, fh, tmp, k2);
    tmp = S + 0.5 * config.dt * k2;
    velocity(axis, fh, tmp, k3);
    tmp = S + config.dt * k3;
    velocity(axis, f1, tmp, k4);
    S += config.dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    rho.swap(rho_next);
    f0 = f1;
  }
  if (!S.allFinite()) throw IntegrationFailure("flow produced non-finite positions");
  for (Eigen::Index k = 0; k + 1 < S.size(); ++k)
    if (!(S[k + 1] > S[k]))
      throw IntegrationFailure("flow map is not monotone near x = " + std::to_string(map.source[k]) +
                               "; reduce dt");
  map.forward = S;
  if (S[0] > -config.z_half || S[S.size() - 1] < config.z_half)
    throw IntegrationFailure("flow range does not cover the output window");

  const Pchip inverse = make_pchip(map.forward, map.source);
  map.z.resize(static_cast<Eigen::Index>(config.n_out));
  map.mapped.resize(map.z.size());
  for (Eigen::Index i = 0; i < map.z.size(); ++i) {
    map.z[i] = -config.z_half + 2.0 * config.z_half * static_cast<double>(i) / static_cast<double>(config.n_out - 1);
    map.mapped[i] = inverse(map.z[i]);
  }
  return map;
}

double FlowMap::apply(double zz) const {
  if (zz < forward[0] || zz > forward[forward.size() - 1]) throw InvalidInput("point outside the flow range");
  return make_pchip(forward, source)(zz);
}

GridDensity pushforward_density(const FlowMap& map, std::shared_ptr<const Grid> grid) {
  if (grid->dim() != 1) throw Unsupported("pushforward density is one-dimensional");
  const Pchip S = make_pchip(map.source, map.forward);
  const double lo = map.source[0], hi = map.source[map.source.size() - 1];
  Vec values = Vec::Zero(static_cast<Eigen::Index>(grid->size()));
  for (std::size_t k = 0; k < grid->size(); ++k) {
    const double x = grid->axes()[0].node(k);
    if (x < lo || x > hi) continue;
    const double s = S(x);
    values[static_cast<Eigen::Index>(k)] = kInvSqrt2Pi * std::exp(-0.5 * s * s) * std::max(0.0, S.prime(x));
  }
  return normalize_density(std::move(grid), values);
}

double lipschitz_estimate(const FlowMap& map, double window) {
  double L = 0.0;
  for (Eigen::Index i = 0; i + 1 < map.z.size(); ++i) {
    if (std::abs(map.z[i]) > window || std::abs(map.z[i + 1]) > window) continue;
    L = std::max(L, (map.mapped[i + 1] - map.mapped[i]) / (map.z[i + 1] - map.z[i]));
  }
  return L;
}

double heat_flow_integral(double alpha, double k) {
  if (!(alpha > 0.0) || !(k > 1.0)) throw DomainError("heat-flow integral needs alpha > 0 and k > 1");
  // Divided through by e^{2kt} so nothing overflows.
  auto f = [alpha, k](double t) {
    const double q = std::exp(-2.0 * t);
    const double lg = -2.0 * t + (k - 2.0) * std::log(-std::expm1(-2.0 * t)) - k * std::log(alpha + (1.0 - alpha) * q);
    return std::exp(lg);
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity());
}

double heat_flow_integral_closed(double alpha, double k) {
  if (!(alpha > 0.0) || !(k > 1.0)) throw DomainError("heat-flow integral needs alpha > 0 and k > 1");
  return 1.0 / (2.0 * (k - 1.0) * std::pow(alpha, k - 1.0));
}

double log_term_integral(double alpha) {
  if (!(alpha > 0.0)) throw DomainError("log-term integral needs alpha > 0");
  auto f = [alpha](double t) { return (1.0 - alpha) / (alpha * std::expm1(2.0 * t) + 1.0); };
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity());
}

double log_term_integral_closed(double alpha) {
  if (!(alpha > 0.0)) throw DomainError("log-term integral needs alpha > 0");
  return -0.5 * std::log(alpha);
}

double fit_envelope_constant(const CovarianceProfile& profile, double a, double k) {
  double C = 0.0;
  for (const auto& r : profile.rows) {
    const double q = a + 1.0 / r.t;
    C = std::max(C, (r.opnorm - 1.0 / q) * std::pow(q, k));
  }
  return C;
}

EnvelopeFit fit_heatflow_bound(const CovarianceProfile& profile, double a, const std::vector<double>& ks) {
  if (ks.empty()) throw InvalidInput("need at least one envelope exponent");
  EnvelopeFit fit;
  fit.bound = std::numeric_limits<double>::infinity();
  for (double k : ks) {
    const HeatFlowTerm term{fit_envelope_constant(profile, a, k), k};
    fit.candidates.push_back(term);
    const double b = heatflow_lipschitz_bound(a, {term});
    if (b < fit.bound) {
      fit.bound = b;
      fit.best = term;
    }
  }
  return fit;
}

SmallTCheck check_small_t(const CovarianceProfile& profile, double slack) {
  std::vector<double> ts;
  for (const auto& r : profile.rows)
    if (r.small_regime) ts.push_back(r.t);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  SmallTCheck out;
  if (ts.size() < 4) return out;
  const double split = ts[ts.size() / 2];
  const double t_min = ts.front();
  double C = 0.0;
  for (const auto& r : profile.rows)
    if (r.small_regime && r.t >= split) C = std::max(C, std::abs(r.opnorm / r.t - 1.0) / std::sqrt(r.t));
  out.C = C;
  double worst = 0.0;
  for (const auto& r : profile.rows) {
    if (!r.small_regime || r.t >= split) continue;
    const double dev = std::abs(r.opnorm / r.t - 1.0);
    if (r.t == t_min) out.smallest_t_deviation = std::max(out.smallest_t_deviation, dev);
    worst = std::max(worst, C > 0.0 ? dev / (C * std::sqrt(r.t)) : (dev > 1e-12 ? 1e300 : 0.0));
  }
  out.worst_ratio = worst;
  out.pass = worst <= slack;
  return out;
}

}  // namespace mflab
