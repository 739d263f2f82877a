#include "mflab/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mflab/error.hpp"
#include "mflab/parallel.hpp"
#include "mflab/rng.hpp"

namespace mflab {

ModelSpec TargetSpec::effective_model() const {
  if (rescaled && !model.rescaled()) return rescale_model(model);
  return model;
}

double TargetSpec::base_precision() const {
  const ModelSpec m = effective_model();
  double a = 2.0 * m.lambda() / (m.sigma() * m.sigma());
  if (tilt) a += -1.0 + 1.0 / tilt->t;
  return a;
}

void TargetSpec::validate() const {
  if (N == 0) throw InvalidInput("target needs N >= 1");
  if (tilt) {
    if (!(tilt->t > 0.0)) throw InvalidInput("tilt time t must be positive");
    if (static_cast<std::size_t>(tilt->y.rows()) != N || static_cast<std::size_t>(tilt->y.cols()) != model.dim())
      throw InvalidInput("tilt y must be an N x d array");
    if (!(base_precision() > 0.0)) throw InvalidInput("tilted target is not normalizable: alpha_t <= 0");
  }
}

namespace {

void check_state(const TargetSpec& target, const Points& x) {
  if (static_cast<std::size_t>(x.rows()) != target.N || static_cast<std::size_t>(x.cols()) != target.model.dim())
    throw InvalidInput("particle state must be N x d with N=" + std::to_string(target.N) +
                       ", d=" + std::to_string(target.model.dim()));
}

// Log density and (optionally) its gradient for an already-effective model.
double evaluate(const ModelSpec& m, const TargetSpec& target, const Points& x, Points* grad) {
  const double s2 = m.sigma() * m.sigma();
  const double N = static_cast<double>(x.rows());
  const Vec feats = m.features_of_points(x);
  double confinement = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) confinement += m.confinement(x.row(i).transpose());
  double logp = -(2.0 / s2) * (confinement + N * m.energy_at(feats));
  if (grad) {
    grad->resize(x.rows(), x.cols());
    Vec g(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      m.gradient_at(feats, x.row(i).transpose(), g);
      grad->row(i) = (-(2.0 / s2) * (m.lambda() * x.row(i).transpose() + g)).transpose();
    }
  }
  if (target.tilt) {
    const double t = target.tilt->t;
    const Points& y = target.tilt->y;
    logp += -(x - y).squaredNorm() / (2.0 * t) + 0.5 * x.squaredNorm();
    if (grad) *grad += -(x - y) / t + x;
  }
  return logp;
}

}  // namespace

double n_particle_log_density(const TargetSpec& target, const Points& x) {
  target.validate();
  check_state(target, x);
  return evaluate(target.effective_model(), target, x, nullptr);
}

Points n_particle_log_density_grad(const TargetSpec& target, const ParticleState& state) {
  target.validate();
  check_state(target, state.x);
  Points g;
  evaluate(target.effective_model(), target, state.x, &g);
  return g;
}

ParticleState default_initial_state(const TargetSpec& target, std::uint64_t seed, std::uint64_t chain) {
  target.validate();
  const ModelSpec m = target.effective_model();
  const double prec = target.base_precision();
  RngStream rng(seed, 2 * chain);
  ParticleState s;
  s.x.resize(static_cast<Eigen::Index>(target.N), static_cast<Eigen::Index>(m.dim()));
  for (Eigen::Index i = 0; i < s.x.rows(); ++i)
    for (Eigen::Index k = 0; k < s.x.cols(); ++k) {
      const double center = target.tilt ? target.tilt->y(i, k) / (target.tilt->t * prec) : 0.0;
      s.x(i, k) = center + rng.normal() / std::sqrt(prec);
    }
  s.rng_stream_id = 2 * chain + 1;
  return s;
}

double effective_sample_size(const std::vector<double>& series) {
  const std::size_t n = series.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (series[i] - mean) * (series[i + lag] - mean);
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  // Sum of consecutive autocovariance pairs while positive, kept monotone.
  double tau = -c0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    double pair = autocov(2 * m) + autocov(2 * m + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  const double ess = static_cast<double>(n) * c0 / tau;
  return std::min(ess, static_cast<double>(n) * std::log10(static_cast<double>(n)));
}

namespace {

struct ChainOutput {
  std::vector<ParticleState> samples;
  ChainDiagnostics diag;
};

ChainOutput run_chain(const ModelSpec& m, const TargetSpec& target, const MalaConfig& cfg, std::uint64_t seed,
                      std::uint64_t chain) {
  ParticleState state = default_initial_state(target, seed, chain);
  RngStream rng(seed, state.rng_stream_id);
  const Eigen::Index rows = state.x.rows(), cols = state.x.cols();

  Points grad, prop_grad, prop(rows, cols), noise(rows, cols);
  double logp = evaluate(m, target, state.x, &grad);
  double tau = cfg.step_size;
  double log_tau = std::log(tau);

  ChainOutput out;
  out.samples.reserve(cfg.n_samples);
  std::vector<double> trace_mean, trace_logp;
  trace_mean.reserve(cfg.n_samples);
  trace_logp.reserve(cfg.n_samples);
  std::size_t accepted = 0, proposed = 0;

  const std::size_t total = cfg.n_burnin + cfg.n_samples * cfg.thin;
  for (std::size_t it = 0; it < total; ++it) {
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index k = 0; k < cols; ++k) noise(i, k) = rng.normal();
    prop = state.x + tau * grad + std::sqrt(2.0 * tau) * noise;
    const double prop_logp = evaluate(m, target, prop, &prop_grad);
    const double fwd = (prop - state.x - tau * grad).squaredNorm();
    const double bwd = (state.x - prop - tau * prop_grad).squaredNorm();
    const double log_ratio = prop_logp - logp - (bwd - fwd) / (4.0 * tau);
    const double accept_prob = std::isfinite(log_ratio) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
    const bool accept = rng.uniform() < accept_prob;
    if (accept) {
      state.x.swap(prop);
      grad.swap(prop_grad);
      logp = prop_logp;
    }
    ++state.step_count;
    if (it < cfg.n_burnin) {
      if (cfg.adapt) {
        const double gain = 1.0 / std::pow(static_cast<double>(it) + 10.0, 0.6);
        log_tau += gain * (accept_prob - cfg.target_acceptance);
        log_tau = std::clamp(log_tau, -30.0, 5.0);
        tau = std::exp(log_tau);
      }
      continue;
    }
    ++proposed;
    if (accept) ++accepted;
    if ((it - cfg.n_burnin + 1) % cfg.thin == 0) {
      out.samples.push_back(state);
      trace_mean.push_back(state.x.col(0).mean());
      trace_logp.push_back(logp);
    }
  }
  out.diag.acceptance_rate = proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  out.diag.step_size = tau;
  out.diag.ess_mean = effective_sample_size(trace_mean);
  out.diag.ess_log_density = effective_sample_size(trace_logp);
  return out;
}

}  // namespace

MalaResult mala_sample(const TargetSpec& target, const MalaConfig& config, std::uint64_t seed, std::size_t workers) {
  target.validate();
  if (!(config.step_size > 0.0)) throw InvalidInput("MALA step size must be positive");
  if (config.chains == 0 || config.thin == 0) throw InvalidInput("MALA needs at least one chain and thin >= 1");
  const ModelSpec m = target.effective_model();

  std::vector<ChainOutput> outputs(config.chains);
  parallel_for(config.chains, workers, [&](std::size_t c) { outputs[c] = run_chain(m, target, config, seed, c); });

  MalaResult result;
  result.samples.reserve(config.chains * config.n_samples);
  for (auto& o : outputs) {
    result.diagnostics.chains.push_back(o.diag);
    result.diagnostics.acceptance_rate += o.diag.acceptance_rate / static_cast<double>(config.chains);
    result.diagnostics.ess_mean += o.diag.ess_mean;
    result.diagnostics.ess_log_density += o.diag.ess_log_density;
    for (auto& s : o.samples) result.samples.push_back(std::move(s));
  }
  const double acc = result.diagnostics.acceptance_rate;
  result.diagnostics.acceptance_warning = acc < 0.2 || acc > 0.8;
  return result;
}

MfldTrajectory mfld_simulate(const ModelSpec& model, const Points& initial, const MfldConfig& config,
                             std::uint64_t seed) {
  if (!(config.step > 0.0)) throw InvalidInput("MFLD step must be positive");
  if (!(config.horizon >= 0.0)) throw InvalidInput("MFLD horizon must be nonnegative");
  if (initial.rows() < 1) throw InvalidInput("MFLD needs N >= 1");
  model.check_dim(static_cast<std::size_t>(initial.cols()));
  if (!initial.allFinite()) throw InvalidInput("initial particles must be finite");
  const std::size_t every = std::max<std::size_t>(1, config.record_every);

  const auto steps = static_cast<std::size_t>(std::llround(config.horizon / config.step));
  const double h = config.step;
  const double noise = config.noise_scale * model.sigma() * std::sqrt(h);
  RngStream rng(seed, 0);

  MfldTrajectory traj;
  ParticleState state{initial, 0, 0};
  traj.times.push_back(0.0);
  traj.states.push_back(state);

  Points drift(initial.rows(), initial.cols());
  Vec g(initial.cols());
  for (std::size_t n = 1; n <= steps; ++n) {
    const Vec feats = model.features_of_points(state.x);
    for (Eigen::Index i = 0; i < state.x.rows(); ++i) {
      model.gradient_at(feats, state.x.row(i).transpose(), g);
      drift.row(i) = (model.lambda() * state.x.row(i).transpose() + g).transpose();
    }
    state.x -= h * drift;
    if (noise != 0.0)
      for (Eigen::Index i = 0; i < state.x.rows(); ++i)
        for (Eigen::Index k = 0; k < state.x.cols(); ++k) state.x(i, k) += noise * rng.normal();
    state.step_count = n;
    const double worst = state.x.cwiseAbs().maxCoeff();
    if (!(worst <= config.guard))
      throw Divergence("particle coordinate " + std::to_string(worst) + " left the guard box at step " +
                       std::to_string(n) + " (t=" + std::to_string(static_cast<double>(n) * h) + ")");
    if (n % every == 0 || n == steps) {
      traj.times.push_back(static_cast<double>(n) * h);
      traj.states.push_back(state);
    }
  }
  return traj;
}

MfldTrajectory mfld_simulate(const ModelSpec& model, std::size_t N, const MfldConfig& config, std::uint64_t seed) {
  if (N == 0) throw InvalidInput("MFLD needs N >= 1");
  RngStream rng(seed, 1);
  const double sd = model.sigma() / std::sqrt(2.0 * model.lambda());
  Points x(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(model.dim()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index k = 0; k < x.cols(); ++k) x(i, k) = sd * rng.normal();
  return mfld_simulate(model, x, config, seed);
}

}  // namespace mflab
