#include "mflab/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mflab/error.hpp"
#include "mflab/parallel.hpp"
#include "mflab/rng.hpp"

namespace mflab {

double bregman_from_features(const ModelSpec& model, const Vec& f, const Vec& fbar) {
  return model.energy_at(f) - model.energy_at(fbar) - model.energy_gradient_at(fbar).dot(f - fbar);
}

double bregman_divergence(const ModelSpec& model, const Measure& nu, const GridDensity& pibar) {
  return bregman_from_features(model, model.features(nu), model.features(Measure{pibar}));
}

double effective_gradient_bound(const ModelSpec& model, const GridDensity& pibar) {
  return model.first_variation_lipschitz(model.features(Measure{pibar}));
}

Estimate batch_means(const std::vector<double>& series, std::size_t chains, std::size_t batches_per_chain, double z) {
  if (series.empty() || chains == 0 || series.size() % chains != 0)
    throw InvalidInput("batch means needs equal-length chain blocks");
  const std::size_t len = series.size() / chains;
  const std::size_t nb = std::max<std::size_t>(1, std::min(batches_per_chain, len));
  const std::size_t bsize = len / nb;
  std::vector<double> means;
  for (std::size_t c = 0; c < chains; ++c)
    for (std::size_t b = 0; b < nb; ++b) {
      const double* start = series.data() + c * len + b * bsize;
      means.push_back(pairwise_sum(start, bsize) / static_cast<double>(bsize));
    }
  Estimate e;
  e.value = pairwise_sum(series) / static_cast<double>(series.size());
  if (means.size() < 2) return e;
  const double mbar = pairwise_sum(means) / static_cast<double>(means.size());
  double ss = 0.0;
  for (double m : means) ss += (m - mbar) * (m - mbar);
  const double var_of_mean = ss / static_cast<double>(means.size() - 1) / static_cast<double>(means.size());
  e.half_width = z * std::sqrt(var_of_mean);
  return e;
}

namespace {

double log_mean_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  std::vector<double> e(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) e[i] = std::exp(v[i] - m);
  return m + std::log(pairwise_sum(e) / static_cast<double>(v.size()));
}

Estimate iid_mean(const std::vector<double>& v, double z) {
  Estimate e;
  e.value = pairwise_sum(v) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - e.value) * (x - e.value);
  if (v.size() > 1) e.half_width = z * std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return e;
}

constexpr std::size_t kDrawBlock = 1000;

}  // namespace

ChaosReport estimate_kl(const ModelSpec& model, std::size_t N, const ChaosConfig& config, std::uint64_t seed,
                        const std::optional<TiltSpec>& tilts) {
  if (N == 0) throw InvalidInput("estimate_kl needs N >= 1");
  if (model.dim() != 1) throw Unsupported("KL estimation draws from grid densities and needs d = 1");
  if (tilts && static_cast<std::size_t>(tilts->y.rows()) != N) throw InvalidInput("tilts must have N rows");
  if (config.pi_draws < 2) throw InvalidInput("need at least two pi draws");

  ChaosReport rep;
  rep.N = N;
  const double s2 = model.sigma() * model.sigma();
  rep.scale = 2.0 * static_cast<double>(N) / s2;

  // Product side.
  auto grid = default_grid(model, tilts, config.grid_nodes);
  SolverConfig scfg = config.solver;
  scfg.workers = config.workers;
  const ProximalGibbsSystem sys = solve_self_consistent(model, tilts, grid, scfg);
  rep.solver_iterations = sys.iterations;
  const GridDensity& pibar = sys.mean_measure;
  const Vec fbar = model.features(Measure{pibar});
  auto factor = [&](std::size_t i) -> const GridDensity& {
    return sys.per_particle.size() == 1 ? sys.per_particle[0] : sys.per_particle[i];
  };
  std::vector<Vec> cdfs;
  for (const auto& p : sys.per_particle) cdfs.push_back(cumulative_1d(p));

  const std::size_t blocks = (config.pi_draws + kDrawBlock - 1) / kDrawBlock;
  std::vector<double> pi_b(config.pi_draws);
  parallel_for(blocks, config.workers, [&](std::size_t blk) {
    RngStream rng(seed, 1000000 + blk);
    Points x(static_cast<Eigen::Index>(N), 1);
    const std::size_t end = std::min(config.pi_draws, (blk + 1) * kDrawBlock);
    for (std::size_t r = blk * kDrawBlock; r < end; ++r) {
      for (std::size_t i = 0; i < N; ++i) {
        const std::size_t fi = sys.per_particle.size() == 1 ? 0 : i;
        x(static_cast<Eigen::Index>(i), 0) = quantile_1d(factor(i), cdfs[fi], rng.uniform());
      }
      pi_b[r] = bregman_from_features(model, model.features_of_points(x), fbar);
    }
  });

  rep.bregman_pi = iid_mean(pi_b, config.z);
  std::vector<double> logw(pi_b.size());
  for (std::size_t r = 0; r < pi_b.size(); ++r) logw[r] = -rep.scale * pi_b[r];
  rep.log_Z.value = log_mean_exp(logw);
  {
    double sw = 0.0, sw2 = 0.0;
    for (double lw : logw) {
      const double w = std::exp(lw - rep.log_Z.value);
      sw += w;
      sw2 += w * w;
    }
    rep.ess_Z = sw * sw / sw2;
    rep.ess_warning = rep.ess_Z < 100.0;
  }
  {
    std::vector<double> reps(config.bootstrap);
    parallel_for(config.bootstrap, config.workers, [&](std::size_t b) {
      RngStream rng(seed, 2000000 + b);
      std::uniform_int_distribution<std::size_t> pick(0, logw.size() - 1);
      std::vector<double> resample(logw.size());
      for (auto& v : resample) v = logw[pick(rng.engine())];
      reps[b] = log_mean_exp(resample);
    });
    if (reps.size() > 1) {
      const double m = pairwise_sum(reps) / static_cast<double>(reps.size());
      double ss = 0.0;
      for (double r : reps) ss += (r - m) * (r - m);
      rep.log_Z.half_width = config.z * std::sqrt(ss / static_cast<double>(reps.size() - 1));
    }
    // A heavy-tailed weight distribution makes the bootstrap optimistic.
    if (rep.ess_warning) rep.log_Z.half_width *= 3.0;
  }

  // Interacting side.
  TargetSpec target{model, N, tilts, false};
  const MalaResult mala = mala_sample(target, config.mcmc, seed, config.workers);
  rep.acceptance_rate = mala.diagnostics.acceptance_rate;
  rep.acceptance_warning = mala.diagnostics.acceptance_warning;
  rep.ess_mu = mala.diagnostics.ess_log_density;
  std::vector<double> mu_b(mala.samples.size());
  for (std::size_t k = 0; k < mala.samples.size(); ++k)
    mu_b[k] = bregman_from_features(model, model.features_of_points(mala.samples[k].x), fbar);
  rep.bregman_mu = batch_means(mu_b, config.mcmc.chains, config.batches_per_chain, config.z);

  rep.kl.value = -rep.scale * rep.bregman_mu.value - rep.log_Z.value;
  rep.kl.half_width = std::hypot(rep.scale * rep.bregman_mu.half_width, rep.log_Z.half_width);
  rep.bregman_min = std::min(*std::min_element(mu_b.begin(), mu_b.end()), *std::min_element(pi_b.begin(), pi_b.end()));

  // Variance step: E_pi B <= (beta_ell/(2N^2)) sum_i sum_j p_j var_{pi^i}(h_j).
  BoundInputs in = model_constants(model);
  {
    std::vector<double> weights;
    if (model.kind() == ModelKind::ExampleNN)
      for (const auto& z : model.data()) weights.push_back(z.weight);
    else if (model.kind() == ModelKind::QuadraticOracle)
      weights.push_back(1.0);
    double total = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const GridDensity& p = factor(i);
      for (std::size_t j = 0; j < weights.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double m1 = p.expect([&](const auto& x) { return model.point_features(x)[jj]; });
        const double m2 = p.expect([&](const auto& x) {
          const double h = model.point_features(x)[jj];
          return h * h;
        });
        total += weights[j] * std::max(0.0, m2 - m1 * m1);
      }
    }
    rep.variance_bound = in.beta_ell / (2.0 * static_cast<double>(N) * static_cast<double>(N)) * total;
  }

  // Closed-form bounds with the gradient bound of dF0(pibar, .).
  rep.B_eff = effective_gradient_bound(model, pibar);
  rep.alpha = target.base_precision();
  rep.cbar_pi = lsi_pert_bound(rep.alpha, 2.0 * rep.B_eff / s2);
  in.N = N;
  in.B = rep.B_eff;
  rep.bound_poc = poc_bound(in, rep.cbar_pi, rep.alpha, PocVariant::Generic);
  rep.bound_poc_ii = poc_bound(in, rep.cbar_pi, rep.alpha, PocVariant::ExampleNN);

  const double hw = rep.kl.half_width;
  const double pi_side = rep.scale * rep.bregman_pi.value;
  const double pi_side_hw = rep.scale * rep.bregman_pi.half_width;
  rep.checks.kl_nonnegative = rep.kl.value >= -hw;
  rep.checks.bregman_nonnegative = rep.bregman_min >= -1e-10;
  rep.checks.jensen = -rep.log_Z.value <= pi_side + std::hypot(rep.log_Z.half_width, pi_side_hw);
  rep.checks.kl_below_pi_bregman = rep.kl.value <= pi_side + 2.0 * std::hypot(hw, pi_side_hw);
  rep.checks.variance_bound = rep.bregman_pi.value <= rep.variance_bound + rep.bregman_pi.half_width + 1e-12;
  rep.checks.below_poc = rep.kl.value <= rep.bound_poc + 2.0 * hw;
  rep.checks.below_poc_ii = rep.kl.value <= rep.bound_poc_ii + 2.0 * hw;
  return rep;
}

}  // namespace mflab
