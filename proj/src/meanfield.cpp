#include "mflab/meanfield.hpp"

#include <algorithm>
#include <cmath>

#include "mflab/error.hpp"
#include "mflab/parallel.hpp"

namespace mflab {

namespace {

std::size_t particle_count(const std::optional<TiltSpec>& tilts) {
  return tilts ? static_cast<std::size_t>(tilts->y.rows()) : 1;
}

void check_tilts(const ModelSpec& model, const std::optional<TiltSpec>& tilts) {
  if (!tilts) return;
  if (!(tilts->t > 0.0)) throw InvalidInput("tilt time t must be positive");
  if (tilts->y.rows() < 1 || static_cast<std::size_t>(tilts->y.cols()) != model.dim())
    throw InvalidInput("tilt y must be an N x d array with N >= 1");
  const double a = 2.0 * model.lambda() / (model.sigma() * model.sigma()) - 1.0 + 1.0 / tilts->t;
  if (!(a > 0.0)) throw InvalidInput("tilted system is not normalizable: alpha_t <= 0");
}

Vec log_potential(const ModelSpec& model, const Grid& grid, const Vec* feats, const std::optional<TiltSpec>& tilts,
                  std::size_t particle) {
  const double scale = 2.0 / (model.sigma() * model.sigma());
  Vec out(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto x = grid.node(k);
    double v = -scale * (model.confinement(x) + (feats ? model.first_variation_at(*feats, x) : 0.0));
    if (tilts) {
      const double t = tilts->t;
      v += -(x - tilts->y.row(static_cast<Eigen::Index>(particle)).transpose()).squaredNorm() / (2.0 * t) +
           0.5 * x.squaredNorm();
    }
    out[static_cast<Eigen::Index>(k)] = v;
  }
  return out;
}

// Pairwise-ordered average of grid densities sharing one grid.
GridDensity average(const std::vector<GridDensity>& parts) {
  const auto n = static_cast<Eigen::Index>(parts.front().size());
  Vec avg(n);
  std::vector<double> column(parts.size());
  for (Eigen::Index k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < parts.size(); ++i) column[i] = parts[i].density()[k];
    avg[k] = pairwise_sum(column) / static_cast<double>(parts.size());
  }
  return normalize_density(parts.front().grid_ptr(), avg);
}

std::vector<GridDensity> rebuild(const ModelSpec& model, const std::shared_ptr<const Grid>& grid,
                                 const Vec& feats, const std::optional<TiltSpec>& tilts, std::size_t workers) {
  const std::size_t n = particle_count(tilts);
  std::vector<std::optional<GridDensity>> slots(n);
  parallel_for(n, workers, [&](std::size_t i) {
    slots[i] = normalize_from_log_potential(grid, proximal_log_potential(model, *grid, feats, tilts, i));
  });
  std::vector<GridDensity> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace

std::shared_ptr<const Grid> default_grid(const ModelSpec& model, const std::optional<TiltSpec>& tilts,
                                         std::size_t n_per_axis) {
  const std::size_t d = model.dim();
  if (d > 2) throw Unsupported("grids are limited to d <= 2");
  double prec = 2.0 * model.lambda() / (model.sigma() * model.sigma());
  Vec lo = Vec::Zero(static_cast<Eigen::Index>(d)), hi = lo;
  if (tilts) {
    check_tilts(model, tilts);
    prec += -1.0 + 1.0 / tilts->t;
    lo = tilts->y.colwise().minCoeff().transpose() / (tilts->t * prec);
    hi = tilts->y.colwise().maxCoeff().transpose() / (tilts->t * prec);
  }
  // Interaction shifts are bounded by the first-variation slope; pad for them.
  const double half = 10.0 / std::sqrt(prec) + 2.0;
  std::vector<Axis> axes;
  for (std::size_t k = 0; k < d; ++k)
    axes.push_back(Axis{lo[static_cast<Eigen::Index>(k)] - half, hi[static_cast<Eigen::Index>(k)] + half, n_per_axis});
  return Grid::make(axes);
}

Vec proximal_log_potential(const ModelSpec& model, const Grid& grid, const Vec& pibar_features,
                           const std::optional<TiltSpec>& tilts, std::size_t particle) {
  return log_potential(model, grid, &pibar_features, tilts, particle);
}

double sup_norm_gap(const GridDensity& a, const GridDensity& b) {
  if (!a.same_grid(b)) throw InvalidInput("densities live on different grids");
  return (a.density() - b.density()).cwiseAbs().maxCoeff();
}

ProximalGibbsSystem solve_self_consistent(const ModelSpec& model, const std::optional<TiltSpec>& tilts,
                                          std::shared_ptr<const Grid> grid, const SolverConfig& config) {
  check_tilts(model, tilts);
  model.check_dim(grid->dim());
  if (!(config.damping > 0.0 && config.damping <= 1.0)) throw InvalidInput("damping must lie in (0, 1]");
  if (!(config.tol > 0.0)) throw InvalidInput("tolerance must be positive");

  // Start from the interaction-free system.
  std::vector<GridDensity> parts;
  for (std::size_t i = 0; i < particle_count(tilts); ++i)
    parts.push_back(normalize_from_log_potential(grid, log_potential(model, *grid, nullptr, tilts, i)));
  GridDensity pibar = average(parts);

  double theta = config.damping;
  double prev = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
  for (std::size_t it = 1; it <= config.max_iter; ++it) {
    std::vector<GridDensity> next = rebuild(model, grid, model.features(Measure{pibar}), tilts, config.workers);
    GridDensity target = average(next);
    const double res = sup_norm_gap(target, pibar);
    trace.push_back(res);
    if (res < config.tol) {
      ProximalGibbsSystem sys{std::move(next), std::move(target), 0.0, it, trace};
      sys.residual = proximal_residual(sys, model, tilts);
      return sys;
    }
    if (res > prev) theta = std::max(theta * 0.5, 1e-6);
    prev = res;
    pibar = mix(pibar, target, theta);
  }
  throw NonConvergence("self-consistent solve did not reach tol=" + std::to_string(config.tol) + " in " +
                           std::to_string(config.max_iter) + " iterations (last residual " +
                           std::to_string(trace.empty() ? 0.0 : trace.back()) + ")",
                       trace);
}

double proximal_residual(const ProximalGibbsSystem& system, const ModelSpec& model,
                         const std::optional<TiltSpec>& tilts) {
  check_tilts(model, tilts);
  if (system.per_particle.size() != particle_count(tilts))
    throw InvalidInput("system and tilts disagree on the particle count");
  const auto& grid = system.mean_measure.grid_ptr();
  std::vector<GridDensity> rebuilt = rebuild(model, grid, model.features(Measure{system.mean_measure}), tilts, 1);
  double worst = 0.0;
  for (std::size_t i = 0; i < rebuilt.size(); ++i)
    worst = std::max(worst, sup_norm_gap(rebuilt[i], system.per_particle[i]));
  return worst;
}

}  // namespace mflab
