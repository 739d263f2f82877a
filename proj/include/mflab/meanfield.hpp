#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "mflab/measure.hpp"
#include "mflab/model.hpp"
#include "mflab/sampler.hpp"

namespace mflab {

// Product system pi^i ∝ exp(-(2/sigma^2)[V + dF0(pibar, .)] + tilt_i), with
// pibar the average of the pi^i.
struct ProximalGibbsSystem {
  std::vector<GridDensity> per_particle;
  GridDensity mean_measure;
  double residual = 0.0;
  std::size_t iterations = 0;
  std::vector<double> residual_trace;
};

struct SolverConfig {
  double damping = 0.5;
  double tol = 1e-9;
  std::size_t max_iter = 5000;
  std::size_t workers = 1;
};

// Grid suited to the untilted (or tilted) problem: a cube around the origin
// (or around the tilt centres) spanning about ten proxy standard deviations.
std::shared_ptr<const Grid> default_grid(const ModelSpec& model, const std::optional<TiltSpec>& tilts,
                                         std::size_t n_per_axis);

// Unnormalized log pi^i at every grid node, given pibar's features.
Vec proximal_log_potential(const ModelSpec& model, const Grid& grid, const Vec& pibar_features,
                           const std::optional<TiltSpec>& tilts, std::size_t particle);

ProximalGibbsSystem solve_self_consistent(const ModelSpec& model, const std::optional<TiltSpec>& tilts,
                                          std::shared_ptr<const Grid> grid, const SolverConfig& config = {});

double proximal_residual(const ProximalGibbsSystem& system, const ModelSpec& model,
                         const std::optional<TiltSpec>& tilts);

double sup_norm_gap(const GridDensity& a, const GridDensity& b);

}  // namespace mflab
