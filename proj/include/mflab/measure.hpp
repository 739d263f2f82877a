#pragma once

#include <cstddef>
#include <memory>
#include <utility>
#include <variant>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

namespace mflab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecRef = Eigen::Ref<const Eigen::VectorXd>;
// One point per row. Row-major so that a row is a contiguous vector.
using Points = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Uniform axis with n >= 2 nodes including both endpoints.
struct Axis {
  double lo = -10.0;
  double hi = 10.0;
  std::size_t n = 2048;

  double step() const { return (hi - lo) / static_cast<double>(n - 1); }
  double node(std::size_t i) const {
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  friend bool operator==(const Axis&, const Axis&) = default;
};

// Tensor-product grid in one or two dimensions with trapezoid weights.
// Node k of a 2-d grid is (axis0.node(k / n1), axis1.node(k % n1)).
class Grid {
 public:
  explicit Grid(std::vector<Axis> axes);

  static std::shared_ptr<const Grid> make(std::vector<Axis> axes) {
    return std::make_shared<const Grid>(std::move(axes));
  }
  // Axes centred on `center` spanning +-half_width, same resolution per axis.
  static std::shared_ptr<const Grid> centered(const Vec& center, double half_width, std::size_t n);

  std::size_t dim() const { return axes_.size(); }
  std::size_t size() const { return static_cast<std::size_t>(weights_.size()); }
  const std::vector<Axis>& axes() const { return axes_; }
  const Points& nodes() const { return nodes_; }
  const Vec& weights() const { return weights_; }
  auto node(std::size_t k) const { return nodes_.row(static_cast<Eigen::Index>(k)).transpose(); }

  friend bool operator==(const Grid& a, const Grid& b) { return a.axes_ == b.axes_; }

 private:
  std::vector<Axis> axes_;
  Points nodes_;
  Vec weights_;
};

// Normalized density sampled on a grid. The log-density is kept alongside the
// density so that ratios in far tails stay accurate.
class GridDensity {
 public:
  GridDensity(std::shared_ptr<const Grid> grid, Vec density, Vec log_density);

  const Grid& grid() const { return *grid_; }
  const std::shared_ptr<const Grid>& grid_ptr() const { return grid_; }
  std::size_t dim() const { return grid_->dim(); }
  std::size_t size() const { return grid_->size(); }
  const Vec& density() const { return density_; }
  const Vec& log_density() const { return log_density_; }

  double mass() const { return grid_->weights().dot(density_); }

  template <class F>
  double expect(F&& f) const {
    const auto& w = grid_->weights();
    double s = 0.0;
    for (std::size_t k = 0; k < size(); ++k) {
      const double m = w[k] * density_[k];
      if (m != 0.0) s += m * f(grid_->node(k));
    }
    return s;
  }

  Vec mean() const;
  Mat covariance() const;

  bool same_grid(const GridDensity& other) const;

  // Mass near the grid boundary relative to total (post-hoc extent check).
  double boundary_mass_fraction(std::size_t edge_nodes = 4) const;

 private:
  std::shared_ptr<const Grid> grid_;
  Vec density_;
  Vec log_density_;
};

class GaussianMeasure {
 public:
  GaussianMeasure(Vec mean, Mat covariance);

  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
  const Vec& mean() const { return mean_; }
  const Mat& covariance() const { return covariance_; }

  // Dense trapezoid rule in 1-d, tensor Gauss-Hermite (64 nodes per axis) in 2-3 d; nodes are rows.
  const Points& nodes() const { return nodes_; }
  const Vec& weights() const { return weights_; }

  template <class F>
  double expect(F&& f) const {
    double s = 0.0;
    for (Eigen::Index k = 0; k < weights_.size(); ++k) s += weights_[k] * f(nodes_.row(k).transpose());
    return s;
  }

  double log_density(const VecRef& x) const;

 private:
  Vec mean_;
  Mat covariance_;
  Points nodes_;
  Vec weights_;
};

class EmpiricalMeasure {
 public:
  explicit EmpiricalMeasure(Points points);

  std::size_t dim() const { return static_cast<std::size_t>(points_.cols()); }
  std::size_t count() const { return static_cast<std::size_t>(points_.rows()); }
  const Points& points() const { return points_; }

  template <class F>
  double expect(F&& f) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < points_.rows(); ++i) s += f(points_.row(i).transpose());
    return s / static_cast<double>(points_.rows());
  }

 private:
  Points points_;
};

using Measure = std::variant<GridDensity, GaussianMeasure, EmpiricalMeasure>;

std::size_t dim(const Measure& m);
Vec mean(const Measure& m);

template <class F>
double expect(const Measure& m, F&& f) {
  return std::visit([&](const auto& mm) { return mm.expect(f); }, m);
}

// density proportional to exp(log_u); max-subtracted before exponentiation.
GridDensity normalize_from_log_potential(std::shared_ptr<const Grid> grid, const Vec& log_u);

// Evaluate log_u(x) at every node and normalize.
template <class F>
  requires(!std::is_convertible_v<F, const Vec&>)
GridDensity normalize_from_log_potential(std::shared_ptr<const Grid> grid, F&& log_u) {
  Vec values(static_cast<Eigen::Index>(grid->size()));
  for (std::size_t k = 0; k < grid->size(); ++k) values[static_cast<Eigen::Index>(k)] = log_u(grid->node(k));
  return normalize_from_log_potential(std::move(grid), values);
}

// Renormalize nonnegative node values on a grid.
GridDensity normalize_density(std::shared_ptr<const Grid> grid, const Vec& values);

// (1 - s) p + s q on a shared grid.
GridDensity mix(const GridDensity& p, const GridDensity& q, double s);

// Grid sampling of N(mean, cov) via its exact log-density.
GridDensity gaussian_on_grid(std::shared_ptr<const Grid> grid, const Vec& mean, const Mat& cov);

double kl_divergence(const GridDensity& p, const GridDensity& q);

struct CovarianceSummary {
  Mat covariance;
  double opnorm = 0.0;
};
CovarianceSummary covariance_opnorm(const Measure& p);
// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double power_iteration_opnorm(const Mat& symmetric, double rel_tol = 1e-10);

double w2_distance_1d(const GridDensity& p, const GridDensity& q);

// Cumulative distribution at the nodes of a 1-d density, fourth-order accurate.
Vec cumulative_1d(const GridDensity& p);
// Quantile function of a 1-d density at level u in [0, 1].
double quantile_1d(const GridDensity& p, const Vec& cdf, double u);

// Ent_p(g^2) / (2 E_p |grad g|^2) for a test function g on a 1-d grid; any
// valid log-Sobolev constant of p dominates this ratio.
double lsi_quotient_1d(const GridDensity& p, const Vec& g_values, const Vec& g_gradient);

}  // namespace mflab
