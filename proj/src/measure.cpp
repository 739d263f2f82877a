#include "mflab/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mflab/error.hpp"
#include "mflab/quadrature.hpp"

namespace mflab {

namespace {

constexpr double kGaussHermiteNodes = 64;
constexpr Eigen::Index kDenseGaussianNodes = 8001;
constexpr double kDenseGaussianWidth = 12.0;
constexpr double kNegligibleDensity = 1e-300;

// Cubic Hermite interpolant of a CDF on one cell, parametrised by s in [0, 1].
double hermite_cdf(double F0, double F1, double f0, double f1, double h, double s) {
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * F0 + (s3 - 2 * s2 + s) * h * f0 + (-2 * s3 + 3 * s2) * F1 +
         (s3 - s2) * h * f1;
}

}  // namespace

Grid::Grid(std::vector<Axis> axes) : axes_(std::move(axes)) {
  if (axes_.empty() || axes_.size() > 2) throw Unsupported("grids are 1- or 2-dimensional");
  for (const auto& a : axes_) {
    if (a.n < 2) throw InvalidInput("grid axis needs at least two nodes");
    if (!(a.hi > a.lo) || !std::isfinite(a.lo) || !std::isfinite(a.hi))
      throw InvalidInput("grid axis needs finite lo < hi");
  }
  const auto n0 = static_cast<Eigen::Index>(axes_[0].n);
  const Eigen::VectorXd w0 = trapezoid_weights(axes_[0].n, axes_[0].step());
  if (axes_.size() == 1) {
    nodes_.resize(n0, 1);
    for (Eigen::Index i = 0; i < n0; ++i) nodes_(i, 0) = axes_[0].node(static_cast<std::size_t>(i));
    weights_ = w0;
    return;
  }
  const auto n1 = static_cast<Eigen::Index>(axes_[1].n);
  const Eigen::VectorXd w1 = trapezoid_weights(axes_[1].n, axes_[1].step());
  nodes_.resize(n0 * n1, 2);
  weights_.resize(n0 * n1);
  for (Eigen::Index i = 0; i < n0; ++i) {
    for (Eigen::Index j = 0; j < n1; ++j) {
      const Eigen::Index k = i * n1 + j;
      nodes_(k, 0) = axes_[0].node(static_cast<std::size_t>(i));
      nodes_(k, 1) = axes_[1].node(static_cast<std::size_t>(j));
      weights_[k] = w0[i] * w1[j];
    }
  }
}

std::shared_ptr<const Grid> Grid::centered(const Vec& center, double half_width, std::size_t n) {
  if (!(half_width > 0.0)) throw InvalidInput("grid half width must be positive");
  std::vector<Axis> axes;
  for (Eigen::Index i = 0; i < center.size(); ++i)
    axes.push_back(Axis{center[i] - half_width, center[i] + half_width, n});
  return make(std::move(axes));
}

GridDensity::GridDensity(std::shared_ptr<const Grid> grid, Vec density, Vec log_density)
    : grid_(std::move(grid)), density_(std::move(density)), log_density_(std::move(log_density)) {
  if (!grid_) throw InvalidInput("grid density needs a grid");
  if (static_cast<std::size_t>(density_.size()) != grid_->size() ||
      static_cast<std::size_t>(log_density_.size()) != grid_->size())
    throw InvalidInput("grid density size does not match its grid");
  for (Eigen::Index k = 0; k < density_.size(); ++k) {
    if (!std::isfinite(density_[k]) || density_[k] < 0.0)
      throw InvalidInput("grid density values must be finite and nonnegative");
  }
}

Vec GridDensity::mean() const {
  const auto& w = grid_->weights();
  const auto& X = grid_->nodes();
  Vec m = Vec::Zero(static_cast<Eigen::Index>(dim()));
  for (Eigen::Index k = 0; k < density_.size(); ++k) m += (w[k] * density_[k]) * X.row(k).transpose();
  return m;
}

Mat GridDensity::covariance() const {
  const Vec m = mean();
  const auto& w = grid_->weights();
  const auto& X = grid_->nodes();
  Mat C = Mat::Zero(m.size(), m.size());
  for (Eigen::Index k = 0; k < density_.size(); ++k) {
    const double wk = w[k] * density_[k];
    if (wk == 0.0) continue;
    const Vec dx = X.row(k).transpose() - m;
    C.noalias() += wk * dx * dx.transpose();
  }
  return 0.5 * (C + C.transpose());
}

bool GridDensity::same_grid(const GridDensity& other) const {
  return grid_ == other.grid_ || *grid_ == *other.grid_;
}

double GridDensity::boundary_mass_fraction(std::size_t edge_nodes) const {
  const auto& axes = grid_->axes();
  const auto& w = grid_->weights();
  double edge = 0.0, total = 0.0;
  for (std::size_t k = 0; k < size(); ++k) {
    const double m = w[static_cast<Eigen::Index>(k)] * density_[static_cast<Eigen::Index>(k)];
    total += m;
    bool near = false;
    if (axes.size() == 1) {
      near = k < edge_nodes || k + edge_nodes >= axes[0].n;
    } else {
      const std::size_t i = k / axes[1].n, j = k % axes[1].n;
      near = i < edge_nodes || i + edge_nodes >= axes[0].n || j < edge_nodes || j + edge_nodes >= axes[1].n;
    }
    if (near) edge += m;
  }
  return total > 0.0 ? edge / total : 0.0;
}

GaussianMeasure::GaussianMeasure(Vec mean, Mat covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  const Eigen::Index d = mean_.size();
  if (d == 0) throw InvalidInput("Gaussian measure needs dimension >= 1");
  if (covariance_.rows() != d || covariance_.cols() != d)
    throw InvalidInput("Gaussian covariance has the wrong shape");
  const double scale = std::max(1.0, covariance_.cwiseAbs().maxCoeff());
  if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidInput("Gaussian covariance must be symmetric");
  Eigen::LLT<Mat> llt(covariance_);
  if (llt.info() != Eigen::Success) throw InvalidInput("Gaussian covariance must be positive definite");
  if (d > 3) return;  // expectations are refused; mean/covariance stay usable

  if (d == 1) {
    // Dense trapezoid rule in 1-d: Gauss-Hermite converges slowly on kinked
    // integrands such as ReLU features.
    const Eigen::Index n = kDenseGaussianNodes;
    const double sd = std::sqrt(covariance_(0, 0));
    nodes_.resize(n, 1);
    weights_.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double z = -kDenseGaussianWidth + 2.0 * kDenseGaussianWidth * static_cast<double>(k) / (n - 1);
      nodes_(k, 0) = mean_[0] + sd * z;
      weights_[k] = std::exp(-0.5 * z * z) * (k == 0 || k == n - 1 ? 0.5 : 1.0);
    }
    weights_ /= weights_.sum();
    return;
  }

  const auto rule = gauss_hermite(static_cast<std::size_t>(kGaussHermiteNodes));
  const Eigen::Index m = rule.nodes.size();
  Eigen::Index total = 1;
  for (Eigen::Index i = 0; i < d; ++i) total *= m;
  const Mat L = llt.matrixL();
  nodes_.resize(total, d);
  weights_.resize(total);
  Vec z(d);
  for (Eigen::Index k = 0; k < total; ++k) {
    Eigen::Index rem = k;
    double w = 1.0;
    for (Eigen::Index a = d - 1; a >= 0; --a) {
      const Eigen::Index idx = rem % m;
      rem /= m;
      z[a] = rule.nodes[idx];
      w *= rule.weights[idx];
    }
    nodes_.row(k) = (mean_ + L * z).transpose();
    weights_[k] = w;
  }
}

double GaussianMeasure::log_density(const VecRef& x) const {
  Eigen::LLT<Mat> llt(covariance_);
  const Vec r = llt.matrixL().solve(x - mean_);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * r.squaredNorm() - 0.5 * logdet -
         0.5 * static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi);
}

EmpiricalMeasure::EmpiricalMeasure(Points points) : points_(std::move(points)) {
  if (points_.rows() < 1 || points_.cols() < 1) throw InvalidInput("empirical measure needs N >= 1 points");
  if (!points_.allFinite()) throw InvalidInput("empirical measure points must be finite");
}

std::size_t dim(const Measure& m) {
  return std::visit([](const auto& mm) { return mm.dim(); }, m);
}

Vec mean(const Measure& m) {
  return std::visit(
      [](const auto& mm) -> Vec {
        using T = std::decay_t<decltype(mm)>;
        if constexpr (std::is_same_v<T, EmpiricalMeasure>) {
          return mm.points().colwise().mean().transpose();
        } else {
          return mm.mean();
        }
      },
      m);
}

GridDensity normalize_from_log_potential(std::shared_ptr<const Grid> grid, const Vec& log_u) {
  if (static_cast<std::size_t>(log_u.size()) != grid->size())
    throw InvalidInput("log-potential size does not match the grid");
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < log_u.size(); ++k) {
    const double v = log_u[k];
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw InvalidInput("log-potential must be finite or -inf");
    top = std::max(top, v);
  }
  if (top == -std::numeric_limits<double>::infinity())
    throw EmptyMeasure("log-potential is -inf on every node");
  Vec density = (log_u.array() - top).exp().matrix();
  // Eigen's vectorised exp clamps -inf to a denormal.
  for (Eigen::Index k = 0; k < log_u.size(); ++k)
    if (log_u[k] == -std::numeric_limits<double>::infinity()) density[k] = 0.0;
  const double Z = grid->weights().dot(density);
  density /= Z;
  Vec log_density = log_u.array() - top - std::log(Z);
  return GridDensity(std::move(grid), std::move(density), std::move(log_density));
}

GridDensity normalize_density(std::shared_ptr<const Grid> grid, const Vec& values) {
  if (static_cast<std::size_t>(values.size()) != grid->size())
    throw InvalidInput("density size does not match the grid");
  for (Eigen::Index k = 0; k < values.size(); ++k)
    if (!std::isfinite(values[k]) || values[k] < 0.0) throw InvalidInput("density values must be finite and >= 0");
  const double Z = grid->weights().dot(values);
  if (!(Z > 0.0)) throw EmptyMeasure("density has zero mass");
  Vec density = values / Z;
  Vec log_density = density.array().log().matrix();
  return GridDensity(std::move(grid), std::move(density), std::move(log_density));
}

GridDensity mix(const GridDensity& p, const GridDensity& q, double s) {
  if (!p.same_grid(q)) throw InvalidInput("mixture needs densities on the same grid");
  if (!(s >= 0.0 && s <= 1.0)) throw InvalidInput("mixture weight must lie in [0, 1]");
  return normalize_density(p.grid_ptr(), (1.0 - s) * p.density() + s * q.density());
}

GridDensity gaussian_on_grid(std::shared_ptr<const Grid> grid, const Vec& mean, const Mat& cov) {
  if (static_cast<std::size_t>(mean.size()) != grid->dim()) throw InvalidInput("Gaussian dimension mismatch");
  const Mat prec = cov.inverse();
  return normalize_from_log_potential(grid, [&](const VecRef& x) {
    const Vec r = x - mean;
    return -0.5 * r.dot(prec * r);
  });
}

double kl_divergence(const GridDensity& p, const GridDensity& q) {
  if (!p.same_grid(q)) throw InvalidInput("KL divergence needs densities on the same grid");
  const auto& w = p.grid().weights();
  std::size_t offending = 0;
  double kl = 0.0;
  for (Eigen::Index k = 0; k < p.density().size(); ++k) {
    const double pk = p.density()[k];
    if (pk < kNegligibleDensity) continue;
    const double lq = q.log_density()[k];
    if (!(q.density()[k] > 0.0) || !std::isfinite(lq)) {
      ++offending;
      continue;
    }
    kl += w[k] * pk * (p.log_density()[k] - lq);
  }
  if (offending > 0)
    throw SupportError("KL divergence: q vanishes where p has mass on " + std::to_string(offending) + " nodes",
                       offending);
  return kl;
}

double power_iteration_opnorm(const Mat& A, double rel_tol) {
  const Eigen::Index d = A.rows();
  if (d == 0) return 0.0;
  if (d == 1) return A(0, 0);
  double best = 0.0;
  // Two deterministic starts so that a start orthogonal to the top
  // eigenvector cannot go unnoticed.
  for (int start = 0; start < 2; ++start) {
    Vec v(d);
    for (Eigen::Index i = 0; i < d; ++i)
      v[i] = start == 0 ? 1.0 : ((i % 2 == 0) ? 1.0 : -1.0) / static_cast<double>(i + 1);
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 100000; ++it) {
      const Vec w = A * v;
      const double n = w.norm();
      if (n == 0.0) {
        lambda = 0.0;
        break;
      }
      const double next = v.dot(w);
      v = w / n;
      if (std::abs(next - lambda) <= rel_tol * std::abs(next)) {
        lambda = next;
        break;
      }
      lambda = next;
    }
    best = std::max(best, lambda);
  }
  return best;
}

CovarianceSummary covariance_opnorm(const Measure& p) {
  CovarianceSummary out;
  out.covariance = std::visit(
      [](const auto& m) -> Mat {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, EmpiricalMeasure>) {
          const Points centered = m.points().rowwise() - m.points().colwise().mean();
          return (centered.transpose() * centered) / static_cast<double>(m.count());
        } else {
          return m.covariance();
        }
      },
      p);
  Eigen::SelfAdjointEigenSolver<Mat> eig(out.covariance, Eigen::EigenvaluesOnly);
  out.opnorm = eig.eigenvalues().maxCoeff();
  return out;
}

Vec cumulative_1d(const GridDensity& p) {
  if (p.dim() != 1) throw Unsupported("cumulative distribution needs a 1-d density");
  const auto& f = p.density();
  const Eigen::Index n = f.size();
  const double h = p.grid().axes()[0].step();
  Vec df(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (k == 0)
      df[k] = (f[1] - f[0]) / h;
    else if (k == n - 1)
      df[k] = (f[n - 1] - f[n - 2]) / h;
    else
      df[k] = (f[k + 1] - f[k - 1]) / (2.0 * h);
  }
  // Trapezoid with the Euler-Maclaurin endpoint correction per cell.
  Vec F(n);
  F[0] = 0.0;
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    const double cell = 0.5 * h * (f[k] + f[k + 1]) - h * h / 12.0 * (df[k + 1] - df[k]);
    F[k + 1] = F[k] + std::max(cell, 0.0);
  }
  F /= F[n - 1];
  return F;
}

double quantile_1d(const GridDensity& p, const Vec& F, double u) {
  const auto& axis = p.grid().axes()[0];
  const auto& f = p.density();
  const Eigen::Index n = F.size();
  if (u <= 0.0) return axis.lo;
  if (u >= 1.0) return axis.hi;
  const double* begin = F.data();
  const double* it = std::upper_bound(begin, begin + n, u);
  Eigen::Index k = static_cast<Eigen::Index>(it - begin) - 1;
  k = std::clamp<Eigen::Index>(k, 0, n - 2);
  const double h = axis.step();
  double lo = 0.0, hi = 1.0;
  for (int it_count = 0; it_count < 60; ++it_count) {
    const double mid = 0.5 * (lo + hi);
    if (hermite_cdf(F[k], F[k + 1], f[k], f[k + 1], h, mid) < u)
      lo = mid;
    else
      hi = mid;
  }
  return axis.node(static_cast<std::size_t>(k)) + 0.5 * (lo + hi) * h;
}

namespace {

double w2_squared_one_way(const GridDensity& p, const Vec& Fp, const GridDensity& q, const Vec& Fq) {
  const auto& w = p.grid().weights();
  const auto& axis = p.grid().axes()[0];
  double s = 0.0;
  for (Eigen::Index k = 0; k < p.density().size(); ++k) {
    const double m = w[k] * p.density()[k];
    if (m < kNegligibleDensity) continue;
    const double x = axis.node(static_cast<std::size_t>(k));
    const double d = x - quantile_1d(q, Fq, Fp[k]);
    s += m * d * d;
  }
  return s;
}

}  // namespace

double w2_distance_1d(const GridDensity& p, const GridDensity& q) {
  if (p.dim() != 1 || q.dim() != 1) throw Unsupported("W2 distance is implemented for 1-d densities only");
  const Vec Fp = cumulative_1d(p), Fq = cumulative_1d(q);
  const double pq = w2_squared_one_way(p, Fp, q, Fq);
  const double qp = w2_squared_one_way(q, Fq, p, Fp);
  return std::sqrt(std::max(0.0, 0.5 * (pq + qp)));
}

double lsi_quotient_1d(const GridDensity& p, const Vec& g, const Vec& dg) {
  if (p.dim() != 1) throw Unsupported("LSI quotient needs a 1-d density");
  const auto& w = p.grid().weights();
  double eg2 = 0.0, eg2log = 0.0, egrad = 0.0;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double m = w[k] * p.density()[k];
    const double g2 = g[k] * g[k];
    eg2 += m * g2;
    if (g2 > 0.0) eg2log += m * g2 * std::log(g2);
    egrad += m * dg[k] * dg[k];
  }
  const double ent = eg2log - eg2 * std::log(eg2);
  return egrad > 0.0 ? ent / (2.0 * egrad) : 0.0;
}

}  // namespace mflab
