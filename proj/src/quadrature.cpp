#include "mflab/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include <Eigen/Eigenvalues>

#include "mflab/error.hpp"

namespace mflab {

GaussHermiteRule gauss_hermite(std::size_t n) {
  if (n == 0) throw InvalidInput("Gauss-Hermite rule needs at least one node");
  static std::mutex cache_mutex;
  static std::map<std::size_t, GaussHermiteRule> cache;
  {
    std::lock_guard lock(cache_mutex);
    if (auto it = cache.find(n); it != cache.end()) return it->second;
  }
  // Jacobi matrix of the probabilists' Hermite polynomials: zero diagonal,
  // off-diagonal sqrt(k). Weights are the squared first eigenvector entries.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 1; k < n; ++k) {
    const double b = std::sqrt(static_cast<double>(k));
    J(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = b;
    J(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k)) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
  GaussHermiteRule rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = eig.eigenvectors().row(0).transpose().array().square();
  rule.weights /= rule.weights.sum();
  std::lock_guard lock(cache_mutex);
  cache.emplace(n, rule);
  return rule;
}

Eigen::VectorXd trapezoid_weights(std::size_t n, double h) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), h);
  if (n >= 1) {
    w[0] = 0.5 * h;
    w[static_cast<Eigen::Index>(n - 1)] = 0.5 * h;
  }
  return w;
}

Eigen::VectorXd log_space(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0 && hi >= lo) || n == 0) throw InvalidInput("log_space needs 0 < lo <= hi and n > 0");
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i)
    out[static_cast<Eigen::Index>(i)] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  out[0] = lo;
  out[static_cast<Eigen::Index>(n - 1)] = hi;
  return out;
}

}  // namespace mflab
