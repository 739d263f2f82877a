#pragma once

#include <cstddef>
#include <utility>

#include <Eigen/Dense>

namespace mflab {

// Gauss-Hermite rule for the standard normal: sum_k w_k f(x_k) ~ E f(Z).
// Nodes come from the Golub-Welsch eigenproblem and are sorted ascending.
struct GaussHermiteRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};
GaussHermiteRule gauss_hermite(std::size_t n);

// Trapezoid weights of a uniform 1-d grid with n nodes and spacing h.
Eigen::VectorXd trapezoid_weights(std::size_t n, double h);

// n log-spaced points from lo to hi inclusive.
Eigen::VectorXd log_space(double lo, double hi, std::size_t n);

}  // namespace mflab
