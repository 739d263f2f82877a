#pragma once

#include <string>
#include <vector>

#include "mflab/model.hpp"

namespace mflab {

// Zero interaction, V = (lambda/2)|x|^2.
ModelSpec zero_preset(std::size_t d = 1, double sigma = 1.0, double lambda = 1.0);

// F0(nu) = (kappa/2)(<e, mean nu> - c)^2 with sigma = lambda = kappa = 1, c = 0.5, e = 1.
ModelSpec quadratic_preset();

// Three-datum ReLU network in d = 1, squared loss (scale 1, clip radius 2),
// sigma = lambda = 1. Constants: L_h = 1, beta_hat = 1, B = 2.
ModelSpec relu_preset();

ModelSpec preset_by_name(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace mflab
