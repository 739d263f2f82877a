#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mflab/bounds.hpp"
#include "mflab/measure.hpp"

namespace mflab {

enum class ModelKind { Zero, ExampleNN, QuadraticOracle };
enum class Activation { ReLU, Tanh, Identity };
enum class LossKind { Squared, Logistic };

// Convex per-datum loss l(yhat, y).
//
// Squared: (scale/2) r^2 with r = yhat - y while |r| <= clip_radius, continued
// linearly beyond it, so that l' is bounded by scale * clip_radius. With an
// infinite radius the loss is the plain quadratic.
// Logistic: log(1 + exp(-y yhat)) with labels y in {-1, +1}.
struct Loss {
  LossKind kind = LossKind::Squared;
  double scale = 1.0;
  double clip_radius = std::numeric_limits<double>::infinity();

  double value(double yhat, double y) const;
  double d1(double yhat, double y) const;
  double d2(double yhat, double y) const;
  double smoothness() const;  // beta_ell
  double lipschitz() const;   // L_ell
};

struct Datum {
  Vec x;
  double y = 0.0;
  double weight = 1.0;
};

struct QuadraticParams {
  double kappa = 1.0;
  double c = 0.0;
  Vec e;
};

// Mean-field energy F(nu) = F0(nu) + int V dnu with V = (lambda/2)|x|^2 and
// entropic noise sigma. Immutable after construction.
//
// Every F0 here depends on nu only through a finite feature vector
// (E_nu h(., z_j) for the network model, <e, mean(nu)> for the quadratic
// oracle), so operations split into "features of a measure" and
// "variations at given features".
class ModelSpec {
 public:
  static ModelSpec zero(std::size_t d, double sigma, double lambda);
  static ModelSpec example_nn(double sigma, double lambda, std::vector<Datum> data, Loss loss,
                              Activation activation);
  static ModelSpec quadratic_oracle(double sigma, double lambda, double kappa, double c, Vec e);

  ModelKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  double sigma() const { return sigma_; }
  double lambda() const { return lambda_; }
  const std::vector<Datum>& data() const { return data_; }
  const Loss& loss() const { return loss_; }
  Activation activation() const { return activation_; }
  const QuadraticParams& quadratic() const { return quad_; }
  bool rescaled() const { return rescaled_; }
  // Scale factor eta applied by rescaling (1 for an unscaled model).
  double eta() const { return eta_; }

  std::size_t feature_count() const;
  // Feature vector of a single point (the atom delta_x).
  Vec point_features(const VecRef& x) const;
  // Feature vector of a measure; throws InvalidInput on dimension mismatch.
  Vec features(const Measure& nu) const;
  Vec features_of_points(const Points& x) const;

  double energy_at(const Vec& feats) const;
  // Partial derivatives of energy_at with respect to each feature.
  Vec energy_gradient_at(const Vec& feats) const;
  double first_variation_at(const Vec& feats, const VecRef& x) const;
  void gradient_at(const Vec& feats, const VecRef& x, Eigen::Ref<Vec> out) const;
  double second_variation_at(const Vec& feats, const VecRef& x, const VecRef& y) const;
  // Lipschitz constant of x -> first_variation_at(feats, x).
  double first_variation_lipschitz(const Vec& feats) const;

  // Confinement V(x) = (lambda/2)|x|^2.
  double confinement(const VecRef& x) const { return 0.5 * lambda_ * x.squaredNorm(); }

  void check_dim(std::size_t d) const;

 private:
  ModelSpec() = default;
  void validate() const;
  double activation_value(double u) const;
  double activation_slope(double u) const;

  friend ModelSpec rescale_model(const ModelSpec& model);

  ModelKind kind_ = ModelKind::Zero;
  std::size_t dim_ = 1;
  double sigma_ = 1.0;
  double lambda_ = 1.0;
  std::vector<Datum> data_;
  Loss loss_;
  Activation activation_ = Activation::ReLU;
  QuadraticParams quad_;
  bool rescaled_ = false;
  double eta_ = 1.0;
};

// Push the model through x -> eta x with eta = sqrt(lambda)/sigma: lambda
// becomes sigma^2 and F0 becomes F0((1/eta)_# .). Refuses a rescaled model.
ModelSpec rescale_model(const ModelSpec& model);

double energy(const ModelSpec& model, const Measure& nu);
double first_variation(const ModelSpec& model, const Measure& nu, const VecRef& x);
Vec wasserstein_gradient(const ModelSpec& model, const Measure& nu, const VecRef& x);
double second_variation(const ModelSpec& model, const Measure& nu, const VecRef& x, const VecRef& y);
BoundInputs model_constants(const ModelSpec& model);

// Entropy-regularised energy F0 + int V + (sigma^2/2) int nu log nu of a grid density.
double free_energy(const ModelSpec& model, const GridDensity& nu);

std::string to_string(ModelKind k);
std::string to_string(Activation a);
ModelKind parse_model_kind(const std::string& s);
Activation parse_activation(const std::string& s);

}  // namespace mflab
