#include "mflab/model.hpp"

#include <algorithm>
#include <cmath>

#include "mflab/error.hpp"

namespace mflab {

namespace {

double softplus(double u) { return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }
double logistic(double u) { return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }

}  // namespace

double Loss::value(double yhat, double y) const {
  if (kind == LossKind::Logistic) return softplus(-y * yhat);
  const double r = yhat - y;
  const double R = clip_radius;
  if (std::abs(r) <= R) return 0.5 * scale * r * r;
  return scale * (R * std::abs(r) - 0.5 * R * R);
}

double Loss::d1(double yhat, double y) const {
  if (kind == LossKind::Logistic) return -y * logistic(-y * yhat);
  return scale * std::clamp(yhat - y, -clip_radius, clip_radius);
}

double Loss::d2(double yhat, double y) const {
  if (kind == LossKind::Logistic) return y * y * logistic(y * yhat) * logistic(-y * yhat);
  return std::abs(yhat - y) <= clip_radius ? scale : 0.0;
}

double Loss::smoothness() const { return kind == LossKind::Logistic ? 0.25 : scale; }

double Loss::lipschitz() const { return kind == LossKind::Logistic ? 1.0 : scale * clip_radius; }

ModelSpec ModelSpec::zero(std::size_t d, double sigma, double lambda) {
  ModelSpec m;
  m.kind_ = ModelKind::Zero;
  m.dim_ = d;
  m.sigma_ = sigma;
  m.lambda_ = lambda;
  m.validate();
  return m;
}

ModelSpec ModelSpec::example_nn(double sigma, double lambda, std::vector<Datum> data, Loss loss,
                                Activation activation) {
  ModelSpec m;
  m.kind_ = ModelKind::ExampleNN;
  m.dim_ = data.empty() ? 0 : static_cast<std::size_t>(data.front().x.size());
  m.sigma_ = sigma;
  m.lambda_ = lambda;
  m.data_ = std::move(data);
  m.loss_ = loss;
  m.activation_ = activation;
  m.validate();
  return m;
}

ModelSpec ModelSpec::quadratic_oracle(double sigma, double lambda, double kappa, double c, Vec e) {
  ModelSpec m;
  m.kind_ = ModelKind::QuadraticOracle;
  m.dim_ = static_cast<std::size_t>(e.size());
  m.sigma_ = sigma;
  m.lambda_ = lambda;
  m.quad_ = QuadraticParams{kappa, c, std::move(e)};
  m.validate();
  return m;
}

void ModelSpec::validate() const {
  if (!(sigma_ > 0.0) || !std::isfinite(sigma_)) throw InvalidInput("sigma must be positive");
  if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) throw InvalidInput("lambda must be positive");
  if (dim_ == 0) throw InvalidInput("model dimension must be at least 1");
  if (kind_ == ModelKind::ExampleNN) {
    if (data_.empty()) throw InvalidInput("network model needs at least one datum");
    double total = 0.0;
    for (const auto& z : data_) {
      if (static_cast<std::size_t>(z.x.size()) != dim_) throw InvalidInput("data inputs must share one dimension");
      if (!z.x.allFinite() || !std::isfinite(z.y)) throw InvalidInput("data must be finite");
      if (!(z.weight >= 0.0)) throw InvalidInput("data weights must be nonnegative");
      if (loss_.kind == LossKind::Logistic && std::abs(z.y) != 1.0)
        throw InvalidInput("logistic loss needs labels in {-1, +1}");
      total += z.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("data weights must sum to 1");
    if (loss_.kind == LossKind::Squared && (!(loss_.scale > 0.0) || !(loss_.clip_radius > 0.0)))
      throw InvalidInput("squared loss needs positive scale and clip radius");
  }
  if (kind_ == ModelKind::QuadraticOracle) {
    if (!(quad_.kappa >= 0.0) || !std::isfinite(quad_.c)) throw InvalidInput("quadratic oracle needs kappa >= 0");
    if (std::abs(quad_.e.norm() - 1.0) > 1e-12) throw InvalidInput("quadratic oracle direction must be a unit vector");
  }
}

void ModelSpec::check_dim(std::size_t d) const {
  if (d != dim_)
    throw InvalidInput("dimension mismatch: model has d=" + std::to_string(dim_) + ", input has d=" +
                       std::to_string(d));
}

double ModelSpec::activation_value(double u) const {
  switch (activation_) {
    case Activation::ReLU: return u > 0.0 ? u : 0.0;
    case Activation::Tanh: return std::tanh(u);
    case Activation::Identity: return u;
  }
  return u;
}

double ModelSpec::activation_slope(double u) const {
  switch (activation_) {
    // Subgradient 0 at the kink.
    case Activation::ReLU: return u > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: {
      const double th = std::tanh(u);
      return 1.0 - th * th;
    }
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

std::size_t ModelSpec::feature_count() const {
  switch (kind_) {
    case ModelKind::Zero: return 0;
    case ModelKind::QuadraticOracle: return 1;
    case ModelKind::ExampleNN: return data_.size();
  }
  return 0;
}

Vec ModelSpec::point_features(const VecRef& x) const {
  Vec f(static_cast<Eigen::Index>(feature_count()));
  if (kind_ == ModelKind::QuadraticOracle) {
    f[0] = quad_.e.dot(x);
  } else if (kind_ == ModelKind::ExampleNN) {
    for (std::size_t j = 0; j < data_.size(); ++j)
      f[static_cast<Eigen::Index>(j)] = activation_value(data_[j].x.dot(x));
  }
  return f;
}

Vec ModelSpec::features(const Measure& nu) const {
  check_dim(mflab::dim(nu));
  switch (kind_) {
    case ModelKind::Zero: return Vec(0);
    case ModelKind::QuadraticOracle: {
      Vec f(1);
      f[0] = quad_.e.dot(mflab::mean(nu));
      return f;
    }
    case ModelKind::ExampleNN: {
      Vec f(static_cast<Eigen::Index>(data_.size()));
      for (std::size_t j = 0; j < data_.size(); ++j) {
        const Vec& xj = data_[j].x;
        f[static_cast<Eigen::Index>(j)] = expect(nu, [&](const auto& th) { return activation_value(xj.dot(th)); });
      }
      return f;
    }
  }
  return Vec(0);
}

Vec ModelSpec::features_of_points(const Points& x) const {
  check_dim(static_cast<std::size_t>(x.cols()));
  Vec f = Vec::Zero(static_cast<Eigen::Index>(feature_count()));
  if (f.size() == 0) return f;
  for (Eigen::Index i = 0; i < x.rows(); ++i) f += point_features(x.row(i).transpose());
  return f / static_cast<double>(x.rows());
}

double ModelSpec::energy_at(const Vec& feats) const {
  switch (kind_) {
    case ModelKind::Zero: return 0.0;
    case ModelKind::QuadraticOracle: {
      const double r = feats[0] - quad_.c;
      return 0.5 * quad_.kappa * r * r;
    }
    case ModelKind::ExampleNN: {
      double s = 0.0;
      for (std::size_t j = 0; j < data_.size(); ++j)
        s += data_[j].weight * loss_.value(feats[static_cast<Eigen::Index>(j)], data_[j].y);
      return s;
    }
  }
  return 0.0;
}

Vec ModelSpec::energy_gradient_at(const Vec& feats) const {
  Vec g = Vec::Zero(feats.size());
  if (kind_ == ModelKind::QuadraticOracle) {
    g[0] = quad_.kappa * (feats[0] - quad_.c);
  } else if (kind_ == ModelKind::ExampleNN) {
    for (std::size_t j = 0; j < data_.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      g[jj] = data_[j].weight * loss_.d1(feats[jj], data_[j].y);
    }
  }
  return g;
}

double ModelSpec::first_variation_at(const Vec& feats, const VecRef& x) const {
  switch (kind_) {
    case ModelKind::Zero: return 0.0;
    case ModelKind::QuadraticOracle: return quad_.kappa * (feats[0] - quad_.c) * quad_.e.dot(x);
    case ModelKind::ExampleNN: {
      double s = 0.0;
      for (std::size_t j = 0; j < data_.size(); ++j) {
        const auto& z = data_[j];
        if (z.weight == 0.0) continue;
        s += z.weight * loss_.d1(feats[static_cast<Eigen::Index>(j)], z.y) * activation_value(z.x.dot(x));
      }
      return s;
    }
  }
  return 0.0;
}

void ModelSpec::gradient_at(const Vec& feats, const VecRef& x, Eigen::Ref<Vec> out) const {
  out.setZero();
  switch (kind_) {
    case ModelKind::Zero: return;
    case ModelKind::QuadraticOracle: out = quad_.kappa * (feats[0] - quad_.c) * quad_.e; return;
    case ModelKind::ExampleNN:
      for (std::size_t j = 0; j < data_.size(); ++j) {
        const auto& z = data_[j];
        if (z.weight == 0.0) continue;
        const double slope = activation_slope(z.x.dot(x));
        if (slope == 0.0) continue;
        out += (z.weight * loss_.d1(feats[static_cast<Eigen::Index>(j)], z.y) * slope) * z.x;
      }
      return;
  }
}

double ModelSpec::second_variation_at(const Vec& feats, const VecRef& x, const VecRef& y) const {
  switch (kind_) {
    case ModelKind::Zero: return 0.0;
    case ModelKind::QuadraticOracle: return quad_.kappa * quad_.e.dot(x) * quad_.e.dot(y);
    case ModelKind::ExampleNN: {
      double s = 0.0;
      for (std::size_t j = 0; j < data_.size(); ++j) {
        const auto& z = data_[j];
        if (z.weight == 0.0) continue;
        s += z.weight * loss_.d2(feats[static_cast<Eigen::Index>(j)], z.y) * activation_value(z.x.dot(x)) *
             activation_value(z.x.dot(y));
      }
      return s;
    }
  }
  return 0.0;
}

double ModelSpec::first_variation_lipschitz(const Vec& feats) const {
  switch (kind_) {
    case ModelKind::Zero: return 0.0;
    case ModelKind::QuadraticOracle: return quad_.kappa * std::abs(feats[0] - quad_.c);
    case ModelKind::ExampleNN: {
      double s = 0.0;
      for (std::size_t j = 0; j < data_.size(); ++j)
        s += data_[j].weight * std::abs(loss_.d1(feats[static_cast<Eigen::Index>(j)], data_[j].y)) *
             data_[j].x.norm();
      return s;
    }
  }
  return 0.0;
}

ModelSpec rescale_model(const ModelSpec& model) {
  if (model.rescaled_) throw InvalidInput("model is already rescaled");
  const double eta = std::sqrt(model.lambda_) / model.sigma_;
  ModelSpec out = model;
  out.lambda_ = model.sigma_ * model.sigma_;
  out.rescaled_ = true;
  out.eta_ = eta;
  // h(theta / eta, x) = h(theta, x / eta) for every activation here.
  for (auto& z : out.data_) z.x /= eta;
  out.quad_.kappa = model.quad_.kappa / (eta * eta);
  out.quad_.c = model.quad_.c * eta;
  return out;
}

double energy(const ModelSpec& model, const Measure& nu) { return model.energy_at(model.features(nu)); }

double first_variation(const ModelSpec& model, const Measure& nu, const VecRef& x) {
  model.check_dim(static_cast<std::size_t>(x.size()));
  return model.first_variation_at(model.features(nu), x);
}

Vec wasserstein_gradient(const ModelSpec& model, const Measure& nu, const VecRef& x) {
  model.check_dim(static_cast<std::size_t>(x.size()));
  Vec g(x.size());
  model.gradient_at(model.features(nu), x, g);
  return g;
}

double second_variation(const ModelSpec& model, const Measure& nu, const VecRef& x, const VecRef& y) {
  model.check_dim(static_cast<std::size_t>(x.size()));
  model.check_dim(static_cast<std::size_t>(y.size()));
  return model.second_variation_at(model.features(nu), x, y);
}

BoundInputs model_constants(const ModelSpec& model) {
  BoundInputs in;
  in.sigma = model.sigma();
  in.lambda = model.lambda();
  in.d = model.dim();
  in.rescaled = model.rescaled();
  switch (model.kind()) {
    case ModelKind::Zero:
      in.beta_hat = 0.0;
      in.B = 0.0;
      in.L_h = 0.0;
      in.L_ell = 0.0;
      in.beta_ell = 0.0;
      in.d_prox = in.d;
      break;
    case ModelKind::QuadraticOracle:
      // l(yhat) = (kappa/2)(yhat - c)^2 with h = <theta, e>: unbounded gradient.
      in.L_h = model.quadratic().e.norm();
      in.beta_ell = model.quadratic().kappa;
      in.L_ell = std::numeric_limits<double>::infinity();
      in.beta_hat = in.L_h * in.L_h * in.beta_ell;
      in.B = in.beta_ell == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      in.d_prox = 1;
      break;
    case ModelKind::ExampleNN: {
      double Lh = 0.0;
      for (const auto& z : model.data())
        if (z.weight > 0.0) Lh = std::max(Lh, z.x.norm());
      in.L_h = Lh;
      in.beta_ell = model.loss().smoothness();
      in.L_ell = model.loss().lipschitz();
      in.beta_hat = Lh * Lh * in.beta_ell;
      in.B = Lh == 0.0 ? 0.0 : Lh * in.L_ell;
      in.d_prox = 1;
      break;
    }
  }
  return in;
}

double free_energy(const ModelSpec& model, const GridDensity& nu) {
  model.check_dim(nu.dim());
  const auto& w = nu.grid().weights();
  double potential = 0.0, neg_entropy = 0.0;
  for (Eigen::Index k = 0; k < nu.density().size(); ++k) {
    const double m = w[k] * nu.density()[k];
    if (m <= 0.0) continue;
    potential += m * model.confinement(nu.grid().node(static_cast<std::size_t>(k)));
    neg_entropy += m * nu.log_density()[k];
  }
  const double s2 = model.sigma() * model.sigma();
  return energy(model, Measure{nu}) + potential + 0.5 * s2 * neg_entropy;
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Zero: return "zero";
    case ModelKind::ExampleNN: return "example_nn";
    case ModelKind::QuadraticOracle: return "quadratic_oracle";
  }
  return "zero";
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "relu";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "zero") return ModelKind::Zero;
  if (s == "example_nn") return ModelKind::ExampleNN;
  if (s == "quadratic_oracle") return ModelKind::QuadraticOracle;
  throw InvalidInput("unknown model kind '" + s + "'");
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw InvalidInput("unknown activation '" + s + "'");
}

}  // namespace mflab
