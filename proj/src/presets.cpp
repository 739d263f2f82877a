#include "mflab/presets.hpp"

#include "mflab/error.hpp"

namespace mflab {

ModelSpec zero_preset(std::size_t d, double sigma, double lambda) { return ModelSpec::zero(d, sigma, lambda); }

ModelSpec quadratic_preset() { return ModelSpec::quadratic_oracle(1.0, 1.0, 1.0, 0.5, Vec::Ones(1)); }

ModelSpec relu_preset() {
  auto datum = [](double x, double y) { return Datum{Vec::Constant(1, x), y, 1.0 / 3.0}; };
  std::vector<Datum> data{datum(1.0, 0.5), datum(0.6, 1.0), datum(-0.8, 0.8)};
  return ModelSpec::example_nn(1.0, 1.0, std::move(data), Loss{LossKind::Squared, 1.0, 2.0}, Activation::ReLU);
}

ModelSpec preset_by_name(const std::string& name) {
  if (name == "zero") return zero_preset();
  if (name == "quadratic") return quadratic_preset();
  if (name == "relu") return relu_preset();
  throw InvalidInput("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() { return {"zero", "quadratic", "relu"}; }

}  // namespace mflab
