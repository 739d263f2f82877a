#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mflab {

// Base class of every error raised by the library. The CLI maps
// InvalidInput/ConfigError to exit status 2 and everything else to 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a documented precondition (dimension mismatch, bad weights, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A closed-form calculator was evaluated outside its domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

class Unsupported : public Error {
 public:
  using Error::Error;
};

// Normalizing a log-potential that is -inf everywhere.
class EmptyMeasure : public Error {
 public:
  using Error::Error;
};

// KL(p||q) with q = 0 somewhere p > 0.
class SupportError : public Error {
 public:
  SupportError(const std::string& what, std::size_t offending)
      : Error(what), offending_nodes(offending) {}
  std::size_t offending_nodes;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, std::vector<double> trace)
      : Error(what), residual_trace(std::move(trace)) {}
  std::vector<double> residual_trace;
};

// Particle simulation left the divergence guard box.
class Divergence : public Error {
 public:
  using Error::Error;
};

// Flow integration produced a non-monotone map.
class IntegrationFailure : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mflab
