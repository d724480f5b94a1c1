#pragma once

#include <stdexcept>
#include <string>

namespace nvdnp {

// Bad user input: configuration values, custom populations, program contracts.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Quantum numbers or transitions outside the NV-14N level scheme.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A protocol cannot be built for the given system (e.g. unresolvable lines).
class BuildError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Spectrum analysis failed (lines outside range or not resolvable).
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nvdnp
