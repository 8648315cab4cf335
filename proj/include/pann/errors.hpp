#pragma once

#include <stdexcept>
#include <string>

namespace pann {

struct NonPositiveJacobian : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EigenFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised by tape primitives on invalid operands (log/pow of a non-positive
// base, division by zero).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed model/dataset file; message carries position information.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownMode : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RejectionOverflow : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonPositiveBracket : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateVariance : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// General-F Cauchy stress is undefined for incompressible energies; use the
// mode-specific elimination instead.
struct IncompressibleUnsupported : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pann
