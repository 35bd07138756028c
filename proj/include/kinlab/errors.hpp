#pragma once

#include <stdexcept>
#include <string>

namespace kinlab {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error
{
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid physical input (non-positive density, bad wavenumber, ...).
class DomainError : public Error
{
 public:
  using Error::Error;
};

/// Invalid user configuration.
class ConfigError : public Error
{
 public:
  using Error::Error;
};

/// Moment extraction produced rho <= 0 or T <= 0.
class DegenerateMomentError : public Error
{
 public:
  DegenerateMomentError(int cell, double rho, double T);
  int cell;
  double rho;
  double T;
};

/// Failure of a numerical kernel (eigensolver, linear solve, non-convergence).
class NumericalError : public Error
{
 public:
  using Error::Error;
};

/// Invariant Gram matrix too ill-conditioned to orthonormalize.
class IllConditionedBasisError : public NumericalError
{
 public:
  explicit IllConditionedBasisError(double condition_number);
  double condition_number;
};

/// Right-hand side not orthogonal to the collision invariants.
class SolvabilityError : public Error
{
 public:
  SolvabilityError(double relative_projection, const std::string& what);
  double relative_projection;
};

/// NaN/Inf detected while time stepping.
class BlowUpError : public NumericalError
{
 public:
  explicit BlowUpError(double time);
  double time;
};

/// Floating-point range exceeded (e.g. matrix exponential overflow).
class RangeError : public NumericalError
{
 public:
  using NumericalError::NumericalError;
};

}  // namespace kinlab
