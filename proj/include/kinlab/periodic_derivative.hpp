#pragma once

#include "kinlab/phase_space.hpp"

namespace kinlab {

enum class DerivativeScheme { Spectral, Central4 };

/// d/dx on a uniform periodic grid as a dense matrix.
class PeriodicDerivative
{
 public:
  PeriodicDerivative(int n, double length, DerivativeScheme scheme = DerivativeScheme::Spectral);

  /// Derivative of samples; constants map to exactly zero.
  Vec apply(const Vec& samples) const;
  const Mat& matrix() const { return D_; }
  DerivativeScheme scheme() const { return scheme_; }

 private:
  Mat D_;
  DerivativeScheme scheme_;
};

}  // namespace kinlab
