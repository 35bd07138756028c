#include "kinlab/periodic_derivative.hpp"

#include <cmath>

#include "kinlab/errors.hpp"

namespace kinlab {

PeriodicDerivative::PeriodicDerivative(int n, double length, DerivativeScheme scheme)
    : D_(Mat::Zero(n, n))
    , scheme_(scheme)
{
  if (n < 1 || !(length > 0.0)) throw DomainError("periodic derivative needs n >= 1 and length > 0");
  constexpr double kPi = 3.14159265358979323846;
  if (scheme == DerivativeScheme::Spectral) {
    const double k0 = 2.0 * kPi / length;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const int m = i - j;
        const double sign = (m % 2 == 0) ? 1.0 : -1.0;
        const double arg = kPi * m / n;
        D_(i, j) = (n % 2 == 0) ? 0.5 * k0 * sign / std::tan(arg) : 0.5 * k0 * sign / std::sin(arg);
      }
  } else {
    if (n < 5) throw DomainError("fourth-order differences need at least 5 cells");
    const double h = length / n;
    const double c1 = 8.0 / (12.0 * h);
    const double c2 = 1.0 / (12.0 * h);
    for (int i = 0; i < n; ++i) {
      D_(i, (i + 1) % n) += c1;
      D_(i, (i + n - 1) % n) -= c1;
      D_(i, (i + 2) % n) -= c2;
      D_(i, (i + n - 2) % n) += c2;
    }
  }
}

Vec PeriodicDerivative::apply(const Vec& samples) const
{
  if (samples.size() != D_.cols()) throw DomainError("periodic derivative: size mismatch");
  if (samples.size() == 0 || samples.maxCoeff() == samples.minCoeff()) return Vec::Zero(samples.size());
  const double mean = samples.mean();
  return D_ * (samples.array() - mean).matrix();
}

}  // namespace kinlab
