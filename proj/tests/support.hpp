#pragma once

#include <cstdint>
#include <memory>
#include <random>

#include "kinlab/phase_space.hpp"

namespace kinlab::testing {

inline std::mt19937_64& rng()
{
  static std::mt19937_64 gen(12345);
  return gen;
}

inline double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng()); }

inline Vec gaussian_vec(int n)
{
  std::normal_distribution<double> nd;
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = nd(rng());
  return v;
}

/// Random admissible cell state in dimension d.
inline CellState random_state(int d)
{
  CellState s;
  s.rho = uniform(0.5, 2.0);
  s.T = uniform(0.5, 2.0);
  s.R = 1.0;
  s.u = Vec(d);
  for (int i = 0; i < d; ++i) s.u(i) = uniform(-0.5, 0.5);
  return s;
}

inline VelocityGridPtr hermite_grid(const CellState& s, int n)
{
  return std::make_shared<const VelocityGrid>(VelocityGrid::gauss_hermite(s.dim(), n, s.u, std::sqrt(s.R * s.T)));
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace kinlab::testing
