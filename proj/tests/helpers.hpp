#pragma once

#include <lindblad.hpp>

#include <cmath>
#include <random>
#include <vector>

namespace testing_helpers {

using lindblad::ComplexMatrix;
using lindblad::Index;

inline ComplexMatrix random_matrix(Index d, std::mt19937_64& gen) {
  std::normal_distribution<double> n;
  ComplexMatrix m(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) m(i, j) = {n(gen), n(gen)};
  return m;
}

inline ComplexMatrix random_density(Index d, std::mt19937_64& gen) {
  const ComplexMatrix g = random_matrix(d, gen);
  ComplexMatrix rho = g * g.adjoint();
  return rho / rho.trace().real();
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double sample_variance(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double mean(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  return m / static_cast<double>(v.size());
}

}  // namespace testing_helpers
