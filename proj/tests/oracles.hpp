#pragma once

// Reference values computed without the library: closed forms, series and
// brute-force minimization. Tests compare the library against these.

#include <array>
#include <cmath>
#include <functional>
#include <numbers>

namespace oracle {

/// Q3(H) = 2 mu |sym H|^2 + lambda (tr H)^2 written out entrywise.
inline double q3(double mu, double lambda, const std::array<double, 9>& h) {
  auto a = [&](int i, int j) { return h[3 * i + j]; };
  double sym2 = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double s = 0.5 * (a(i, j) + a(j, i));
      sym2 += s * s;
    }
  const double tr = a(0, 0) + a(1, 1) + a(2, 2);
  return 2.0 * mu * sym2 + lambda * tr * tr;
}

/// min over (a, b) in R^6 of Q3(e1 | a | b) by cyclic coordinate descent
/// with exact one-dimensional minimization from three function values.
inline double brute_force_young(double mu, double lambda) {
  std::array<double, 6> z{};
  auto value = [&](const std::array<double, 6>& p) {
    std::array<double, 9> h{};
    h[0] = 1.0;  // first column e1
    for (int r = 0; r < 3; ++r) {
      h[3 * r + 1] = p[r];
      h[3 * r + 2] = p[3 + r];
    }
    return q3(mu, lambda, h);
  };
  double prev = value(z);
  for (int sweep = 0; sweep < 10000; ++sweep) {
    for (int k = 0; k < 6; ++k) {
      auto zm = z, zp = z;
      zm[k] -= 1.0;
      zp[k] += 1.0;
      const double fm = value(zm), f0 = value(z), fp = value(zp);
      const double curv = fm - 2.0 * f0 + fp;
      if (curv > 0.0) z[k] -= 0.5 * (fp - fm) / curv;
    }
    const double cur = value(z);
    if (std::abs(prev - cur) <= 1e-16 * std::abs(cur)) return cur;
    prev = cur;
  }
  return value(z);
}

/// Torsion constant J of an a x b rectangle (a >= b), Saint-Venant series.
inline double rectangle_torsion_constant(double a, double b) {
  double sum = 0.0;
  for (int n = 1; n < 401; n += 2) sum += std::tanh(n * std::numbers::pi * a / (2.0 * b)) / std::pow(n, 5);
  return a * b * b * b / 3.0 * (1.0 - 192.0 * b / (std::pow(std::numbers::pi, 5) * a) * sum);
}

/// Clamped-free beam, uniform load f, stiffness EI: Euler-Bernoulli deflection.
inline double cantilever_deflection(double f, double ei, double length, double x) {
  return f * x * x * (6.0 * length * length - 4.0 * length * x + x * x) / (24.0 * ei);
}

/// Same beam, slope.
inline double cantilever_slope(double f, double ei, double length, double x) {
  return f * x * (3.0 * length * length - 3.0 * length * x + x * x) / (6.0 * ei);
}

/// Central 4-point directional derivative of fn at t = 0.
inline double directional_derivative(const std::function<double(double)>& fn, double eps) {
  return (8.0 * (fn(eps) - fn(-eps)) - (fn(2.0 * eps) - fn(-2.0 * eps))) / (12.0 * eps);
}

}  // namespace oracle
