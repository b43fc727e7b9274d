// test_support.hpp
//
// Test-only reference oracles, kept independent of the ray-panel quadrature
// engine they cross-check: plain graded trapezoid sums over explicit meshes.

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "nlb/geometry.hpp"

namespace nlb::testing {

/// Trapezoid integral of f over [a, b] on a geometrically graded mesh that
/// clusters points toward the `toward` endpoint (resolves endpoint
/// singularities of integrable type).
inline double graded_trapezoid(const std::function<double(double)>& f, double a,
                               double b, double toward, int points_per_decade,
                               double tiny = 1e-13) {
  if (!(b > a)) return 0.0;
  std::vector<double> xs;
  double span = b - a;
  bool to_left = std::abs(toward - a) < std::abs(toward - b);
  // offsets from the singular end, geometric from tiny*span to span; the
  // integrand is never evaluated at the singular endpoint itself
  double lo = tiny * span;
  int decades = int(std::ceil(std::log10(span / lo)));
  xs.push_back(lo);
  for (int k = 1; k <= decades * points_per_decade; ++k) {
    double off = lo * std::pow(10.0, double(k) / points_per_decade);
    if (off >= span) break;
    xs.push_back(off);
  }
  xs.push_back(span);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    double o0 = xs[i], o1 = xs[i + 1];
    double x0 = to_left ? a + o0 : b - o1;
    double x1 = to_left ? a + o1 : b - o0;
    // refine each span uniformly
    int m = 8;
    double acc = 0.0;
    for (int k = 0; k < m; ++k) {
      double u0 = x0 + (x1 - x0) * k / m;
      double u1 = x0 + (x1 - x0) * (k + 1) / m;
      acc += 0.5 * (f(u0) + f(u1)) * (u1 - u0);
    }
    total += acc;
  }
  return total;
}

/// Reference censored integral on the interval (a, b):
/// int_{x+z in [a,b]} [g(x+z) - g(x)] K |z|^{-(1+alpha)} dz, brute-force
/// graded trapezoid on each side, clustered both at z = 0 and at the
/// boundary crossing.
inline double reference_censored_interval(const std::function<double(double)>& g,
                                          double a, double b, double Kconst,
                                          double alpha, double x,
                                          int points_per_decade = 200) {
  auto inc = [&](double z) {
    return (g(x + z) - g(x)) * Kconst * std::pow(std::abs(z), -(1.0 + alpha));
  };
  // split each side at the half-way point so both ends get grading
  double right = b - x, left = x - a;
  double total = 0.0;
  total += graded_trapezoid(inc, 0.0, right / 2, 0.0, points_per_decade);
  total += graded_trapezoid(inc, right / 2, right, right, points_per_decade);
  total += graded_trapezoid(inc, -left / 2, 0.0, 0.0, points_per_decade);
  total += graded_trapezoid(inc, -left, -left / 2, -left, points_per_decade);
  return total;
}

/// Reference full-operator integral with truncation R and frozen-tail term,
/// matching the definition the engine integrates (u inside, phi outside,
/// exterior datum frozen at the truncation point).
inline double reference_full_interval(const std::function<double(double)>& u_inside,
                                      const std::function<double(double)>& phi,
                                      double a, double b, double Kconst, double alpha,
                                      double x, double ux, double R,
                                      int points_per_decade = 200) {
  auto val = [&](double y) { return (y >= a && y <= b) ? u_inside(y) : phi(y); };
  auto inc = [&](double z) {
    return (val(x + z) - ux) * Kconst * std::pow(std::abs(z), -(1.0 + alpha));
  };
  double total = 0.0;
  total += graded_trapezoid(inc, 0.0, b - x, 0.0, points_per_decade);
  total += graded_trapezoid(inc, b - x, R, b - x, points_per_decade);
  total += graded_trapezoid(inc, a - x, 0.0, 0.0, points_per_decade);
  total += graded_trapezoid(inc, -R, a - x, a - x, points_per_decade);
  // frozen tails
  double tail = Kconst * std::pow(R, -alpha) / alpha;
  total += (phi(x + R) - ux) * tail + (phi(x - R) - ux) * tail;
  return total;
}

}  // namespace nlb::testing
