#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "betatess/error.hpp"

namespace betatess {

struct QuadratureResult {
  double value = 0;
  double error = 0;
};

// Tanh-sinh rule on [0, 1]. The integrand receives (x, 1 - x) with both computed without cancellation,
// so endpoint singularities of algebraic type can be evaluated accurately.
template <typename F>
QuadratureResult tanh_sinh_unit(F&& f, double rel_tol = 1e-12, int max_level = 9) {
  constexpr double kHalfPi = 1.57079632679489661923;
  constexpr double t_max = 6.0;
  const auto node = [&](double t) {
    const double u = 2 * kHalfPi * std::sinh(t);
    // x = 1 / (1 + e^-u), 1 - x = 1 / (1 + e^u), dx/dt = x (1 - x) pi cosh t.
    const double x = 1 / (1 + std::exp(-u));
    const double xc = 1 / (1 + std::exp(u));
    const double w = x * xc * 2 * kHalfPi * std::cosh(t);
    if (!(w > 0) || x <= 0 || xc <= 0) return 0.0;
    return w * f(x, xc);
  };
  double h = 0.5;
  double sum = node(0);
  for (double t = h; t <= t_max; t += h) sum += node(t) + node(-t);
  double prev = sum * h;
  QuadratureResult out{prev, std::abs(prev)};
  for (int level = 1; level <= max_level; ++level) {
    h /= 2;
    for (double t = h; t <= t_max; t += 2 * h) sum += node(t) + node(-t);
    const double cur = sum * h;
    out.error = std::abs(cur - prev);
    out.value = cur;
    if (level >= 3 && out.error <= rel_tol * std::abs(cur)) return out;
    prev = cur;
  }
  return out;
}

// Tanh-sinh on [a, b]; f receives (x, x - a, b - x).
template <typename F>
QuadratureResult tanh_sinh(F&& f, double a, double b, double rel_tol = 1e-12) {
  const double len = b - a;
  QuadratureResult r = tanh_sinh_unit([&](double x, double xc) { return f(a + len * x, len * x, len * xc); }, rel_tol);
  r.value *= len;
  r.error *= len;
  return r;
}

// Tanh-sinh on [a, inf) through y = a + x / (1 - x); f receives (y, y - a). Nodes beyond y - a = 1e150
// are dropped, which presumes the integrand decays faster than 1/y.
template <typename F>
QuadratureResult tanh_sinh_infinite(F&& f, double a, double rel_tol = 1e-12) {
  return tanh_sinh_unit(
      [&](double x, double xc) {
        if (xc < 1e-150) return 0.0;
        const double z = x / xc;
        return f(a + z, z) / (xc * xc);
      },
      rel_tol);
}

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule.
inline QuadratureResult gk15(const auto& f, double a, double b) {
  static constexpr double xk[8] = {0.991455371120812639, 0.949107912342758525, 0.864864423359769073,
                                   0.741531185599394440, 0.586087235467691130, 0.405845151377397167,
                                   0.207784955007898468, 0.000000000000000000};
  static constexpr double wk[8] = {0.022935322010529225, 0.063092092629978553, 0.104790010322250184,
                                   0.140653259715525919, 0.169004726639267903, 0.190350578064785410,
                                   0.204432940075298892, 0.209482141084727828};
  static constexpr double wg[4] = {0.129484966168869693, 0.279705391489276668, 0.381830050505118945,
                                   0.417959183673469388};
  const double c = 0.5 * (a + b), hl = 0.5 * (b - a);
  const double fc = f(c);
  double k = fc * wk[7], g = fc * wg[3];
  for (int i = 0; i < 7; ++i) {
    const double y1 = f(c - hl * xk[i]), y2 = f(c + hl * xk[i]);
    k += wk[i] * (y1 + y2);
    if (i % 2 == 1) g += wg[i / 2] * (y1 + y2);
  }
  return {k * hl, std::abs((k - g) * hl)};
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod; throws QuadratureFailure when the target is not met.
template <typename F>
QuadratureResult adaptive_gk(F&& f, double a, double b, double rel_tol = 1e-10, double abs_tol = 0,
                             int max_intervals = 2000) {
  struct Piece {
    double a, b;
    QuadratureResult r;
    bool operator<(const Piece& o) const { return r.error < o.r.error; }
  };
  std::priority_queue<Piece> pieces;
  QuadratureResult total = detail::gk15(f, a, b);
  pieces.push({a, b, total});
  for (int n = 1; n < max_intervals; ++n) {
    if (total.error <= std::max(abs_tol, rel_tol * std::abs(total.value))) return total;
    Piece p = pieces.top();
    pieces.pop();
    const double m = 0.5 * (p.a + p.b);
    const QuadratureResult l = detail::gk15(f, p.a, m), r = detail::gk15(f, m, p.b);
    total.value += l.value + r.value - p.r.value;
    total.error += l.error + r.error - p.r.error;
    pieces.push({p.a, m, l});
    pieces.push({m, p.b, r});
  }
  // Re-sum to avoid drift from the incremental updates.
  total = {};
  while (!pieces.empty()) {
    total.value += pieces.top().r.value;
    total.error += pieces.top().r.error;
    pieces.pop();
  }
  if (total.error <= std::max(abs_tol, rel_tol * std::abs(total.value))) return total;
  throw Error(ErrorCode::QuadratureFailure, "adaptive quadrature did not reach the requested accuracy");
}

}  // namespace betatess
