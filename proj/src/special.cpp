#include "betatess/special.hpp"

#include <cmath>
#include <limits>

#include "betatess/error.hpp"

namespace betatess {
namespace {

constexpr int kMaxTerms = 200000;
constexpr double kEps = 1e-16;

// log of x^a e^-x / Gamma(a)
double log_prefactor(double a, double x) { return a * std::log(x) - x - std::lgamma(a); }

// Regularized lower gamma P(a, x) from the series.
double p_series(double a, double x) {
  if (x == 0) return 0;
  double term = 1.0 / a, sum = term;
  for (int n = 1; n < kMaxTerms; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < kEps * std::abs(sum)) break;
  }
  return sum * std::exp(log_prefactor(a, x));
}

// Continued fraction part f with Gamma(a, x) = x^a e^-x f.
double cf_fraction(double a, double x) {
  const double tiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1 - a;
  double c = 1 / tiny;
  double d = 1 / b;
  double f = d;
  for (int i = 1; i < kMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1 / d;
    const double delta = d * c;
    f *= delta;
    if (std::abs(delta - 1) < kEps) break;
  }
  return f;
}

double q_cf(double a, double x) { return std::exp(log_prefactor(a, x)) * cf_fraction(a, x); }

void check_args(double a, double x) {
  if (!(a > 0) || !(x >= 0)) throw Error(ErrorCode::OutOfDomain, "incomplete gamma needs a > 0 and x >= 0");
}

}  // namespace

double lower_gamma_series(double a, double x) {
  check_args(a, x);
  return p_series(a, x) * std::tgamma(a);
}

double upper_gamma_cf(double a, double x) {
  check_args(a, x);
  if (x == 0) return std::tgamma(a);
  return std::exp(a * std::log(x) - x) * cf_fraction(a, x);
}

double gamma_q_series(double a, double x) {
  check_args(a, x);
  return 1 - p_series(a, x);
}

double gamma_q_cf(double a, double x) {
  check_args(a, x);
  if (x == 0) return 1;
  return q_cf(a, x);
}

double gamma_p(double a, double x) {
  check_args(a, x);
  if (x < a + 1) return p_series(a, x);
  return 1 - q_cf(a, x);
}

double gamma_q(double a, double x) {
  check_args(a, x);
  if (x < a + 1) return 1 - p_series(a, x);
  return q_cf(a, x);
}

double incomplete_gamma(double a, double x) {
  check_args(a, x);
  if (x < a + 1) return std::tgamma(a) - lower_gamma_series(a, x);
  return std::exp(a * std::log(x) - x) * cf_fraction(a, x);
}

}  // namespace betatess
