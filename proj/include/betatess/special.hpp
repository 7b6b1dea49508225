#pragma once

namespace betatess {

// Lower incomplete gamma by its power series; accurate for every x >= 0, fastest for x < a + 1.
double lower_gamma_series(double a, double x);

// Upper incomplete gamma by the Legendre continued fraction (modified Lentz); accurate for x > 0.
double upper_gamma_cf(double a, double x);

// Upper incomplete gamma Gamma(a, x) = int_x^inf t^(a-1) e^-t dt, not normalized.
double incomplete_gamma(double a, double x);

// Regularized lower/upper incomplete gamma.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized lower/upper incomplete gamma by the two routes separately, for cross-checking.
double gamma_q_series(double a, double x);
double gamma_q_cf(double a, double x);

}  // namespace betatess
