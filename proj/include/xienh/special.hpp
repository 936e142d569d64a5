#pragma once

namespace xienh::special {

/// Modified Bessel functions of the first kind, orders 0 and 1. x >= 0.
/// Power series up to x = 30, then the large-argument expansion.
/// Overflows to +inf past x ~ 713; use the scaled forms there.
double bessel_i0(double x);
double bessel_i1(double x);

/// exp(-x) * I0(x) and exp(-x) * I1(x). Finite for every x >= 0.
double bessel_i0e(double x);
double bessel_i1e(double x);

/// Exponential integral E1(x) = int_x^inf e^-t / t dt, x > 0.
double exp_integral_e1(double x);

/// Standard normal CDF, Phi(x) = (1 + erf(x / sqrt 2)) / 2, tail-accurate.
double normal_cdf(double x);

/// Inverse of normal_cdf for p in (0, 1).
double normal_quantile(double p);

/// Inverse error function for y in (-1, 1).
double erfinv(double y);

}  // namespace xienh::special
