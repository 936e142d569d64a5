#include "xienh/special.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "xienh/error.hpp"

namespace xienh::special {
namespace {

constexpr double kSeriesLimit = 30.0;
constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_nonnegative(double x, const char* name) {
  if (!(x >= 0.0)) throw InvalidArgument(std::string(name) + ": argument must be >= 0");
}

// I_nu(x) for nu in {0, 1} by the ascending series; all terms are positive.
double bessel_series(int nu, double x) {
  const double q = 0.25 * x * x;
  double term = nu == 0 ? 1.0 : 0.5 * x;
  double sum = term;
  for (int m = 1; m < 500; ++m) {
    term *= q / (static_cast<double>(m) * static_cast<double>(m + nu));
    sum += term;
    if (term < kEps * 0.25 * sum) break;
  }
  return sum;
}

// exp(-x) I_nu(x) from the large-argument expansion, truncated at its smallest term.
double bessel_scaled_asymptotic(int nu, double x) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= -(mu - odd * odd) / (static_cast<double>(k) * 8.0 * x);
    const double mag = std::abs(term);
    if (mag >= prev) break;
    sum += term;
    prev = mag;
    if (mag < kEps * 0.25 * std::abs(sum)) break;
  }
  return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

}  // namespace

double bessel_i0(double x) {
  check_nonnegative(x, "bessel_i0");
  if (x <= kSeriesLimit) return bessel_series(0, x);
  return bessel_scaled_asymptotic(0, x) * std::exp(x);
}

double bessel_i1(double x) {
  check_nonnegative(x, "bessel_i1");
  if (x <= kSeriesLimit) return bessel_series(1, x);
  return bessel_scaled_asymptotic(1, x) * std::exp(x);
}

double bessel_i0e(double x) {
  check_nonnegative(x, "bessel_i0e");
  if (x <= kSeriesLimit) return bessel_series(0, x) * std::exp(-x);
  return bessel_scaled_asymptotic(0, x);
}

double bessel_i1e(double x) {
  check_nonnegative(x, "bessel_i1e");
  if (x <= kSeriesLimit) return bessel_series(1, x) * std::exp(-x);
  return bessel_scaled_asymptotic(1, x);
}

double exp_integral_e1(double x) {
  if (!(x > 0.0)) throw InvalidArgument("exp_integral_e1: argument must be > 0");
  if (x <= 1.0) {
    // E1(x) = -gamma - ln x - sum_{m>=1} (-x)^m / (m m!)
    double sum = 0.0;
    double fact_term = 1.0;  // (-x)^m / m!
    for (int m = 1; m < 100; ++m) {
      fact_term *= -x / static_cast<double>(m);
      const double del = fact_term / static_cast<double>(m);
      sum += del;
      if (std::abs(del) < kEps * std::abs(sum)) break;
    }
    return -std::numbers::egamma - std::log(x) - sum;
  }
  // Modified Lentz evaluation of the continued fraction.
  constexpr double tiny = 1e-300;
  double b = x + 1.0;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -static_cast<double>(i) * static_cast<double>(i);
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h * std::exp(-x);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("normal_quantile: p must lie in (0, 1)");
  if (p == 0.5) return 0.0;
  if (p > 0.5) return -normal_quantile(1.0 - p);

  // Rational starting point (absolute error < 4.5e-4), then Halley steps.
  const double t = std::sqrt(-2.0 * std::log(p));
  double x = -(t - (2.515517 + 0.802853 * t + 0.010328 * t * t) /
                       (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t));
  const double sqrt_2pi = std::sqrt(2.0 * std::numbers::pi);
  for (int it = 0; it < 50; ++it) {
    const double e = normal_cdf(x) - p;
    const double u = e * sqrt_2pi * std::exp(0.5 * x * x);
    const double step = u / (1.0 + 0.5 * x * u);
    x -= step;
    if (std::abs(step) <= 4.0 * kEps * std::max(1.0, std::abs(x))) break;
  }
  return x;
}

double erfinv(double y) {
  if (!(y > -1.0 && y < 1.0)) throw InvalidArgument("erfinv: y must lie in (-1, 1)");
  return normal_quantile(0.5 * (1.0 + y)) / std::numbers::sqrt2;
}

}  // namespace xienh::special
