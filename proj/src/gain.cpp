#include "xienh/gain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xienh/error.hpp"
#include "xienh/special.hpp"

namespace xienh {

GainKind parse_gain_kind(std::string_view name) {
  if (name == "srwf") return GainKind::Srwf;
  if (name == "mmse-stsa") return GainKind::MmseStsa;
  if (name == "mmse-lsa") return GainKind::MmseLsa;
  throw InvalidArgument("unknown gain '" + std::string(name) +
                        "' (expected srwf, mmse-stsa or mmse-lsa)");
}

std::string to_string(GainKind kind) {
  switch (kind) {
    case GainKind::Srwf: return "srwf";
    case GainKind::MmseStsa: return "mmse-stsa";
    case GainKind::MmseLsa: return "mmse-lsa";
  }
  return "unknown";
}

double gain_value(GainKind kind, double xi, double gamma) {
  if (!(xi > 0.0) || !(gamma > 0.0) || std::isinf(xi) || std::isinf(gamma)) {
    throw InvalidArgument("gain: xi and gamma must be finite and > 0");
  }
  const double wiener = xi / (xi + 1.0);
  double g = 0.0;
  switch (kind) {
    case GainKind::Srwf:
      g = std::sqrt(wiener);
      break;
    case GainKind::MmseStsa: {
      // exp(-v/2) I_n(v/2) is taken from the scaled Bessel forms, which stay
      // finite for any v; the unscaled product overflows near v ~ 1400.
      const double v = nu(xi, gamma);
      const double half = 0.5 * v;
      const double bessel =
          (1.0 + v) * special::bessel_i0e(half) + v * special::bessel_i1e(half);
      g = 0.5 * std::sqrt(std::numbers::pi) * std::sqrt(v) / gamma * bessel;
      break;
    }
    case GainKind::MmseLsa: {
      const double v = std::max(nu(xi, gamma), kNuFloor);
      g = wiener * std::exp(0.5 * special::exp_integral_e1(v));
      break;
    }
  }
  return std::min(g, kGainCap);
}

Grid gain(GainKind kind, const SnrGrid& xi, const SnrGrid& gamma) {
  require(xi.kind == SnrKind::XiLinear, "gain: xi grid must be linear a priori SNR");
  require(gamma.kind == SnrKind::Gamma, "gain: gamma grid must be a posteriori SNR");
  require(xi.values.same_shape(gamma.values), "gain: xi/gamma shapes differ");
  Grid out(xi.values.rows(), xi.values.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = gain_value(kind, xi.values.data()[i], gamma.values.data()[i]);
  }
  return out;
}

}  // namespace xienh
