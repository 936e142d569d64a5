#pragma once

#include <string>
#include <string_view>

#include "xienh/grid.hpp"
#include "xienh/snr_map.hpp"

namespace xienh {

enum class GainKind { Srwf, MmseStsa, MmseLsa };

/// Upper bound applied to every gain (20 dB amplification).
inline constexpr double kGainCap = 10.0;
/// v is floored here before it reaches E1.
inline constexpr double kNuFloor = 1e-10;

GainKind parse_gain_kind(std::string_view name);  // "srwf", "mmse-stsa", "mmse-lsa"
std::string to_string(GainKind kind);

/// v = xi * gamma / (xi + 1)
inline double nu(double xi, double gamma) { return xi * gamma / (xi + 1.0); }

/// Single-bin gain. xi > 0, gamma > 0.
double gain_value(GainKind kind, double xi, double gamma);

/// Elementwise gain over matching xi (linear) and gamma grids.
Grid gain(GainKind kind, const SnrGrid& xi, const SnrGrid& gamma);

}  // namespace xienh
