#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "xienh/dsp.hpp"
#include "xienh/grid.hpp"

namespace xienh {

inline constexpr double kPowerFloor = 1e-12;
inline constexpr double kXiDbClamp = 60.0;
inline constexpr double kSigmaFloor = 1e-3;
inline constexpr double kMappedClamp = 1e-7;

enum class SnrKind { XiLinear, XiDb, XiMapped, Gamma };

struct SnrGrid {
  Grid values;
  SnrKind kind = SnrKind::XiLinear;
};

/// Per-bin mean and standard deviation of the instantaneous a priori SNR in dB.
struct XiMapStats {
  std::vector<double> mu;
  std::vector<double> sigma;

  std::size_t n_bins() const { return mu.size(); }
  void validate() const;
  friend bool operator==(const XiMapStats&, const XiMapStats&) = default;
};

/// 10 log10(|S|^2 / |D|^2) per bin with both powers floored at 1e-12 and the
/// result clamped to +-60 dB.
SnrGrid instantaneous_xi_db(const Spectrogram& clean, const Spectrogram& noise);

/// gamma = xi + 1.
SnrGrid a_posteriori_from_xi(const SnrGrid& xi);

/// Gaussian-CDF map of xi_dB onto (0, 1) with per-bin statistics.
SnrGrid map_xi(const SnrGrid& xi_db, const XiMapStats& stats);

/// Inverse of map_xi followed by dB -> linear. Inputs are clamped to
/// [1e-7, 1 - 1e-7] first.
SnrGrid unmap_xi(const SnrGrid& mapped, const XiMapStats& stats);

double map_xi_value(double xi_db, double mu, double sigma);
double unmap_xi_db_value(double mapped, double mu, double sigma);

/// Streaming per-bin moments (count, mean, M2). Merging is exact up to
/// floating-point reassociation, so pooled and concatenated inputs agree.
class BinMoments {
 public:
  explicit BinMoments(std::size_t bins = 0) : mean_(bins, 0.0), m2_(bins, 0.0) {}

  void add_frame(std::span<const double> row);
  void add(const Grid& xi_db);
  void merge(const BinMoments& other);

  std::size_t count() const { return count_; }
  XiMapStats finish(double sigma_floor = kSigmaFloor) const;

 private:
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

/// Sample mean / sample std (n - 1) of xi_dB pooled over every frame of every
/// (clean, noise) pair. sigma is floored at 1e-3 dB.
XiMapStats estimate_stats(const std::vector<std::pair<AudioSignal, AudioSignal>>& mixtures,
                          const FrameConfig& cfg = {});

}  // namespace xienh
