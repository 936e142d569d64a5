#pragma once

#include <cstddef>

#include "xienh/dsp.hpp"

namespace xienh {

struct SegSnrConfig {
  std::size_t frame_len = 512;
  std::size_t frame_shift = 256;
  double clamp_min_db = -10.0;
  double clamp_max_db = 35.0;
  /// Frames whose clean energy is this far below the loudest clean frame are skipped.
  double silence_threshold_db = -40.0;
};

/// Mean over non-silent frames of clamp(10 log10(sum s^2 / sum (s - t)^2)).
double seg_snr(const AudioSignal& clean, const AudioSignal& test, const SegSnrConfig& cfg = {});

/// seg_snr(clean, enhanced) - seg_snr(clean, noisy).
double ssnr_improvement(const AudioSignal& clean, const AudioSignal& noisy,
                        const AudioSignal& enhanced, const SegSnrConfig& cfg = {});

}  // namespace xienh
