#include "xienh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "xienh/error.hpp"

namespace xienh {

double seg_snr(const AudioSignal& clean, const AudioSignal& test, const SegSnrConfig& cfg) {
  require(clean.size() == test.size(), "seg_snr: clean and test lengths differ");
  require(!clean.samples.empty(), "seg_snr: empty signal");
  require(cfg.clamp_min_db < cfg.clamp_max_db, "seg_snr: clamp range is empty");
  require(cfg.frame_len > 0 && cfg.frame_shift > 0, "seg_snr: invalid framing");

  const std::size_t len = clean.size();
  const std::size_t frame = std::min(cfg.frame_len, len);
  const std::size_t count = 1 + (len - frame) / cfg.frame_shift;

  std::vector<double> signal_energy(count), error_energy(count);
  double peak = 0.0;
  for (std::size_t f = 0; f < count; ++f) {
    const std::size_t start = f * cfg.frame_shift;
    double es = 0.0, ee = 0.0;
    for (std::size_t i = start; i < start + frame; ++i) {
      const double s = clean.samples[i];
      const double e = s - test.samples[i];
      es += s * s;
      ee += e * e;
    }
    signal_energy[f] = es;
    error_energy[f] = ee;
    peak = std::max(peak, es);
  }
  require(peak > 0.0, "seg_snr: clean signal is silent");

  const double floor = peak * std::pow(10.0, cfg.silence_threshold_db / 10.0);
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t f = 0; f < count; ++f) {
    if (signal_energy[f] < floor || signal_energy[f] == 0.0) continue;
    const double db = error_energy[f] > 0.0
                          ? 10.0 * std::log10(signal_energy[f] / error_energy[f])
                          : cfg.clamp_max_db;
    total += std::clamp(db, cfg.clamp_min_db, cfg.clamp_max_db);
    ++used;
  }
  return total / static_cast<double>(used);
}

double ssnr_improvement(const AudioSignal& clean, const AudioSignal& noisy,
                        const AudioSignal& enhanced, const SegSnrConfig& cfg) {
  require(noisy.size() == clean.size() && enhanced.size() == clean.size(),
          "ssnr_improvement: signal lengths differ");
  return seg_snr(clean, enhanced, cfg) - seg_snr(clean, noisy, cfg);
}

}  // namespace xienh
