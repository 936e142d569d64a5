#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include "xienh/grid.hpp"

namespace xienh {

inline constexpr int kSampleRate = 16000;

/// Mono time-domain signal. Samples are nominally in [-1, 1].
struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
};

/// Analysis framing. Defaults: 32 ms frames, 16 ms shift at 16 kHz.
struct FrameConfig {
  std::size_t frame_len = 512;
  std::size_t frame_shift = 256;

  std::size_t fft_len() const { return frame_len; }
  std::size_t n_bins() const { return frame_len / 2 + 1; }
  void validate() const;
};

/// Single-sided STFT, frames x bins. DC and Nyquist bins are kept.
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<std::complex<double>> coeffs;  // row-major [frame][bin]
  FrameConfig config;
  /// Length of the analysed signal, when known; istft trims to it.
  std::optional<std::size_t> signal_length;

  std::complex<double>& at(std::size_t l, std::size_t k) { return coeffs[l * bins + k]; }
  const std::complex<double>& at(std::size_t l, std::size_t k) const {
    return coeffs[l * bins + k];
  }

  Grid magnitude() const;
  Grid phase() const;
};

/// Periodic (DFT-even) Hamming window: 0.54 - 0.46 cos(2 pi i / n).
std::vector<double> hamming_window(std::size_t n);

Spectrogram stft(const AudioSignal& signal, const FrameConfig& cfg = {});
AudioSignal istft(const Spectrogram& spec);

/// Applies real non-negative gains to the noisy magnitude, keeps noisy phase,
/// and resynthesises.
AudioSignal reconstruct(const Spectrogram& noisy, const Grid& gains);

}  // namespace xienh
