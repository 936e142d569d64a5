#include "xienh/dsp.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "xienh/error.hpp"

namespace xienh {
namespace {

// FFTW planning is not thread-safe, execution with the new-array interface is.
// Plans are created once per length under a lock and reused.
struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
  ~PlanPair() {
    if (forward) fftw_destroy_plan(forward);
    if (inverse) fftw_destroy_plan(inverse);
  }
};

const PlanPair& plans_for(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<PlanPair>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[n];
  if (!slot) {
    slot = std::make_unique<PlanPair>();
    std::vector<double> re(n);
    std::vector<std::complex<double>> cx(n / 2 + 1);
    const int len = static_cast<int>(n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    slot->forward = fftw_plan_dft_r2c_1d(len, re.data(),
                                         reinterpret_cast<fftw_complex*>(cx.data()), flags);
    slot->inverse = fftw_plan_dft_c2r_1d(len, reinterpret_cast<fftw_complex*>(cx.data()),
                                         re.data(), flags);
  }
  return *slot;
}

void check_finite(const AudioSignal& s) {
  for (double x : s.samples) {
    if (!std::isfinite(x)) throw InvalidArgument("signal contains non-finite samples");
  }
}

}  // namespace

void FrameConfig::validate() const {
  require(frame_len >= 2 && frame_len % 2 == 0, "frame_len must be even and >= 2");
  require(frame_shift > 0 && frame_shift <= frame_len,
          "frame_shift must satisfy 0 < shift <= frame_len");
}

Grid Spectrogram::magnitude() const {
  Grid g(frames, bins);
  for (std::size_t i = 0; i < coeffs.size(); ++i) g.data()[i] = std::abs(coeffs[i]);
  return g;
}

Grid Spectrogram::phase() const {
  Grid g(frames, bins);
  for (std::size_t i = 0; i < coeffs.size(); ++i) g.data()[i] = std::arg(coeffs[i]);
  return g;
}

std::vector<double> hamming_window(std::size_t n) {
  require(n >= 2, "hamming_window: n must be >= 2");
  std::vector<double> w(n);
  const double step = 2.0 * std::numbers::pi / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(step * static_cast<double>(i));
  }
  return w;
}

Spectrogram stft(const AudioSignal& signal, const FrameConfig& cfg) {
  cfg.validate();
  require(!signal.samples.empty(), "stft: empty signal");
  require(signal.sample_rate == kSampleRate,
          "stft: sample rate " + std::to_string(signal.sample_rate) + " != 16000");
  check_finite(signal);

  const std::size_t n = cfg.frame_len;
  const std::size_t shift = cfg.frame_shift;
  const std::size_t len = signal.samples.size();

  Spectrogram spec;
  spec.config = cfg;
  spec.bins = cfg.n_bins();
  spec.frames = (len + shift - 1) / shift;
  spec.signal_length = len;
  spec.coeffs.resize(spec.frames * spec.bins);

  const auto window = hamming_window(n);
  const auto& plan = plans_for(n);
  std::vector<double> frame(n);
  for (std::size_t l = 0; l < spec.frames; ++l) {
    const std::size_t start = l * shift;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = start + i;
      frame[i] = idx < len ? signal.samples[idx] * window[i] : 0.0;
    }
    fftw_execute_dft_r2c(plan.forward, frame.data(),
                         reinterpret_cast<fftw_complex*>(spec.coeffs.data() + l * spec.bins));
  }
  return spec;
}

AudioSignal istft(const Spectrogram& spec) {
  spec.config.validate();
  require(spec.bins == spec.config.n_bins(),
          "istft: bin count " + std::to_string(spec.bins) + " does not match frame config");
  require(spec.coeffs.size() == spec.frames * spec.bins, "istft: coefficient count mismatch");

  const std::size_t n = spec.config.frame_len;
  const std::size_t shift = spec.config.frame_shift;
  const std::size_t full = spec.frames == 0 ? 0 : (spec.frames - 1) * shift + n;

  std::vector<double> acc(full, 0.0);
  std::vector<double> norm(full, 0.0);
  const auto window = hamming_window(n);
  const auto& plan = plans_for(n);
  std::vector<std::complex<double>> bins(spec.bins);
  std::vector<double> frame(n);
  const double scale = 1.0 / static_cast<double>(n);

  for (std::size_t l = 0; l < spec.frames; ++l) {
    for (std::size_t k = 0; k < spec.bins; ++k) {
      const auto& c = spec.at(l, k);
      if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
        throw InvalidArgument("istft: non-finite coefficient");
      }
      bins[k] = c;
    }
    // c2r overwrites its input.
    fftw_execute_dft_c2r(plan.inverse, reinterpret_cast<fftw_complex*>(bins.data()),
                         frame.data());
    const std::size_t start = l * shift;
    for (std::size_t i = 0; i < n; ++i) {
      acc[start + i] += window[i] * frame[i] * scale;
      norm[start + i] += window[i] * window[i];
    }
  }

  AudioSignal out;
  const std::size_t out_len = spec.signal_length.value_or(spec.frames * shift + (n - shift));
  out.samples.assign(out_len, 0.0);
  const std::size_t m = std::min(out_len, full);
  for (std::size_t i = 0; i < m; ++i) {
    out.samples[i] = norm[i] > 1e-12 ? acc[i] / norm[i] : 0.0;
  }
  return out;
}

AudioSignal reconstruct(const Spectrogram& noisy, const Grid& gains) {
  require(gains.rows() == noisy.frames && gains.cols() == noisy.bins,
          "reconstruct: gain shape does not match spectrogram");
  Spectrogram enhanced = noisy;
  for (std::size_t i = 0; i < enhanced.coeffs.size(); ++i) {
    const double g = gains.data()[i];
    if (!std::isfinite(g) || g < 0.0) throw InvalidArgument("reconstruct: gains must be finite and >= 0");
    enhanced.coeffs[i] *= g;
  }
  return istft(enhanced);
}

}  // namespace xienh
