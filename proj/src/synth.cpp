#include "xienh/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xienh/error.hpp"
#include "xienh/rng.hpp"

namespace xienh::synth {
namespace {

std::size_t samples_for(double seconds) {
  require(seconds > 0.0, "synth: duration must be > 0");
  return static_cast<std::size_t>(std::llround(seconds * kSampleRate));
}

struct Formant {
  double centre;
  double bandwidth;
  double gain;
};

double envelope_at(double f, const Formant (&formants)[3]) {
  double e = 0.02;
  for (const auto& fm : formants) {
    const double z = (f - fm.centre) / fm.bandwidth;
    e += fm.gain * std::exp(-0.5 * z * z);
  }
  return e;
}

}  // namespace

AudioSignal speech_like(double seconds, std::uint64_t seed) {
  const std::size_t total = samples_for(seconds);
  Rng rng(seed);
  AudioSignal out;
  out.samples.assign(total, 0.0);
  const double fs = kSampleRate;
  const double two_pi = 2.0 * std::numbers::pi;

  std::size_t pos = static_cast<std::size_t>(rng.uniform(0.03, 0.1) * fs);
  while (pos < total) {
    const auto len = static_cast<std::size_t>(rng.uniform(0.12, 0.3) * fs);
    const double f0_start = rng.uniform(100.0, 220.0);
    const double f0_end = f0_start * rng.uniform(0.8, 1.2);
    const Formant formants[3] = {
        {rng.uniform(300.0, 800.0), rng.uniform(80.0, 160.0), 1.0},
        {rng.uniform(900.0, 2200.0), rng.uniform(100.0, 200.0), 0.6},
        {rng.uniform(2300.0, 3200.0), rng.uniform(150.0, 250.0), 0.3},
    };
    const double level = rng.uniform(0.4, 1.0);
    const int harmonics = static_cast<int>(7600.0 / std::max(f0_start, f0_end));
    std::vector<double> phase(static_cast<std::size_t>(harmonics), 0.0);
    for (auto& p : phase) p = rng.uniform(0.0, two_pi);

    for (std::size_t i = 0; i < len && pos + i < total; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(len);
      const double f0 = f0_start + (f0_end - f0_start) * t;
      const double env = level * 0.5 * (1.0 - std::cos(two_pi * t));
      double s = 0.0;
      for (int h = 1; h <= harmonics; ++h) {
        const double f = f0 * h;
        auto& ph = phase[static_cast<std::size_t>(h - 1)];
        ph += two_pi * f / fs;
        s += envelope_at(f, formants) / std::sqrt(static_cast<double>(h)) * std::sin(ph);
      }
      out.samples[pos + i] = env * s;
    }
    pos += len + static_cast<std::size_t>(rng.uniform(0.03, 0.12) * fs);
  }

  double peak = 0.0;
  for (double v : out.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : out.samples) v *= 0.5 / peak;
  }
  return out;
}

AudioSignal white_noise(double seconds, std::uint64_t seed, double stddev) {
  Rng rng(seed);
  AudioSignal out;
  out.samples.resize(samples_for(seconds));
  for (double& v : out.samples) v = stddev * rng.normal();
  return out;
}

AudioSignal colored_noise(double seconds, std::uint64_t seed, double pole, double stddev) {
  require(pole >= 0.0 && pole < 1.0, "colored_noise: pole must lie in [0, 1)");
  auto out = white_noise(seconds, seed, 1.0);
  double state = 0.0;
  double power = 0.0;
  for (double& v : out.samples) {
    state = pole * state + v;
    v = state;
    power += v * v;
  }
  const double scale = stddev / std::sqrt(power / static_cast<double>(out.samples.size()));
  for (double& v : out.samples) v *= scale;
  return out;
}

}  // namespace xienh::synth
