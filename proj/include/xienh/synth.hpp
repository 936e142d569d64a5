#pragma once

#include <cstdint>

#include "xienh/dsp.hpp"

namespace xienh::synth {

/// Voiced "syllables" separated by short pauses: a gliding harmonic source
/// shaped by three formant resonances and a raised-cosine envelope.
/// Peak amplitude is normalised to 0.5.
AudioSignal speech_like(double seconds, std::uint64_t seed);

/// Gaussian white noise with the given standard deviation.
AudioSignal white_noise(double seconds, std::uint64_t seed, double stddev = 0.1);

/// White noise through a one-pole low-pass (pole at `pole`), rescaled to `stddev`.
AudioSignal colored_noise(double seconds, std::uint64_t seed, double pole = 0.9,
                          double stddev = 0.1);

}  // namespace xienh::synth
