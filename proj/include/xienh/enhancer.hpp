#pragma once

#include "xienh/dsp.hpp"
#include "xienh/gain.hpp"
#include "xienh/model.hpp"
#include "xienh/snr_map.hpp"

namespace xienh {

struct EnhanceRequest {
  AudioSignal noisy;
  const ModelParams* model = nullptr;
  GainKind gain_kind = GainKind::MmseLsa;
};

/// (1, L, K) float tensor of |X|.
nn::Tensor<float> magnitude_features(const Spectrogram& noisy);

/// Network estimate of the mapped a priori SNR for every bin of `noisy`.
SnrGrid estimate_mapped_xi(const ModelParams& model, const Spectrogram& noisy);

/// unmap -> gamma = xi + 1 -> gain -> reconstruct with the noisy phase.
AudioSignal enhance_from_mapped(const Spectrogram& noisy, const SnrGrid& mapped,
                                const XiMapStats& stats, GainKind kind);

/// Full inference chain. Output length equals input length.
AudioSignal enhance(const EnhanceRequest& req);

/// Same chain with xi taken from the known clean speech and noise instead of
/// the network. gamma is still xi + 1.
AudioSignal enhance_oracle(const AudioSignal& noisy, const AudioSignal& clean,
                           const AudioSignal& noise, GainKind kind);

}  // namespace xienh
