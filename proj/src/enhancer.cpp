#include "xienh/enhancer.hpp"

#include <cmath>
#include <string>

#include "xienh/error.hpp"

namespace xienh {

nn::Tensor<float> magnitude_features(const Spectrogram& noisy) {
  nn::Tensor<float> t(nn::Shape{1, noisy.frames, noisy.bins});
  for (std::size_t i = 0; i < noisy.coeffs.size(); ++i) {
    t[i] = static_cast<float>(std::abs(noisy.coeffs[i]));
  }
  return t;
}

SnrGrid estimate_mapped_xi(const ModelParams& model, const Spectrogram& noisy) {
  const auto out = forward<float>(model, magnitude_features(noisy));
  SnrGrid mapped{Grid(noisy.frames, noisy.bins), SnrKind::XiMapped};
  for (std::size_t i = 0; i < out.numel(); ++i) mapped.values.data()[i] = out[i];
  return mapped;
}

AudioSignal enhance_from_mapped(const Spectrogram& noisy, const SnrGrid& mapped,
                                const XiMapStats& stats, GainKind kind) {
  const auto xi = unmap_xi(mapped, stats);
  const auto gamma = a_posteriori_from_xi(xi);
  return reconstruct(noisy, gain(kind, xi, gamma));
}

AudioSignal enhance(const EnhanceRequest& req) {
  require(req.model != nullptr, "enhance: no model");
  const ModelParams& model = *req.model;
  require(req.noisy.sample_rate == kSampleRate,
          "enhance: sample rate " + std::to_string(req.noisy.sample_rate) + " != 16000");
  require(model.stats.n_bins() == static_cast<std::size_t>(model.spec.n_bins),
          "enhance: model has no mapping statistics");
  model.stats.validate();

  const auto spec = stft(req.noisy);
  return enhance_from_mapped(spec, estimate_mapped_xi(model, spec), model.stats, req.gain_kind);
}

AudioSignal enhance_oracle(const AudioSignal& noisy, const AudioSignal& clean,
                           const AudioSignal& noise, GainKind kind) {
  require(noisy.size() == clean.size() && noisy.size() == noise.size(),
          "enhance_oracle: noisy, clean and noise must be time-aligned (equal lengths)");
  require(clean.sample_rate == noisy.sample_rate && noise.sample_rate == noisy.sample_rate,
          "enhance_oracle: sample rates differ");
  const auto spec = stft(noisy);
  auto xi = instantaneous_xi_db(stft(clean), stft(noise));
  for (double& v : xi.values.data()) v = std::pow(10.0, v / 10.0);
  xi.kind = SnrKind::XiLinear;
  const auto gamma = a_posteriori_from_xi(xi);
  return reconstruct(spec, gain(kind, xi, gamma));
}

}  // namespace xienh
