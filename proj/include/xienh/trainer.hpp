#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "xienh/dsp.hpp"
#include "xienh/model.hpp"
#include "xienh/rng.hpp"
#include "xienh/snr_map.hpp"

namespace xienh {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 10;
  double lr = 0.001;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;  // gradients clipped elementwise to [-clip, clip]
  int snr_min_db = -20;
  int snr_max_db = 30;
  int snr_step_db = 1;
  std::uint64_t seed = 0;

  void validate() const;
  int snr_levels() const { return (snr_max_db - snr_min_db) / snr_step_db + 1; }
};

struct MixResult {
  AudioSignal noisy;
  AudioSignal clean;
  AudioSignal scaled_noise;
  double snr_db = 0.0;
};

/// Mixes `clean` with noise[offset, offset + len(clean)) scaled so that
/// 10 log10(P_clean / P_scaled_noise) = snr_db over the full clean length.
MixResult mix_at_snr(const AudioSignal& clean, const AudioSignal& noise, double snr_db,
                     std::size_t offset);

/// One of the configured SNR levels, uniformly.
double draw_snr_db(Rng& rng, const TrainConfig& cfg);

/// Zero-padded network batch: inputs |X|, mapped-xi targets and a per-frame
/// validity mask, all (B, L_max, ...).
struct Batch {
  nn::Tensor<float> input;
  nn::Tensor<float> target;
  nn::Tensor<float> mask;
  std::vector<std::size_t> frames;  // valid frames per example
};

Batch make_batch(std::span<const MixResult> mixes, const XiMapStats& stats,
                 const FrameConfig& cfg = {});

/// Value of the masked mean binary cross-entropy (no graph).
double loss_bce(const nn::Tensor<float>& pred, const nn::Tensor<float>& target,
                const nn::Tensor<float>& mask);

void clip_gradients(std::span<float> grads, double limit);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

/// Bias-corrected Adam update in place. Gradients are expected to be clipped.
void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state,
               const TrainConfig& cfg);

struct Corpus {
  std::vector<AudioSignal> clean;
  std::vector<AudioSignal> noise;
};

struct LossRecord {
  int epoch = 0;
  int batch = 0;
  double loss = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<LossRecord> trace;
};

using TrainProgress = std::function<void(const LossRecord&)>;

/// Per epoch: shuffle the clean list, then per mini-batch draw a noise file,
/// a noise offset and an SNR for every utterance, build targets, and take one
/// clipped Adam step on the masked BCE.
TrainResult train(const ModelSpec& spec, const Corpus& corpus, const XiMapStats& stats,
                  const TrainConfig& cfg, const TrainProgress& progress = {});

}  // namespace xienh
