#include "xienh/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "xienh/error.hpp"

namespace xienh {
namespace {

double mean_power(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

}  // namespace

void TrainConfig::validate() const {
  require(epochs >= 1, "TrainConfig: epochs must be >= 1");
  require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
  require(lr > 0.0, "TrainConfig: lr must be > 0");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "TrainConfig: Adam betas must lie in [0, 1)");
  require(adam_eps > 0.0 && grad_clip > 0.0, "TrainConfig: eps and clip must be > 0");
  require(snr_step_db >= 1 && snr_max_db >= snr_min_db &&
              (snr_max_db - snr_min_db) % snr_step_db == 0,
          "TrainConfig: SNR step must divide the SNR range");
}

MixResult mix_at_snr(const AudioSignal& clean, const AudioSignal& noise, double snr_db,
                     std::size_t offset) {
  require(!clean.samples.empty(), "mix_at_snr: empty clean signal");
  require(std::isfinite(snr_db), "mix_at_snr: SNR must be finite");
  require(clean.sample_rate == noise.sample_rate, "mix_at_snr: sample rates differ");
  require(offset <= noise.size() && noise.size() - offset >= clean.size(),
          "mix_at_snr: noise segment at offset " + std::to_string(offset) +
              " is shorter than the clean signal");
  const std::span<const double> segment(noise.samples.data() + offset, clean.size());
  const double ps = mean_power(clean.samples);
  const double pd = mean_power(segment);
  require(ps > 0.0 && pd > 0.0, "mix_at_snr: clean and noise must have non-zero power");

  const double alpha = std::sqrt(ps / (pd * std::pow(10.0, snr_db / 10.0)));
  MixResult r;
  r.snr_db = snr_db;
  r.clean = clean;
  r.scaled_noise.sample_rate = clean.sample_rate;
  r.noisy.sample_rate = clean.sample_rate;
  r.scaled_noise.samples.resize(clean.size());
  r.noisy.samples.resize(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    r.scaled_noise.samples[i] = alpha * segment[i];
    r.noisy.samples[i] = clean.samples[i] + r.scaled_noise.samples[i];
  }
  return r;
}

double draw_snr_db(Rng& rng, const TrainConfig& cfg) {
  const auto level = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.snr_levels())));
  return static_cast<double>(cfg.snr_min_db + level * cfg.snr_step_db);
}

Batch make_batch(std::span<const MixResult> mixes, const XiMapStats& stats,
                 const FrameConfig& cfg) {
  require(!mixes.empty(), "make_batch: empty batch");
  const std::size_t bins = cfg.n_bins();
  require(stats.n_bins() == bins, "make_batch: stats bin count does not match framing");

  std::vector<Spectrogram> noisy;
  std::vector<SnrGrid> targets;
  std::size_t max_frames = 0;
  for (const auto& m : mixes) {
    noisy.push_back(stft(m.noisy, cfg));
    targets.push_back(map_xi(instantaneous_xi_db(stft(m.clean, cfg), stft(m.scaled_noise, cfg)),
                             stats));
    max_frames = std::max(max_frames, noisy.back().frames);
  }

  Batch batch;
  const nn::Shape shape{mixes.size(), max_frames, bins};
  batch.input = nn::Tensor<float>(shape);
  batch.target = nn::Tensor<float>(shape);
  batch.mask = nn::Tensor<float>(nn::Shape{mixes.size(), max_frames, 1});
  for (std::size_t b = 0; b < mixes.size(); ++b) {
    batch.frames.push_back(noisy[b].frames);
    for (std::size_t l = 0; l < noisy[b].frames; ++l) {
      batch.mask(b, l, 0) = 1.0f;
      for (std::size_t k = 0; k < bins; ++k) {
        batch.input(b, l, k) = static_cast<float>(std::abs(noisy[b].at(l, k)));
        batch.target(b, l, k) = static_cast<float>(targets[b].values(l, k));
      }
    }
  }
  return batch;
}

double loss_bce(const nn::Tensor<float>& pred, const nn::Tensor<float>& target,
                const nn::Tensor<float>& mask) {
  return nn::bce_loss(nn::Var<float>::leaf(pred), target, mask).value()[0];
}

void clip_gradients(std::span<float> grads, double limit) {
  const auto lim = static_cast<float>(limit);
  for (float& g : grads) g = std::clamp(g, -lim, lim);
}

void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state,
               const TrainConfig& cfg) {
  require(params.size() == grads.size(), "adam_step: parameter/gradient length mismatch");
  if (state.m.empty() && state.v.empty() && state.step == 0) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  require(state.m.size() == params.size() && state.v.size() == params.size(),
          "adam_step: optimizer state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.adam_beta1 * state.m[i] + (1.0 - cfg.adam_beta1) * g;
    state.v[i] = cfg.adam_beta2 * state.v[i] + (1.0 - cfg.adam_beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] = static_cast<float>(params[i] - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps));
  }
}

TrainResult train(const ModelSpec& spec, const Corpus& corpus, const XiMapStats& stats,
                  const TrainConfig& cfg, const TrainProgress& progress) {
  cfg.validate();
  spec.validate();
  require(!corpus.clean.empty(), "train: empty clean corpus");
  require(!corpus.noise.empty(), "train: empty noise corpus");
  require(stats.n_bins() == static_cast<std::size_t>(spec.n_bins),
          "train: stats bin count does not match model");
  stats.validate();

  std::size_t longest_clean = 0;
  for (const auto& c : corpus.clean) longest_clean = std::max(longest_clean, c.size());
  std::vector<std::size_t> usable_noise;
  for (std::size_t i = 0; i < corpus.noise.size(); ++i) {
    if (corpus.noise[i].size() >= longest_clean) usable_noise.push_back(i);
  }
  require(!usable_noise.empty(),
          "train: no noise recording is as long as the longest clean utterance");

  TrainResult result;
  result.params = build(spec, cfg.seed);
  result.params.stats = stats;
  auto flat = result.params.flatten();
  AdamState adam;
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<std::size_t> order(corpus.clean.size());
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      std::vector<MixResult> mixes;
      for (std::size_t i = start; i < stop; ++i) {
        const auto& clean = corpus.clean[order[i]];
        const auto& noise = corpus.noise[usable_noise[rng.below(usable_noise.size())]];
        const std::size_t offset = rng.below(noise.size() - clean.size() + 1);
        mixes.push_back(mix_at_snr(clean, noise, draw_snr_db(rng, cfg), offset));
      }
      const Batch batch = make_batch(mixes, stats);

      const auto vars = make_layer_vars<float>(result.params, true);
      const auto pred = forward_graph(spec, vars, nn::Var<float>::leaf(batch.input));
      const auto loss = nn::bce_loss(pred, batch.target, batch.mask);
      nn::backward(loss);
      auto grads = flatten_grads(vars);
      clip_gradients(grads, cfg.grad_clip);
      adam_step(flat, grads, adam, cfg);
      result.params.assign(flat);

      const LossRecord record{epoch, batch_index, static_cast<double>(loss.value()[0])};
      result.trace.push_back(record);
      if (progress) progress(record);
    }
  }
  return result;
}

}  // namespace xienh
