#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xienh/autograd.hpp"
#include "xienh/snr_map.hpp"
#include "xienh/tensor.hpp"

namespace xienh {

enum class Family { MbTcn, TcnBc, TcnBk, DenseNet };

Family parse_family(std::string_view name);  // "mb-tcn", "tcn-bc", "tcn-bk", "densenet"
std::string to_string(Family family);

struct ModelSpec {
  Family family = Family::MbTcn;
  int n_blocks = 12;
  int d_model = 256;  // residual stream width (DenseNet: width entering block 1)
  int d_f = 64;       // branch / bottleneck width (DenseNet: growth rate)
  int kernel = 3;
  int max_dilation = 16;
  int n_branches = 8;  // MB-TCN only
  int n_bins = 257;

  /// Family defaults: MB-TCN 256/64/8, TCN-BC 64/64, TCN-BK 256/64, DenseNet 64/24.
  static ModelSpec defaults(Family family, int n_blocks);
  /// Parses "FAMILY:N", e.g. "mb-tcn:12".
  static ModelSpec parse(std::string_view text);

  void validate() const;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

enum class LayerKind { FullyConnected, Conv };
enum class Norm { None, Pre, Post };

/// One weight layer. Pre-normalised conv units compute conv(relu(ln(x))); the
/// input layer computes relu(ln(fc(x))); the output layer has no norm.
struct LayerShape {
  LayerKind kind = LayerKind::Conv;
  int in = 0;
  int out = 0;
  int kernel = 1;
  int dilation = 1;
  Norm norm = Norm::None;

  int norm_dim() const { return norm == Norm::Pre ? in : norm == Norm::Post ? out : 0; }
  std::size_t param_count() const;
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

struct LayerParams {
  LayerShape shape;
  nn::Tensor<float> weight;   // (kernel, in, out)
  nn::Tensor<float> bias;     // (1, 1, out)
  nn::Tensor<float> ln_gain;  // (1, 1, norm_dim) when normalised
  nn::Tensor<float> ln_bias;
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct ModelParams {
  ModelSpec spec;
  std::vector<LayerParams> layers;
  XiMapStats stats;

  std::size_t param_count() const;
  /// Canonical order: layer by layer, weight, bias, ln gain, ln bias.
  std::vector<float> flatten() const;
  void assign(std::span<const float> flat);
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// d = 2^((n - 1) mod (log2(D) + 1)), n >= 1, D a power of two.
int dilation_for_block(int n, int max_dilation);

/// Ordered list of weight layers for a spec; build, forward, count_params
/// and the checkpoint payload all follow this order.
std::vector<LayerShape> layer_plan(const ModelSpec& spec);

std::size_t count_params(const ModelSpec& spec);

/// 1 + sum over blocks of (k - 1) * d times the number of dilated convs on
/// the longest path through a block (1 MB-TCN/TCN-BK, 2 TCN-BC, 4 DenseNet).
int receptive_field_frames(const ModelSpec& spec);
double receptive_field_seconds(const ModelSpec& spec, std::size_t frame_shift = 256,
                               int sample_rate = 16000);

/// Glorot-uniform weights over fan = kernel * channels, zero biases,
/// unit ln gain, zero ln bias.
ModelParams build(const ModelSpec& spec, std::uint64_t seed);

/// Graph-side view of the parameters of one layer.
template <typename T>
struct LayerVars {
  LayerShape shape;
  nn::Var<T> weight, bias, ln_gain, ln_bias;
};

template <typename T>
std::vector<LayerVars<T>> make_layer_vars(const ModelParams& params, bool requires_grad);

/// Gradients of every parameter, flattened in canonical order.
template <typename T>
std::vector<T> flatten_grads(const std::vector<LayerVars<T>>& vars);

/// Hidden states recorded during forward: after the input layer, then after each block.
template <typename T>
using BlockTrace = std::vector<nn::Tensor<T>>;

/// input: (B, L, n_bins) noisy magnitudes; returns (B, L, n_bins) sigmoid outputs.
template <typename T>
nn::Var<T> forward_graph(const ModelSpec& spec, const std::vector<LayerVars<T>>& layers,
                         const nn::Var<T>& input, BlockTrace<T>* trace = nullptr);

/// Inference without gradient tracking.
template <typename T>
nn::Tensor<T> forward(const ModelParams& params, const nn::Tensor<T>& input,
                      BlockTrace<T>* trace = nullptr);

}  // namespace xienh
