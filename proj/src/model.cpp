#include "xienh/model.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "xienh/error.hpp"
#include "xienh/rng.hpp"

namespace xienh {
namespace {

using nn::Shape;
using nn::Tensor;
using nn::Var;

constexpr int kDenseUnits = 4;

// Dilated convs on the longest input-to-output path through one block.
int dilated_convs_on_path(Family family) {
  switch (family) {
    case Family::MbTcn:
    case Family::TcnBk:
      return 1;
    case Family::TcnBc:
      return 2;
    case Family::DenseNet:
      return kDenseUnits;
  }
  return 1;
}

LayerShape conv(int in, int out, int kernel, int dilation) {
  return LayerShape{LayerKind::Conv, in, out, kernel, dilation, Norm::Pre};
}

}  // namespace

Family parse_family(std::string_view name) {
  if (name == "mb-tcn") return Family::MbTcn;
  if (name == "tcn-bc") return Family::TcnBc;
  if (name == "tcn-bk") return Family::TcnBk;
  if (name == "densenet") return Family::DenseNet;
  throw InvalidArgument("unknown model family '" + std::string(name) +
                        "' (expected mb-tcn, tcn-bc, tcn-bk or densenet)");
}

std::string to_string(Family family) {
  switch (family) {
    case Family::MbTcn: return "mb-tcn";
    case Family::TcnBc: return "tcn-bc";
    case Family::TcnBk: return "tcn-bk";
    case Family::DenseNet: return "densenet";
  }
  return "unknown";
}

ModelSpec ModelSpec::defaults(Family family, int n_blocks) {
  ModelSpec s;
  s.family = family;
  s.n_blocks = n_blocks;
  switch (family) {
    case Family::MbTcn:
      break;
    case Family::TcnBc:
      s.d_model = 64;
      s.d_f = 64;
      break;
    case Family::TcnBk:
      break;
    case Family::DenseNet:
      s.d_model = 64;
      s.d_f = 24;
      break;
  }
  return s;
}

ModelSpec ModelSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  require(colon != std::string_view::npos, "model spec must look like FAMILY:N, got '" +
                                               std::string(text) + "'");
  const std::string count(text.substr(colon + 1));
  int n = 0;
  try {
    std::size_t used = 0;
    n = std::stoi(count, &used);
    require(used == count.size(), "trailing characters");
  } catch (const std::exception&) {
    throw InvalidArgument("model spec block count '" + count + "' is not an integer");
  }
  auto spec = defaults(parse_family(text.substr(0, colon)), n);
  spec.validate();
  return spec;
}

void ModelSpec::validate() const {
  require(n_blocks >= 1, "ModelSpec: n_blocks must be >= 1");
  require(d_model >= 1 && d_f >= 1 && n_bins >= 1, "ModelSpec: widths must be >= 1");
  require(kernel >= 1, "ModelSpec: kernel must be >= 1");
  require(n_branches >= 1, "ModelSpec: n_branches must be >= 1");
  require(max_dilation >= 1 && std::has_single_bit(static_cast<unsigned>(max_dilation)),
          "ModelSpec: max_dilation must be a power of two");
}

std::size_t LayerShape::param_count() const {
  return static_cast<std::size_t>(kernel) * in * out + out + 2 * static_cast<std::size_t>(norm_dim());
}

std::size_t ModelParams::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.shape.param_count();
  return n;
}

std::vector<float> ModelParams::flatten() const {
  std::vector<float> flat;
  flat.reserve(param_count());
  for (const auto& l : layers) {
    for (const auto* t : {&l.weight, &l.bias, &l.ln_gain, &l.ln_bias}) {
      flat.insert(flat.end(), t->data().begin(), t->data().end());
    }
  }
  return flat;
}

void ModelParams::assign(std::span<const float> flat) {
  require(flat.size() == param_count(), "ModelParams::assign: expected " +
                                            std::to_string(param_count()) + " values, got " +
                                            std::to_string(flat.size()));
  std::size_t pos = 0;
  for (auto& l : layers) {
    for (auto* t : {&l.weight, &l.bias, &l.ln_gain, &l.ln_bias}) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), t->numel(), t->data().begin());
      pos += t->numel();
    }
  }
}

int dilation_for_block(int n, int max_dilation) {
  require(n >= 1, "dilation_for_block: block index must be >= 1");
  require(max_dilation >= 1 && std::has_single_bit(static_cast<unsigned>(max_dilation)),
          "dilation_for_block: max dilation must be a power of two");
  const int levels = std::countr_zero(static_cast<unsigned>(max_dilation)) + 1;
  return 1 << ((n - 1) % levels);
}

std::vector<LayerShape> layer_plan(const ModelSpec& spec) {
  spec.validate();
  std::vector<LayerShape> plan;
  plan.push_back({LayerKind::FullyConnected, spec.n_bins, spec.d_model, 1, 1, Norm::Post});
  int width = spec.d_model;
  for (int n = 1; n <= spec.n_blocks; ++n) {
    const int d = dilation_for_block(n, spec.max_dilation);
    switch (spec.family) {
      case Family::MbTcn:
        for (int b = 0; b < spec.n_branches; ++b) {
          plan.push_back(conv(spec.d_model, spec.d_f, 1, 1));
          plan.push_back(conv(spec.d_f, spec.d_f, spec.kernel, d));
        }
        plan.push_back(conv(spec.n_branches * spec.d_f, spec.d_model, 1, 1));
        break;
      case Family::TcnBc:
        plan.push_back(conv(spec.d_model, spec.d_f, spec.kernel, d));
        plan.push_back(conv(spec.d_f, spec.d_model, spec.kernel, d));
        break;
      case Family::TcnBk:
        plan.push_back(conv(spec.d_model, spec.d_f, 1, 1));
        plan.push_back(conv(spec.d_f, spec.d_f, spec.kernel, d));
        plan.push_back(conv(spec.d_f, spec.d_model, 1, 1));
        break;
      case Family::DenseNet:
        for (int j = 0; j < kDenseUnits; ++j) {
          plan.push_back(conv(width + j * spec.d_f, spec.d_f, spec.kernel, d));
        }
        width += kDenseUnits * spec.d_f;
        break;
    }
  }
  plan.push_back({LayerKind::FullyConnected, width, spec.n_bins, 1, 1, Norm::None});
  return plan;
}

std::size_t count_params(const ModelSpec& spec) {
  std::size_t n = 0;
  for (const auto& l : layer_plan(spec)) n += l.param_count();
  return n;
}

int receptive_field_frames(const ModelSpec& spec) {
  spec.validate();
  const int per_block = dilated_convs_on_path(spec.family) * (spec.kernel - 1);
  int frames = 1;
  for (int n = 1; n <= spec.n_blocks; ++n) {
    frames += per_block * dilation_for_block(n, spec.max_dilation);
  }
  return frames;
}

double receptive_field_seconds(const ModelSpec& spec, std::size_t frame_shift, int sample_rate) {
  return static_cast<double>(receptive_field_frames(spec)) * static_cast<double>(frame_shift) /
         static_cast<double>(sample_rate);
}

ModelParams build(const ModelSpec& spec, std::uint64_t seed) {
  ModelParams params;
  params.spec = spec;
  Rng rng(seed);
  for (const auto& shape : layer_plan(spec)) {
    LayerParams l;
    l.shape = shape;
    const auto k = static_cast<std::size_t>(shape.kernel);
    const auto in = static_cast<std::size_t>(shape.in);
    const auto out = static_cast<std::size_t>(shape.out);
    l.weight = Tensor<float>(Shape{k, in, out});
    const double limit = std::sqrt(6.0 / static_cast<double>(k * in + k * out));
    for (float& w : l.weight.data()) w = static_cast<float>(rng.uniform(-limit, limit));
    l.bias = Tensor<float>(Shape{1, 1, out});
    if (shape.norm != Norm::None) {
      const auto c = static_cast<std::size_t>(shape.norm_dim());
      l.ln_gain = Tensor<float>(Shape{1, 1, c}, 1.0f);
      l.ln_bias = Tensor<float>(Shape{1, 1, c});
    }
    params.layers.push_back(std::move(l));
  }
  return params;
}

template <typename T>
std::vector<LayerVars<T>> make_layer_vars(const ModelParams& params, bool requires_grad) {
  std::vector<LayerVars<T>> vars;
  vars.reserve(params.layers.size());
  for (const auto& l : params.layers) {
    LayerVars<T> v;
    v.shape = l.shape;
    v.weight = Var<T>::leaf(l.weight.cast<T>(), requires_grad);
    v.bias = Var<T>::leaf(l.bias.cast<T>(), requires_grad);
    if (l.shape.norm != Norm::None) {
      v.ln_gain = Var<T>::leaf(l.ln_gain.cast<T>(), requires_grad);
      v.ln_bias = Var<T>::leaf(l.ln_bias.cast<T>(), requires_grad);
    }
    vars.push_back(std::move(v));
  }
  return vars;
}

template <typename T>
std::vector<T> flatten_grads(const std::vector<LayerVars<T>>& vars) {
  std::vector<T> flat;
  for (const auto& v : vars) {
    for (const auto* p : {&v.weight, &v.bias, &v.ln_gain, &v.ln_bias}) {
      if (!p->defined()) continue;
      const auto g = p->grad();
      flat.insert(flat.end(), g.data().begin(), g.data().end());
    }
  }
  return flat;
}

template <typename T>
Var<T> forward_graph(const ModelSpec& spec, const std::vector<LayerVars<T>>& layers,
                     const Var<T>& input, BlockTrace<T>* trace) {
  require(input.shape().d2 == static_cast<std::size_t>(spec.n_bins),
          "forward: input has " + std::to_string(input.shape().d2) + " bins, model expects " +
              std::to_string(spec.n_bins));
  const auto plan = layer_plan(spec);
  require(layers.size() == plan.size(), "forward: layer count does not match spec");
  for (std::size_t i = 0; i < plan.size(); ++i) {
    require(layers[i].shape == plan[i], "forward: layer " + std::to_string(i) + " shape mismatch");
  }

  std::size_t cursor = 0;
  auto unit = [&](const Var<T>& x) {
    const auto& l = layers[cursor++];
    const auto h = nn::relu(nn::layer_norm(x, l.ln_gain, l.ln_bias));
    return nn::conv1d_causal(h, l.weight, l.bias, l.shape.dilation);
  };

  const auto& first = layers[cursor++];
  Var<T> h = nn::relu(nn::layer_norm(nn::fully_connected(input, first.weight, first.bias),
                                     first.ln_gain, first.ln_bias));
  if (trace) trace->push_back(h.value());

  for (int n = 1; n <= spec.n_blocks; ++n) {
    switch (spec.family) {
      case Family::MbTcn: {
        std::vector<Var<T>> branches;
        branches.reserve(static_cast<std::size_t>(spec.n_branches));
        for (int b = 0; b < spec.n_branches; ++b) {
          const auto embedded = unit(h);
          branches.push_back(unit(embedded));
        }
        h = nn::add(h, unit(nn::concat_channels(branches)));
        break;
      }
      case Family::TcnBc: {
        const auto u = unit(h);
        h = nn::add(h, unit(u));
        break;
      }
      case Family::TcnBk: {
        const auto u = unit(h);
        const auto v = unit(u);
        h = nn::add(h, unit(v));
        break;
      }
      case Family::DenseNet: {
        std::vector<Var<T>> features{h};
        for (int j = 0; j < kDenseUnits; ++j) {
          const auto joined = features.size() == 1 ? features.front() : nn::concat_channels(features);
          features.push_back(unit(joined));
        }
        h = nn::concat_channels(features);
        break;
      }
    }
    if (trace) trace->push_back(h.value());
  }

  const auto& last = layers[cursor++];
  return nn::sigmoid(nn::fully_connected(h, last.weight, last.bias));
}

template <typename T>
Tensor<T> forward(const ModelParams& params, const Tensor<T>& input, BlockTrace<T>* trace) {
  const auto layers = make_layer_vars<T>(params, false);
  return forward_graph(params.spec, layers, Var<T>::leaf(input), trace).value();
}

#define XIENH_INSTANTIATE(T)                                                                  \
  template std::vector<LayerVars<T>> make_layer_vars<T>(const ModelParams&, bool);           \
  template std::vector<T> flatten_grads<T>(const std::vector<LayerVars<T>>&);                \
  template Var<T> forward_graph<T>(const ModelSpec&, const std::vector<LayerVars<T>>&,       \
                                   const Var<T>&, BlockTrace<T>*);                           \
  template Tensor<T> forward<T>(const ModelParams&, const Tensor<T>&, BlockTrace<T>*);

XIENH_INSTANTIATE(float)
XIENH_INSTANTIATE(double)

#undef XIENH_INSTANTIATE

}  // namespace xienh
