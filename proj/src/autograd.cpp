#include "xienh/autograd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <unordered_set>

#include "xienh/error.hpp"

namespace xienh::nn {
namespace {

std::atomic<bool> g_finite_checks{false};

template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<std::shared_ptr<Node<T>>> inputs, const char* op,
                   std::function<void(Node<T>&)> backward_fn) {
  if (g_finite_checks.load(std::memory_order_relaxed)) {
    for (const T& v : value.data()) {
      if (!std::isfinite(v)) throw NonFiniteError(std::string(op) + ": non-finite output");
    }
  }
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->op = op;
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const auto& in) { return in && in->requires_grad; });
  if (needs) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward = std::move(backward_fn);
  }
  return Var<T>(std::move(n));
}

template <typename T>
bool wants_grad(const std::shared_ptr<Node<T>>& n) {
  return n && n->requires_grad;
}

// Shared conv kernel; fully_connected is the K = 1 case.
template <typename T>
Var<T> conv_impl(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int dilation,
                 const char* op) {
  require(dilation >= 1, std::string(op) + ": dilation must be >= 1");
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  require(ws.d0 >= 1, std::string(op) + ": kernel width must be >= 1");
  require(xs.d2 == ws.d1, std::string(op) + ": input has " + std::to_string(xs.d2) +
                              " channels, weight expects " + std::to_string(ws.d1));
  const std::size_t batch = xs.d0, frames = xs.d1, cin = ws.d1, cout = ws.d2, width = ws.d0;
  if (bias.defined()) {
    require(bias.shape() == Shape{1, 1, cout}, std::string(op) + ": bias shape mismatch");
  }
  const std::size_t d = static_cast<std::size_t>(dilation);

  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = weight.value();
  Tensor<T> out(Shape{batch, frames, cout});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t l = 0; l < frames; ++l) {
      auto y = out.row(b, l);
      if (bias.defined()) std::copy_n(bias.value().data().data(), cout, y.data());
      for (std::size_t w = 0; w < width && w * d <= l; ++w) {
        const auto src = xv.row(b, l - w * d);
        for (std::size_t i = 0; i < cin; ++i) {
          const T a = src[i];
          if (a == T(0)) continue;
          const T* wrow = &wv(w, i, 0);
          for (std::size_t o = 0; o < cout; ++o) y[o] += a * wrow[o];
        }
      }
    }
  }

  auto xn = x.ptr(), wn = weight.ptr(), bn = bias.ptr();
  return make_result<T>(
      std::move(out), {xn, wn, bn}, op, [xn, wn, bn, d](Node<T>& self) {
        const Tensor<T>& dy = self.grad;
        const Shape xs = xn->value.shape();
        const Shape ws = wn->value.shape();
        const std::size_t batch = xs.d0, frames = xs.d1, cin = ws.d1, cout = ws.d2,
                          width = ws.d0;
        if (wants_grad(bn)) {
          auto& db = bn->grad_buffer();
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t l = 0; l < frames; ++l) {
              const auto g = dy.row(b, l);
              for (std::size_t o = 0; o < cout; ++o) db[o] += g[o];
            }
        }
        if (wants_grad(wn)) {
          auto& dw = wn->grad_buffer();
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t l = 0; l < frames; ++l) {
              const auto g = dy.row(b, l);
              for (std::size_t w = 0; w < width && w * d <= l; ++w) {
                const auto src = xn->value.row(b, l - w * d);
                for (std::size_t i = 0; i < cin; ++i) {
                  const T a = src[i];
                  if (a == T(0)) continue;
                  T* drow = &dw(w, i, 0);
                  for (std::size_t o = 0; o < cout; ++o) drow[o] += a * g[o];
                }
              }
            }
        }
        if (wants_grad(xn)) {
          auto& dx = xn->grad_buffer();
          const Tensor<T>& wv = wn->value;
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t l = 0; l < frames; ++l) {
              const auto g = dy.row(b, l);
              for (std::size_t w = 0; w < width && w * d <= l; ++w) {
                auto dst = dx.row(b, l - w * d);
                for (std::size_t i = 0; i < cin; ++i) {
                  const T* wrow = &wv(w, i, 0);
                  T acc = T(0);
                  for (std::size_t o = 0; o < cout; ++o) acc += wrow[o] * g[o];
                  dst[i] += acc;
                }
              }
            }
        }
      });
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + a.shape().str() +
                                      " vs " + b.shape().str());
}

template <typename T>
void collect_topo(const std::shared_ptr<Node<T>>& root, std::vector<Node<T>*>& order) {
  std::unordered_set<Node<T>*> visited;
  // Iterative post-order DFS; graphs can be a few thousand nodes deep.
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child && child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks() { return g_finite_checks.load(); }

template <typename T>
Var<T> conv1d_causal(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int dilation) {
  return conv_impl(x, weight, bias, dilation, "conv1d_causal");
}

template <typename T>
Var<T> fully_connected(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  require(weight.shape().d0 == 1, "fully_connected: weight must have shape (1, in, out)");
  return conv_impl(x, weight, bias, 1, "fully_connected");
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps) {
  const Shape xs = x.shape();
  const std::size_t c = xs.d2;
  require(c >= 1, "layer_norm: need at least one channel");
  require(gain.shape() == Shape{1, 1, c} && bias.shape() == Shape{1, 1, c},
          "layer_norm: gain/bias must have shape (1, 1, C)");
  const std::size_t rows = xs.d0 * xs.d1;
  Tensor<T> out(xs);
  Tensor<T> xhat(xs);
  std::vector<T> rstd(rows);
  const auto& g = gain.value().data();
  const auto& be = bias.value().data();
  const auto& xv = x.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv.data() + r * c;
    T mean = 0;
    for (std::size_t i = 0; i < c; ++i) mean += in[i];
    mean /= static_cast<T>(c);
    T var = 0;
    for (std::size_t i = 0; i < c; ++i) var += (in[i] - mean) * (in[i] - mean);
    var /= static_cast<T>(c);
    const T rs = T(1) / std::sqrt(var + eps);
    rstd[r] = rs;
    T* xh = xhat.data().data() + r * c;
    T* y = out.data().data() + r * c;
    for (std::size_t i = 0; i < c; ++i) {
      xh[i] = (in[i] - mean) * rs;
      y[i] = g[i] * xh[i] + be[i];
    }
  }
  auto xn = x.ptr(), gn = gain.ptr(), bn = bias.ptr();
  return make_result<T>(
      std::move(out), {xn, gn, bn}, "layer_norm",
      [xn, gn, bn, xhat = std::move(xhat), rstd = std::move(rstd), c, rows](Node<T>& self) {
        const auto& dy = self.grad.data();
        const auto& xh = xhat.data();
        const auto& g = gn->value.data();
        if (wants_grad(gn) || wants_grad(bn)) {
          std::vector<T> dg(c, T(0)), db(c, T(0));
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = 0; i < c; ++i) {
              dg[i] += dy[r * c + i] * xh[r * c + i];
              db[i] += dy[r * c + i];
            }
          if (wants_grad(gn)) {
            auto& t = gn->grad_buffer();
            for (std::size_t i = 0; i < c; ++i) t[i] += dg[i];
          }
          if (wants_grad(bn)) {
            auto& t = bn->grad_buffer();
            for (std::size_t i = 0; i < c; ++i) t[i] += db[i];
          }
        }
        if (wants_grad(xn)) {
          auto& dx = xn->grad_buffer().data();
          std::vector<T> dxh(c);
          for (std::size_t r = 0; r < rows; ++r) {
            T mean_d = 0, mean_dx = 0;
            for (std::size_t i = 0; i < c; ++i) {
              dxh[i] = dy[r * c + i] * g[i];
              mean_d += dxh[i];
              mean_dx += dxh[i] * xh[r * c + i];
            }
            mean_d /= static_cast<T>(c);
            mean_dx /= static_cast<T>(c);
            for (std::size_t i = 0; i < c; ++i) {
              dx[r * c + i] += rstd[r] * (dxh[i] - mean_d - xh[r * c + i] * mean_dx);
            }
          }
        }
      });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (T& v : out.data()) v = v < T(0) ? T(0) : v;  // NaN passes through
  auto xn = x.ptr();
  return make_result<T>(std::move(out), {xn}, "relu", [xn](Node<T>& self) {
    auto& dx = xn->grad_buffer().data();
    const auto& xv = xn->value.data();
    const auto& dy = self.grad.data();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (xv[i] > T(0)) dx[i] += dy[i];
    }
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (T& v : out.data()) {
    if (v >= T(0)) {
      v = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      v = e / (T(1) + e);
    }
  }
  auto xn = x.ptr();
  return make_result<T>(std::move(out), {xn}, "sigmoid", [xn](Node<T>& self) {
    auto& dx = xn->grad_buffer().data();
    const auto& y = self.value.data();
    const auto& dy = self.grad.data();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  const auto& bv = b.value().data();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  auto an = a.ptr(), bn = b.ptr();
  return make_result<T>(std::move(out), {an, bn}, "add", [an, bn](Node<T>& self) {
    const auto& dy = self.grad.data();
    for (const auto& n : {an, bn}) {
      if (!wants_grad(n)) continue;
      auto& d = n->grad_buffer().data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out = a.value();
  const auto& bv = b.value().data();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  auto an = a.ptr(), bn = b.ptr();
  return make_result<T>(std::move(out), {an, bn}, "mul", [an, bn](Node<T>& self) {
    const auto& dy = self.grad.data();
    if (wants_grad(an)) {
      auto& d = an->grad_buffer().data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * bn->value[i];
    }
    if (wants_grad(bn)) {
      auto& d = bn->grad_buffer().data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * an->value[i];
    }
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T acc = 0;
  for (const T& v : x.value().data()) acc += v;
  auto xn = x.ptr();
  return make_result<T>(Tensor<T>(Shape{1, 1, 1}, acc), {xn}, "sum", [xn](Node<T>& self) {
    auto& d = xn->grad_buffer().data();
    const T g = self.grad[0];
    for (T& v : d) v += g;
  });
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
  require(!parts.empty(), "concat_channels: no inputs");
  const Shape s0 = parts.front().shape();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.shape().d0 == s0.d0 && p.shape().d1 == s0.d1,
            "concat_channels: batch/frame extents differ");
    total += p.shape().d2;
  }
  Tensor<T> out(Shape{s0.d0, s0.d1, total});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.shape().d2;
    for (std::size_t b = 0; b < s0.d0; ++b)
      for (std::size_t l = 0; l < s0.d1; ++l)
        std::copy_n(p.value().row(b, l).data(), c, out.row(b, l).data() + offset);
    offset += c;
  }
  std::vector<std::shared_ptr<Node<T>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.ptr());
  return make_result<T>(std::move(out), nodes, "concat_channels", [nodes](Node<T>& self) {
    const Shape s = self.value.shape();
    std::size_t offset = 0;
    for (const auto& n : nodes) {
      const std::size_t c = n->value.shape().d2;
      if (wants_grad(n)) {
        auto& d = n->grad_buffer();
        for (std::size_t b = 0; b < s.d0; ++b)
          for (std::size_t l = 0; l < s.d1; ++l) {
            const auto g = self.grad.row(b, l);
            auto dst = d.row(b, l);
            for (std::size_t i = 0; i < c; ++i) dst[i] += g[offset + i];
          }
      }
      offset += c;
    }
  });
}

template <typename T>
Var<T> bce_loss(const Var<T>& pred, const Tensor<T>& target, const Tensor<T>& mask) {
  const Shape s = pred.shape();
  require(target.shape() == s, "bce_loss: target shape " + target.shape().str() +
                                   " does not match prediction " + s.str());
  require(mask.shape() == Shape{s.d0, s.d1, 1}, "bce_loss: mask must have shape (B, L, 1)");
  std::size_t valid_frames = 0;
  for (const T& m : mask.data()) valid_frames += m != T(0) ? 1 : 0;
  require(valid_frames > 0, "bce_loss: mask selects no frames");

  constexpr T lo = T(1e-7);
  constexpr T hi = T(1) - T(1e-7);
  const double count = static_cast<double>(valid_frames * s.d2);
  double acc = 0.0;
  for (std::size_t b = 0; b < s.d0; ++b)
    for (std::size_t l = 0; l < s.d1; ++l) {
      if (mask(b, l, 0) == T(0)) continue;
      const auto p = pred.value().row(b, l);
      const auto t = target.row(b, l);
      for (std::size_t k = 0; k < s.d2; ++k) {
        const double pc = std::clamp(p[k], lo, hi);
        acc -= t[k] * std::log(pc) + (1.0 - t[k]) * std::log(1.0 - pc);
      }
    }
  auto pn = pred.ptr();
  return make_result<T>(
      Tensor<T>(Shape{1, 1, 1}, static_cast<T>(acc / count)), {pn}, "bce_loss",
      [pn, target, mask, count, lo, hi](Node<T>& self) {
        auto& dp = pn->grad_buffer();
        const Shape s = pn->value.shape();
        const double g = static_cast<double>(self.grad[0]) / count;
        for (std::size_t b = 0; b < s.d0; ++b)
          for (std::size_t l = 0; l < s.d1; ++l) {
            if (mask(b, l, 0) == T(0)) continue;
            const auto p = pn->value.row(b, l);
            const auto t = target.row(b, l);
            auto d = dp.row(b, l);
            for (std::size_t k = 0; k < s.d2; ++k) {
              const double pc = std::clamp(p[k], lo, hi);
              d[k] += static_cast<T>(g * (pc - t[k]) / (pc * (1.0 - pc)));
            }
          }
      });
}

template <typename T>
void backward(const Var<T>& loss, bool retain_graph) {
  require(loss.defined() && loss.value().numel() == 1, "backward: loss must be a scalar");
  if (!loss.requires_grad()) return;
  std::vector<Node<T>*> order;
  collect_topo(loss.ptr(), order);
  // Interior gradients are per-sweep; only leaves accumulate across calls.
  for (Node<T>* n : order) {
    if (n->backward) n->grad = Tensor<T>();
  }
  Node<T>* root = loss.node();
  root->grad = Tensor<T>(root->value.shape(), T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  if (!retain_graph) {
    for (Node<T>* n : order) {
      if (n->backward) {
        n->backward = nullptr;
        n->inputs.clear();
      }
    }
  }
}

#define XIENH_INSTANTIATE(T)                                                              \
  template Var<T> conv1d_causal(const Var<T>&, const Var<T>&, const Var<T>&, int);       \
  template Var<T> fully_connected(const Var<T>&, const Var<T>&, const Var<T>&);          \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);            \
  template Var<T> relu(const Var<T>&);                                                   \
  template Var<T> sigmoid(const Var<T>&);                                                \
  template Var<T> add(const Var<T>&, const Var<T>&);                                     \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                     \
  template Var<T> sum(const Var<T>&);                                                    \
  template Var<T> concat_channels(const std::vector<Var<T>>&);                           \
  template Var<T> bce_loss(const Var<T>&, const Tensor<T>&, const Tensor<T>&);           \
  template void backward(const Var<T>&, bool);

XIENH_INSTANTIATE(float)
XIENH_INSTANTIATE(double)

#undef XIENH_INSTANTIATE

}  // namespace xienh::nn
