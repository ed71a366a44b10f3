#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "spk/kernels.hpp"
#include "spk/rng.hpp"
#include "spk/tensor.hpp"

namespace spk::nn {

struct Conv3x3 {
  std::size_t out_channels;
  int stride = 1;  // 1 or 2
};
struct ResidualBlock {
  std::size_t channels;
  int n_convs = 2;  // 2 or 3
};
struct Relu {};
struct TemporalAvgPool {
  std::size_t rows;
};
struct Dense {
  std::size_t out_dim;
};
struct Dropout {
  double p;
};

using LayerConfig =
    std::variant<Conv3x3, ResidualBlock, Relu, TemporalAvgPool, Dense, Dropout>;

struct EncoderConfig {
  std::vector<LayerConfig> layers;
  std::size_t embedding_dim = 64;
  std::size_t input_rows = 300;  // frames
  std::size_t input_cols = 257;  // frequency bins

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

inline bool operator==(const Conv3x3& a, const Conv3x3& b) {
  return a.out_channels == b.out_channels && a.stride == b.stride;
}
inline bool operator==(const ResidualBlock& a, const ResidualBlock& b) {
  return a.channels == b.channels && a.n_convs == b.n_convs;
}
inline bool operator==(const Relu&, const Relu&) { return true; }
inline bool operator==(const TemporalAvgPool& a, const TemporalAvgPool& b) {
  return a.rows == b.rows;
}
inline bool operator==(const Dense& a, const Dense& b) { return a.out_dim == b.out_dim; }
inline bool operator==(const Dropout& a, const Dropout& b) { return a.p == b.p; }

// Per-layer output shapes: {C,H,W} for spatial layers, {d} after Dense.
// Throws on mid-stack dimension mismatch.
std::vector<std::vector<std::size_t>> shape_propagate(const EncoderConfig& config);

// The full-width topology from the reference architecture: input 300x257,
// stages 64/128/256/512 with stride-2 entries, 19-row temporal pooling,
// 512-dim embedding.
EncoderConfig resnet20_config(std::size_t embedding_dim = 512);

// Reduced encoder used for desk-scale training (stride-2 conv stack).
EncoderConfig small_encoder_config(std::size_t embedding_dim, std::size_t input_rows,
                                   std::size_t input_cols,
                                   double dropout_p = 0.0);

template <typename T>
struct ParamSet {
  std::vector<std::string> names;
  std::vector<TensorT<T>> tensors;

  TensorT<T>& add(const std::string& name, std::vector<std::size_t> shape) {
    names.push_back(name);
    tensors.emplace_back(std::move(shape));
    return tensors.back();
  }
  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    throw std::out_of_range("no parameter named " + name);
  }
  ParamSet zeros_like() const {
    ParamSet z;
    z.names = names;
    for (const auto& t : tensors) z.tensors.emplace_back(t.shape);
    return z;
  }
  std::size_t total_values() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }
  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    return a.names == b.names && a.tensors == b.tensors;
  }
};

enum class InitScheme { He, Xavier };

namespace detail {

template <typename T>
void he_normal(TensorT<T>& t, std::size_t fan_in, rng::Stream& g) {
  const double std = std::sqrt(2.0 / double(fan_in));
  for (T& x : t.v) x = static_cast<T>(rng::normal(g) * std);
}

template <typename T>
void xavier_uniform(TensorT<T>& t, std::size_t fan_in, std::size_t fan_out,
                    rng::Stream& g) {
  const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  for (T& x : t.v) x = static_cast<T>((2.0 * rng::uniform01(g) - 1.0) * limit);
}

}  // namespace detail

// Parameter layout per layer index i:
//   Conv3x3        -> "li.w" [N,C,3,3], "li.b" [N]
//   ResidualBlock  -> "li.cK.w"/"li.cK.b" per conv, "li.proj.w" [N,C] when
//                     the channel count changes
//   Dense          -> "li.w" [O,I], "li.b" [O]
// Conv weights are He-normal, dense weights Xavier-uniform, biases zero.
// `dense_scheme` overrides the dense-layer initializer (warm-start protocol
// re-inits heads with Xavier; He is available for experiments).
template <typename T>
ParamSet<T> init_params(const EncoderConfig& config, rng::Stream& g,
                        InitScheme dense_scheme = InitScheme::Xavier) {
  const auto shapes = shape_propagate(config);  // also validates
  ParamSet<T> params;
  std::size_t c = 1;
  std::size_t h = config.input_rows, w = config.input_cols;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const std::string pre = "l" + std::to_string(i) + ".";
    if (const auto* conv = std::get_if<Conv3x3>(&config.layers[i])) {
      auto& wt = params.add(pre + "w", {conv->out_channels, c, 3, 3});
      detail::he_normal(wt, c * 9, g);
      params.add(pre + "b", {conv->out_channels});
      c = conv->out_channels;
      h = (h + static_cast<std::size_t>(conv->stride) - 1) / conv->stride;
      w = (w + static_cast<std::size_t>(conv->stride) - 1) / conv->stride;
    } else if (const auto* res = std::get_if<ResidualBlock>(&config.layers[i])) {
      std::size_t in_c = c;
      for (int k = 0; k < res->n_convs; ++k) {
        const std::string cp = pre + "c" + std::to_string(k) + ".";
        auto& wt = params.add(cp + "w", {res->channels, in_c, 3, 3});
        detail::he_normal(wt, in_c * 9, g);
        params.add(cp + "b", {res->channels});
        in_c = res->channels;
      }
      if (c != res->channels) {
        auto& pw = params.add(pre + "proj.w", {res->channels, c});
        detail::he_normal(pw, c, g);
      }
      c = res->channels;
    } else if (const auto* dense = std::get_if<Dense>(&config.layers[i])) {
      const std::size_t in_dim = c * h * w;
      auto& wt = params.add(pre + "w", {dense->out_dim, in_dim});
      if (dense_scheme == InitScheme::Xavier)
        detail::xavier_uniform(wt, in_dim, dense->out_dim, g);
      else
        detail::he_normal(wt, in_dim, g);
      params.add(pre + "b", {dense->out_dim});
      c = dense->out_dim;
      h = w = 1;
    } else if (const auto* pool = std::get_if<TemporalAvgPool>(&config.layers[i])) {
      (void)pool;
      h = 1;
    }
    // Relu / Dropout carry no parameters
  }
  return params;
}

template <typename T>
struct ForwardCache {
  // Input plus the output of every layer, so backward can replay the stack.
  std::vector<TensorT<T>> acts;
  // Residual internals per layer index: pre-shortcut activations.
  std::vector<std::vector<TensorT<T>>> res_acts;
  // Dropout masks (already scaled by 1/(1-p)); empty in eval mode.
  std::vector<TensorT<T>> masks;
  bool train = false;
};

// Single-example forward. Input shape [1, rows, cols] (or [C,H,W] mid-stack
// compatible). In train mode Dropout applies an inverted mask drawn from
// `g`; in eval mode Dropout is the identity and `g` may be null.
template <typename T>
TensorT<T> forward(const EncoderConfig& config, const ParamSet<T>& params,
                   const TensorT<T>& input, bool train, rng::Stream* g,
                   ForwardCache<T>* cache = nullptr);

// Single-example backward; accumulates into `grads` (same layout as params)
// and returns the gradient with respect to the input.
template <typename T>
TensorT<T> backward(const EncoderConfig& config, const ParamSet<T>& params,
                    const ForwardCache<T>& cache, const TensorT<T>& grad_out,
                    ParamSet<T>& grads);

// --- implementation ---

namespace detail {

template <typename T>
void relu_inplace(TensorT<T>& t) {
  for (T& x : t.v)
    if (x < T{0}) x = T{0};
}

template <typename T>
TensorT<T> relu_backward(const TensorT<T>& out, const TensorT<T>& grad_out) {
  TensorT<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (out[i] <= T{0}) g[i] = T{0};
  return g;
}

}  // namespace detail

template <typename T>
TensorT<T> forward(const EncoderConfig& config, const ParamSet<T>& params,
                   const TensorT<T>& input, bool train, rng::Stream* g,
                   ForwardCache<T>* cache) {
  TensorT<T> x = input;
  if (cache) {
    cache->acts.clear();
    cache->res_acts.assign(config.layers.size(), {});
    cache->masks.assign(config.layers.size(), TensorT<T>{});
    cache->acts.push_back(x);
    cache->train = train;
  }
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const std::string pre = "l" + std::to_string(i) + ".";
    std::visit(
        [&](const auto& layer) {
          using L = std::decay_t<decltype(layer)>;
          if constexpr (std::is_same_v<L, Conv3x3>) {
            TensorT<T> y;
            kernels::conv3x3_forward(x, params.tensors[params.index_of(pre + "w")],
                                     params.tensors[params.index_of(pre + "b")],
                                     layer.stride, y);
            x = std::move(y);
          } else if constexpr (std::is_same_v<L, ResidualBlock>) {
            std::vector<TensorT<T>> inner;
            TensorT<T> h = x;
            for (int k = 0; k < layer.n_convs; ++k) {
              const std::string cp = pre + "c" + std::to_string(k) + ".";
              TensorT<T> y;
              kernels::conv3x3_forward(h, params.tensors[params.index_of(cp + "w")],
                                       params.tensors[params.index_of(cp + "b")], 1, y);
              if (k + 1 < layer.n_convs) detail::relu_inplace(y);
              inner.push_back(y);
              h = std::move(y);
            }
            TensorT<T> shortcut;
            if (x.dim(0) != layer.channels) {
              kernels::conv1x1_forward(
                  x, params.tensors[params.index_of(pre + "proj.w")], shortcut);
              inner.push_back(shortcut);
            } else {
              shortcut = x;
            }
            for (std::size_t j = 0; j < h.size(); ++j) h[j] += shortcut[j];
            detail::relu_inplace(h);
            if (cache) cache->res_acts[i] = std::move(inner);
            x = std::move(h);
          } else if constexpr (std::is_same_v<L, Relu>) {
            detail::relu_inplace(x);
          } else if constexpr (std::is_same_v<L, TemporalAvgPool>) {
            if (x.dim(1) != layer.rows)
              throw std::invalid_argument("TemporalAvgPool: expected " +
                                          std::to_string(layer.rows) + " rows, got " +
                                          std::to_string(x.dim(1)));
            TensorT<T> y({x.dim(0), std::size_t{1}, x.dim(2)});
            const T inv = T{1} / static_cast<T>(layer.rows);
            for (std::size_t ch = 0; ch < x.dim(0); ++ch)
              for (std::size_t col = 0; col < x.dim(2); ++col) {
                T acc = 0;
                for (std::size_t row = 0; row < x.dim(1); ++row)
                  acc += x.at3(ch, row, col);
                y.at3(ch, 0, col) = acc * inv;
              }
            x = std::move(y);
          } else if constexpr (std::is_same_v<L, Dense>) {
            TensorT<T> flat = x;
            flat.shape = {flat.size()};
            TensorT<T> y;
            kernels::dense_forward(flat, params.tensors[params.index_of(pre + "w")],
                                   params.tensors[params.index_of(pre + "b")], y);
            x = std::move(y);
          } else if constexpr (std::is_same_v<L, Dropout>) {
            if (train && layer.p > 0.0) {
              if (!g) throw std::invalid_argument("Dropout in train mode needs an rng");
              TensorT<T> mask(x.shape);
              const T scale = static_cast<T>(1.0 / (1.0 - layer.p));
              for (std::size_t j = 0; j < mask.size(); ++j)
                mask[j] = rng::uniform01(*g) < layer.p ? T{0} : scale;
              for (std::size_t j = 0; j < x.size(); ++j) x[j] *= mask[j];
              if (cache) cache->masks[i] = std::move(mask);
            }
          }
        },
        config.layers[i]);
    if (cache) cache->acts.push_back(x);
  }
  return x;
}

template <typename T>
TensorT<T> backward(const EncoderConfig& config, const ParamSet<T>& params,
                    const ForwardCache<T>& cache, const TensorT<T>& grad_out,
                    ParamSet<T>& grads) {
  if (cache.acts.size() != config.layers.size() + 1)
    throw std::invalid_argument("backward: cache does not match config");
  TensorT<T> g = grad_out;
  for (std::size_t ri = config.layers.size(); ri-- > 0;) {
    const std::string pre = "l" + std::to_string(ri) + ".";
    const TensorT<T>& in = cache.acts[ri];
    const TensorT<T>& out = cache.acts[ri + 1];
    std::visit(
        [&](const auto& layer) {
          using L = std::decay_t<decltype(layer)>;
          if constexpr (std::is_same_v<L, Conv3x3>) {
            TensorT<T> gi;
            kernels::conv3x3_backward(in, params.tensors[params.index_of(pre + "w")],
                                      layer.stride, g, gi,
                                      grads.tensors[grads.index_of(pre + "w")],
                                      grads.tensors[grads.index_of(pre + "b")]);
            g = std::move(gi);
          } else if constexpr (std::is_same_v<L, ResidualBlock>) {
            const bool projected = in.dim(0) != layer.channels;
            const auto& inner = cache.res_acts[ri];
            // final relu
            TensorT<T> gsum = detail::relu_backward(out, g);
            // shortcut path
            TensorT<T> g_in_shortcut;
            if (projected) {
              kernels::conv1x1_backward(in,
                                        params.tensors[params.index_of(pre + "proj.w")],
                                        gsum, g_in_shortcut,
                                        grads.tensors[grads.index_of(pre + "proj.w")]);
            } else {
              g_in_shortcut = gsum;
            }
            // conv chain, in reverse
            TensorT<T> gc = gsum;
            for (int k = layer.n_convs - 1; k >= 0; --k) {
              const std::string cp = pre + "c" + std::to_string(k) + ".";
              const TensorT<T>& conv_in = k == 0 ? in : inner[std::size_t(k - 1)];
              if (k + 1 < layer.n_convs)  // undo the relu applied after conv k
                gc = detail::relu_backward(inner[std::size_t(k)], gc);
              TensorT<T> gi;
              kernels::conv3x3_backward(conv_in,
                                        params.tensors[params.index_of(cp + "w")], 1, gc,
                                        gi, grads.tensors[grads.index_of(cp + "w")],
                                        grads.tensors[grads.index_of(cp + "b")]);
              gc = std::move(gi);
            }
            for (std::size_t j = 0; j < gc.size(); ++j) gc[j] += g_in_shortcut[j];
            g = std::move(gc);
          } else if constexpr (std::is_same_v<L, Relu>) {
            g = detail::relu_backward(out, g);
          } else if constexpr (std::is_same_v<L, TemporalAvgPool>) {
            TensorT<T> gi(in.shape);
            const T inv = T{1} / static_cast<T>(layer.rows);
            for (std::size_t ch = 0; ch < in.dim(0); ++ch)
              for (std::size_t row = 0; row < in.dim(1); ++row)
                for (std::size_t col = 0; col < in.dim(2); ++col)
                  gi.at3(ch, row, col) = g.at3(ch, 0, col) * inv;
            g = std::move(gi);
          } else if constexpr (std::is_same_v<L, Dense>) {
            TensorT<T> flat = in;
            flat.shape = {flat.size()};
            TensorT<T> gi;
            kernels::dense_backward(flat, params.tensors[params.index_of(pre + "w")], g,
                                    gi, grads.tensors[grads.index_of(pre + "w")],
                                    grads.tensors[grads.index_of(pre + "b")]);
            gi.shape = in.shape;
            g = std::move(gi);
          } else if constexpr (std::is_same_v<L, Dropout>) {
            if (cache.train && layer.p > 0.0) {
              const TensorT<T>& mask = cache.masks[ri];
              for (std::size_t j = 0; j < g.size(); ++j) g[j] *= mask[j];
            }
          }
        },
        config.layers[ri]);
  }
  return g;
}

}  // namespace spk::nn
