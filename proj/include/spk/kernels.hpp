#pragma once

#include <cstddef>

#include "spk/tensor.hpp"

namespace spk::kernels {

// Global switch between the OpenMP path and the serial reference path.
// Both paths write each output element exactly once from a sequential
// accumulation, so results are bit-identical; tests and the benchmark
// flip this flag.
inline bool& parallel_enabled() {
  static bool enabled = true;
  return enabled;
}

namespace detail {

// valid output range for one kernel tap: k maps output o to input o*s + k - 1
struct TapRange {
  std::size_t begin, end;
};

inline TapRange tap_range(int k, int stride, std::size_t in_dim, std::size_t out_dim) {
  // o*s + k - 1 >= 0  and  o*s + k - 1 <= in_dim - 1, i.e. o*s <= in_dim - k
  const std::size_t begin = k == 0 ? 1 : 0;  // stride in {1,2}: ceil(1/s) = 1
  const std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(in_dim) - k;
  if (hi < 0) return {begin, begin};
  const std::size_t max_o = static_cast<std::size_t>(hi) / std::size_t(stride);
  const std::size_t end = std::min(out_dim, max_o + 1);
  return {begin, std::max(begin, end)};
}

}  // namespace detail

// 3x3 convolution, padding 1, stride s: (C,H,W) -> (N, ceil(H/s), ceil(W/s)).
// weights [N,C,3,3], bias [N]. Inner loops are branchless over precomputed
// valid tap ranges.
template <typename T>
void conv3x3_forward(const TensorT<T>& in, const TensorT<T>& weight,
                     const TensorT<T>& bias, int stride, TensorT<T>& out) {
  const std::size_t in_c = in.dim(0), in_h = in.dim(1), in_w = in.dim(2);
  const std::size_t out_c = weight.dim(0);
  const std::size_t s = static_cast<std::size_t>(stride);
  const std::size_t out_h = (in_h + s - 1) / s;
  const std::size_t out_w = (in_w + s - 1) / s;
  out = TensorT<T>({out_c, out_h, out_w});

#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (std::ptrdiff_t occ = 0; occ < static_cast<std::ptrdiff_t>(out_c); ++occ) {
    const std::size_t oc = static_cast<std::size_t>(occ);
    T* out_plane = out.data() + oc * out_h * out_w;
    std::fill(out_plane, out_plane + out_h * out_w, bias[oc]);
    for (std::size_t ic = 0; ic < in_c; ++ic) {
      const T* in_plane = in.data() + ic * in_h * in_w;
      for (int kh = 0; kh < 3; ++kh) {
        const auto rh = detail::tap_range(kh, stride, in_h, out_h);
        for (int kw = 0; kw < 3; ++kw) {
          const auto rw = detail::tap_range(kw, stride, in_w, out_w);
          const T wv = weight.at4(oc, ic, std::size_t(kh), std::size_t(kw));
          for (std::size_t oh = rh.begin; oh < rh.end; ++oh) {
            const T* in_row = in_plane + (oh * s + std::size_t(kh) - 1) * in_w +
                              std::size_t(kw) - 1;
            T* out_row = out_plane + oh * out_w;
            for (std::size_t ow = rw.begin; ow < rw.end; ++ow)
              out_row[ow] += wv * in_row[ow * s];
          }
        }
      }
    }
  }
}

// Gradients for conv3x3_forward. grad_weight/grad_bias are accumulated into,
// grad_in is overwritten.
template <typename T>
void conv3x3_backward(const TensorT<T>& in, const TensorT<T>& weight, int stride,
                      const TensorT<T>& grad_out, TensorT<T>& grad_in,
                      TensorT<T>& grad_weight, TensorT<T>& grad_bias) {
  const std::size_t in_c = in.dim(0), in_h = in.dim(1), in_w = in.dim(2);
  const std::size_t out_c = grad_out.dim(0), out_h = grad_out.dim(1),
                    out_w = grad_out.dim(2);
  const std::size_t s = static_cast<std::size_t>(stride);
  grad_in = TensorT<T>({in_c, in_h, in_w});

  // weight and bias gradients: each oc slice owned by one iteration
#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (std::ptrdiff_t occ = 0; occ < static_cast<std::ptrdiff_t>(out_c); ++occ) {
    const std::size_t oc = static_cast<std::size_t>(occ);
    const T* go_plane = grad_out.data() + oc * out_h * out_w;
    T bacc = grad_bias[oc];
    for (std::size_t i = 0; i < out_h * out_w; ++i) bacc += go_plane[i];
    grad_bias[oc] = bacc;

    for (std::size_t ic = 0; ic < in_c; ++ic) {
      const T* in_plane = in.data() + ic * in_h * in_w;
      for (int kh = 0; kh < 3; ++kh) {
        const auto rh = detail::tap_range(kh, stride, in_h, out_h);
        for (int kw = 0; kw < 3; ++kw) {
          const auto rw = detail::tap_range(kw, stride, in_w, out_w);
          T acc = 0;
          for (std::size_t oh = rh.begin; oh < rh.end; ++oh) {
            const T* in_row = in_plane + (oh * s + std::size_t(kh) - 1) * in_w +
                              std::size_t(kw) - 1;
            const T* go_row = go_plane + oh * out_w;
            for (std::size_t ow = rw.begin; ow < rw.end; ++ow)
              acc += go_row[ow] * in_row[ow * s];
          }
          grad_weight.at4(oc, ic, std::size_t(kh), std::size_t(kw)) += acc;
        }
      }
    }
  }

  // input gradient: each ic slice owned by one iteration
#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (std::ptrdiff_t icc = 0; icc < static_cast<std::ptrdiff_t>(in_c); ++icc) {
    const std::size_t ic = static_cast<std::size_t>(icc);
    T* gi_plane = grad_in.data() + ic * in_h * in_w;
    for (std::size_t oc = 0; oc < out_c; ++oc) {
      const T* go_plane = grad_out.data() + oc * out_h * out_w;
      for (int kh = 0; kh < 3; ++kh) {
        const auto rh = detail::tap_range(kh, stride, in_h, out_h);
        for (int kw = 0; kw < 3; ++kw) {
          const auto rw = detail::tap_range(kw, stride, in_w, out_w);
          const T wv = weight.at4(oc, ic, std::size_t(kh), std::size_t(kw));
          for (std::size_t oh = rh.begin; oh < rh.end; ++oh) {
            T* gi_row = gi_plane + (oh * s + std::size_t(kh) - 1) * in_w +
                        std::size_t(kw) - 1;
            const T* go_row = go_plane + oh * out_w;
            for (std::size_t ow = rw.begin; ow < rw.end; ++ow)
              gi_row[ow * s] += wv * go_row[ow];
          }
        }
      }
    }
  }
}

// 1x1 projection (residual shortcut when channel counts change).
// weights [N,C], no bias.
template <typename T>
void conv1x1_forward(const TensorT<T>& in, const TensorT<T>& weight, TensorT<T>& out) {
  const std::size_t in_c = in.dim(0), h = in.dim(1), w = in.dim(2);
  const std::size_t out_c = weight.dim(0);
  out = TensorT<T>({out_c, h, w});
  const std::size_t plane = h * w;
#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (std::ptrdiff_t oc = 0; oc < static_cast<std::ptrdiff_t>(out_c); ++oc) {
    T* op = out.data() + static_cast<std::size_t>(oc) * plane;
    for (std::size_t ic = 0; ic < in_c; ++ic) {
      const T wv = weight.at2(static_cast<std::size_t>(oc), ic);
      const T* ip = in.data() + ic * plane;
      for (std::size_t i = 0; i < plane; ++i) op[i] += wv * ip[i];
    }
  }
}

template <typename T>
void conv1x1_backward(const TensorT<T>& in, const TensorT<T>& weight,
                      const TensorT<T>& grad_out, TensorT<T>& grad_in,
                      TensorT<T>& grad_weight) {
  const std::size_t in_c = in.dim(0), h = in.dim(1), w = in.dim(2);
  const std::size_t out_c = weight.dim(0);
  const std::size_t plane = h * w;
  grad_in = TensorT<T>({in_c, h, w});
#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (std::ptrdiff_t oc = 0; oc < static_cast<std::ptrdiff_t>(out_c); ++oc) {
    const T* gp = grad_out.data() + static_cast<std::size_t>(oc) * plane;
    for (std::size_t ic = 0; ic < in_c; ++ic) {
      const T* ip = in.data() + ic * plane;
      T acc = 0;
      for (std::size_t i = 0; i < plane; ++i) acc += gp[i] * ip[i];
      grad_weight.at2(static_cast<std::size_t>(oc), ic) += acc;
    }
  }
#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (std::ptrdiff_t ic = 0; ic < static_cast<std::ptrdiff_t>(in_c); ++ic) {
    T* gip = grad_in.data() + static_cast<std::size_t>(ic) * plane;
    for (std::size_t oc = 0; oc < out_c; ++oc) {
      const T wv = weight.at2(oc, static_cast<std::size_t>(ic));
      const T* gp = grad_out.data() + oc * plane;
      for (std::size_t i = 0; i < plane; ++i) gip[i] += wv * gp[i];
    }
  }
}

// Dense: out[o] = bias[o] + sum_i weight[o,i] * in[i], weight [O,I].
template <typename T>
void dense_forward(const TensorT<T>& in, const TensorT<T>& weight,
                   const TensorT<T>& bias, TensorT<T>& out) {
  const std::size_t out_dim = weight.dim(0), in_dim = weight.dim(1);
  out = TensorT<T>({out_dim});
#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (std::ptrdiff_t o = 0; o < static_cast<std::ptrdiff_t>(out_dim); ++o) {
    T acc = bias[static_cast<std::size_t>(o)];
    const T* wp = weight.data() + static_cast<std::size_t>(o) * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) acc += wp[i] * in[i];
    out[static_cast<std::size_t>(o)] = acc;
  }
}

template <typename T>
void dense_backward(const TensorT<T>& in, const TensorT<T>& weight,
                    const TensorT<T>& grad_out, TensorT<T>& grad_in,
                    TensorT<T>& grad_weight, TensorT<T>& grad_bias) {
  const std::size_t out_dim = weight.dim(0), in_dim = weight.dim(1);
  grad_in = TensorT<T>({in_dim});
#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (std::ptrdiff_t o = 0; o < static_cast<std::ptrdiff_t>(out_dim); ++o) {
    const T g = grad_out[static_cast<std::size_t>(o)];
    grad_bias[static_cast<std::size_t>(o)] += g;
    T* gwp = grad_weight.data() + static_cast<std::size_t>(o) * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) gwp[i] += g * in[i];
  }
  for (std::size_t i = 0; i < in_dim; ++i) {
    T acc = 0;
    for (std::size_t o = 0; o < out_dim; ++o) acc += weight.at2(o, i) * grad_out[o];
    grad_in[i] = acc;
  }
}

}  // namespace spk::kernels
