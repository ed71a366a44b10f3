#include "spk/features.hpp"

#include <cmath>
#include <cstdint>

#include "spk/kernels.hpp"
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace spk::feat {

std::vector<double> hamming_window(std::size_t n) {
  if (n < 2) throw std::invalid_argument("hamming_window: n must be >= 2");
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k)
    w[k] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * double(k) / double(n - 1));
  return w;
}

std::size_t frame_count(std::size_t signal_len, const FrameSpec& spec) {
  if (signal_len < spec.win_len)
    throw std::invalid_argument("frame_count: signal shorter than one window");
  return (signal_len - spec.win_len) / spec.hop + 1;
}

void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::invalid_argument("fft_radix2: size must be a power of two");
  // bit reversal
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / double(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

TensorD stft_amplitude(const audio::Waveform& w, const FrameSpec& spec) {
  if (spec.win_len < 1 || spec.hop < 1 || spec.win_len > spec.fft_size)
    throw std::invalid_argument("stft_amplitude: bad frame spec");
  const std::size_t frames = frame_count(w.size(), spec);
  const std::size_t bins = spec.bins();
  const std::vector<double> window = hamming_window(spec.win_len);

  TensorD out({frames, bins});
#pragma omp parallel for schedule(static) if (kernels::parallel_enabled())
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(frames); ++t) {
    std::vector<std::complex<double>> frame(spec.fft_size, {0.0, 0.0});
    const std::size_t base = static_cast<std::size_t>(t) * spec.hop;
    for (std::size_t k = 0; k < spec.win_len; ++k)
      frame[k] = w.samples[base + k] * window[k];
    fft_radix2(frame);
    for (std::size_t f = 0; f < bins; ++f)
      out.at2(static_cast<std::size_t>(t), f) = std::abs(frame[f]);
  }
  return out;
}

TensorD normalize_per_bin(const TensorD& s) {
  const std::size_t rows = s.dim(0), cols = s.dim(1);
  if (rows < 2) throw std::invalid_argument("normalize_per_bin: need >= 2 frames");
  constexpr double kEps = 1e-8;
  TensorD out({rows, cols});
  for (std::size_t f = 0; f < cols; ++f) {
    double mean = 0.0;
    for (std::size_t t = 0; t < rows; ++t) mean += s.at2(t, f);
    mean /= double(rows);
    double var = 0.0;
    for (std::size_t t = 0; t < rows; ++t) {
      const double d = s.at2(t, f) - mean;
      var += d * d;
    }
    var /= double(rows);
    const double inv = 1.0 / std::sqrt(var + kEps);
    for (std::size_t t = 0; t < rows; ++t) out.at2(t, f) = (s.at2(t, f) - mean) * inv;
  }
  return out;
}

void write_matrix(const std::string& path, const TensorD& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot create matrix file: " + path);
  const std::uint32_t dims[2] = {static_cast<std::uint32_t>(m.dim(0)),
                                 static_cast<std::uint32_t>(m.dim(1))};
  f.write(reinterpret_cast<const char*>(dims), sizeof dims);
  for (double x : m.v) {
    const float y = static_cast<float>(x);
    f.write(reinterpret_cast<const char*>(&y), sizeof y);
  }
}

TensorD read_matrix(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open matrix file: " + path);
  std::uint32_t dims[2];
  f.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!f) throw std::runtime_error("truncated matrix file: " + path);
  TensorD m({dims[0], dims[1]});
  for (double& x : m.v) {
    float y;
    f.read(reinterpret_cast<char*>(&y), sizeof y);
    x = y;
  }
  if (!f) throw std::runtime_error("truncated matrix file: " + path);
  return m;
}

}  // namespace spk::feat
