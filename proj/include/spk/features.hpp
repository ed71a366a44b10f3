#pragma once

#include <complex>
#include <string>
#include <vector>

#include "spk/audio.hpp"
#include "spk/tensor.hpp"

namespace spk::feat {

struct FrameSpec {
  std::size_t win_len = 400;   // 25 ms at 16 kHz
  std::size_t hop = 160;       // 10 ms at 16 kHz
  std::size_t fft_size = 512;  // power of two
  int sample_rate = 16000;

  std::size_t bins() const { return fft_size / 2 + 1; }
};

// w[k] = 0.54 - 0.46 cos(2 pi k / (n-1)), n >= 2
std::vector<double> hamming_window(std::size_t n);

// floor((signal_len - win_len) / hop) + 1; throws when signal_len < win_len
std::size_t frame_count(std::size_t signal_len, const FrameSpec& spec);

// In-place radix-2 FFT; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a);

// Amplitude spectrogram, rows = frames, cols = fft_size/2 + 1. Frames are
// windowed, zero-padded to fft_size and transformed independently.
TensorD stft_amplitude(const audio::Waveform& w, const FrameSpec& spec);

// Per frequency column: (x - mean) / sqrt(var + 1e-8), population variance
// computed over the crop's own frames. Requires at least 2 frames.
TensorD normalize_per_bin(const TensorD& spectrogram);

// Golden-file matrix format: two little-endian u32 dims then row-major
// little-endian float32 values.
void write_matrix(const std::string& path, const TensorD& m);
TensorD read_matrix(const std::string& path);

}  // namespace spk::feat
