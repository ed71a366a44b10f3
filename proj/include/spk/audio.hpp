#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "spk/rng.hpp"

namespace spk::audio {

enum class AudioErrc {
  MissingFile,
  BadContainer,
  UnsupportedEncoding,
  EmptyAudio,
  BadArgument,
  SampleRateMismatch,
};

class AudioError : public std::runtime_error {
 public:
  AudioError(AudioErrc c, const std::string& msg) : std::runtime_error(msg), code(c) {}
  AudioErrc code;
};

// Mono waveform, samples in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;

  std::size_t size() const { return samples.size(); }
};

struct AugmentPolicy {
  std::size_t crop_len = 0;     // samples
  double reverse_prob = 0.5;    // per-crop coin
  bool enabled = true;          // false = plain crop, no extension/reversal
};

// 16-bit PCM RIFF/WAVE loader; multi-channel input is averaged to mono.
Waveform load_wav(const std::string& path);

// 16-bit PCM mono writer (for the synthetic corpus and tests).
void save_wav(const std::string& path, const Waveform& w);

// out[i] = w[(offset + i) mod len(w)]
Waveform repeat_extend_crop(const Waveform& w, std::size_t offset, std::size_t length);

Waveform time_reverse(const Waveform& w);

// Augmented: uniform offset anywhere in the signal, repeat-extended crop,
// reversed with probability reverse_prob. Non-augmented: uniform contiguous
// crop, zero-padded at the tail when the signal is shorter than crop_len.
Waveform sample_training_crop(const Waveform& w, const AugmentPolicy& policy,
                              rng::Stream& rng);

}  // namespace spk::audio
