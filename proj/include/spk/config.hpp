#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spk/audio.hpp"
#include "spk/features.hpp"
#include "spk/losses.hpp"
#include "spk/nn.hpp"
#include "spk/optim.hpp"

namespace spk::cli {

// path,speaker,split rows; speaker labels interned to dense ids in file order
struct ManifestRecord {
  std::string path;
  int speaker;
  std::string split;  // train | val | test
};

struct Manifest {
  std::vector<ManifestRecord> records;
  std::vector<std::string> speaker_names;  // index = dense speaker id

  std::size_t n_speakers() const { return speaker_names.size(); }
  std::vector<ManifestRecord> subset(const std::string& split) const;
};

Manifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const Manifest& m);

// Full run description; round-trips through the INI file exactly.
struct RunConfig {
  // [audio]
  int sample_rate = 16000;
  std::size_t crop_len = 48240;
  double reverse_prob = 0.5;
  bool train_augment = true;
  bool test_augment = true;
  // [features]
  std::size_t win_len = 400;
  std::size_t hop = 160;
  std::size_t fft_size = 512;
  // [encoder]
  nn::EncoderConfig encoder;
  // [loss]
  loss::LossConfig loss;
  // [optimizer]
  double momentum = 0.93;
  double weight_decay = 0.0005;
  nn::LrSchedule schedule;
  // [train]
  std::size_t batch_size = 50;
  std::int64_t iterations = 0;
  std::uint64_t seed = 1;
  std::size_t n_crops = 50;

  feat::FrameSpec frame_spec() const {
    return {win_len, hop, fft_size, sample_rate};
  }
  audio::AugmentPolicy train_policy() const {
    return {crop_len, reverse_prob, train_augment};
  }
  audio::AugmentPolicy test_policy() const {
    return {crop_len, reverse_prob, test_augment};
  }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::string serialize_config(const RunConfig& cfg);
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& cfg);

// Layer list DSL used inside the config file, e.g.
// "conv(8,2) relu conv(16,2) relu pool(19) dropout(0.5) dense(64)"
// or the shorthand "resnet20".
std::string layers_to_string(const std::vector<nn::LayerConfig>& layers);
std::vector<nn::LayerConfig> layers_from_string(const std::string& text);

// exact decimal round-trip for doubles in config files
std::string format_double(double x);

}  // namespace spk::cli
