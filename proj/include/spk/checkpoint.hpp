#pragma once

#include <cstdint>
#include <string>

#include "spk/config.hpp"
#include "spk/nn.hpp"

namespace spk::cli {

// Trained state: run config, iteration count, encoder + head parameters and
// optimizer velocities. Encoder parameter names follow the nn layout; the
// head lives under "head.w" / "head.b".
struct Checkpoint {
  RunConfig config;
  std::size_t n_classes = 0;
  std::int64_t iteration = 0;
  nn::ParamSet<float> params;
  nn::ParamSet<float> velocity;
};

// File layout: one text header (format line, iteration, class count, the
// run-config INI between config_begin/config_end markers), then per tensor
// a "tensor <name> <ndim> <dims...>" line followed by raw little-endian
// float32 values.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace spk::cli
