#pragma once

#include <cmath>
#include <cstdint>

#include "spk/nn.hpp"

namespace spk::nn {

template <typename T>
struct OptimizerState {
  double lr = 0.05;
  double momentum = 0.93;
  double weight_decay = 0.0005;
  ParamSet<T> velocity;  // shapes mirror the parameter set
};

// v <- momentum*v + (grad + weight_decay*param); param <- param - lr*v
template <typename T>
void sgd_step(ParamSet<T>& params, const ParamSet<T>& grads, OptimizerState<T>& state) {
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    auto& p = params.tensors[i];
    const auto& g = grads.tensors[i];
    auto& v = state.velocity.tensors[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      v[j] = static_cast<T>(state.momentum * v[j] +
                            (g[j] + state.weight_decay * p[j]));
      p[j] = static_cast<T>(p[j] - state.lr * v[j]);
    }
  }
}

struct LrSchedule {
  double initial_lr = 0.05;
  double factor = 0.75;
  int n_steps = 8;
  int iters_per_step = 1000;

  friend bool operator==(const LrSchedule&, const LrSchedule&) = default;
};

// initial_lr * factor^min(floor(iter/iters_per_step), n_steps)
inline double lr_at(const LrSchedule& s, std::int64_t iter) {
  std::int64_t step = iter / s.iters_per_step;
  if (step > s.n_steps) step = s.n_steps;
  return s.initial_lr * std::pow(s.factor, static_cast<double>(step));
}

}  // namespace spk::nn
