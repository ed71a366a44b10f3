#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spk/tensor.hpp"

namespace spk::loss {

enum class LossKind { Softmax, ASoftmax, AMSoftmax, LogisticMargin };

std::string loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& name);

// Per-class weight vectors; bias present only for Softmax / Logistic Margin.
struct Head {
  TensorD W;                  // C x d
  std::vector<double> bias;   // empty when the loss takes no bias
  bool has_bias() const { return !bias.empty(); }
  std::size_t classes() const { return W.dim(0); }
  std::size_t dim() const { return W.dim(1); }
};

struct LossConfig {
  LossKind kind = LossKind::Softmax;
  // A-Softmax
  int m = 4;
  double lambda_base = 1000.0;
  double lambda_min = 5.0;
  double gamma = 0.015;
  // AM-Softmax
  double scale = 50.0;
  double margin = 0.4;
  // Logistic Margin
  double alpha = 25.0;

  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

struct LossOutput {
  double loss = 0.0;                 // mean over the batch
  std::vector<double> prob_true;     // p_yi per example
  TensorD grad_x;                    // B x d
  TensorD grad_W;                    // C x d
  std::vector<double> grad_c;        // C, empty when no bias
};

// lambda(iter) = max(lambda_min, lambda_base / (1 + gamma*iter))
double asoftmax_lambda(const LossConfig& cfg, std::int64_t iter);

// Piecewise angular margin: psi(theta) = (-1)^k cos(m theta) - 2k on
// [k pi/m, (k+1) pi/m]. Returns psi and d psi / d cos(theta) (left-limit
// branch at interior boundaries).
void asoftmax_psi(int m, double cos_theta, double* psi, double* dpsi_dcos);

// Plain softmax cross entropy on logits W x + c.
LossOutput softmax_ce(const TensorD& x, const std::vector<int>& labels,
                      const Head& head);

// A-Softmax: W rows unit-normalized, no bias; the true-class logit blends
// |x| cos(theta_y) and |x| psi(theta_y) with the annealed lambda.
LossOutput asoftmax(const TensorD& x, const std::vector<int>& labels, const Head& head,
                    const LossConfig& cfg, std::int64_t iter);

// AM-Softmax: both W rows and embeddings unit-normalized, logits
// s*(cos theta_y - m) vs s*cos theta_j, no bias.
LossOutput amsoftmax(const TensorD& x, const std::vector<int>& labels, const Head& head,
                     const LossConfig& cfg);

// Logistic Margin: S_j = W_j (x/|x|) + c_j, alpha subtracted from the true
// class score; W rows are not normalized and biases are present.
LossOutput logistic_margin(const TensorD& x, const std::vector<int>& labels,
                           const Head& head, const LossConfig& cfg);

// Dispatch on cfg.kind.
LossOutput loss_forward(const TensorD& x, const std::vector<int>& labels,
                        const Head& head, const LossConfig& cfg, std::int64_t iter = 0);

// Central finite differences over every coordinate of x, W and c; returns
// the max relative error against the analytic gradients.
double grad_check(const TensorD& x, const std::vector<int>& labels, const Head& head,
                  const LossConfig& cfg, std::int64_t iter = 0, double h = 1e-5);

}  // namespace spk::loss
