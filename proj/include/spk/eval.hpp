#pragma once

#include <string>
#include <vector>

#include "spk/audio.hpp"
#include "spk/features.hpp"
#include "spk/nn.hpp"
#include "spk/tensor.hpp"

namespace spk::eval {

// Verification trial scores, split by ground truth.
struct ScoreSet {
  std::vector<double> target;
  std::vector<double> nontarget;
};

struct DcfParams {
  double c_miss = 1.0;
  double c_fa = 1.0;
  double p_target = 0.01;
};

struct OperatingPoint {
  double threshold;
  double p_miss;  // fraction of target trials scored below threshold
  double p_fa;    // fraction of nontarget trials scored at/above threshold
};

struct MetricResult {
  double value;
  double threshold;
};

double cosine_score(const std::vector<double>& a, const std::vector<double>& b);

// One operating point per candidate threshold (score midpoints plus +/-inf),
// ordered by rising threshold. Scores equal to the threshold count as accept.
std::vector<OperatingPoint> det_points(const ScoreSet& scores);

// Equal error rate: linear interpolation between the adjacent operating
// points where the sign of (P_miss - P_fa) flips.
MetricResult eer(const ScoreSet& scores);

// min over thresholds of C_miss*P_miss*P_tar + C_fa*P_fa*(1-P_tar)
MetricResult min_dcf(const ScoreSet& scores, const DcfParams& p = {});

// Fraction of rows whose true label ranks among the k best scores; ties
// broken in favor of the lower class index.
double topk_accuracy(const TensorD& logit_rows, const std::vector<int>& labels,
                     std::size_t k);

// Mean embedding over n_crops random crops (test-time augmentation governed
// by `policy`), each featurized and forwarded in eval mode.
std::vector<double> extract_embedding(const nn::EncoderConfig& config,
                                      const nn::ParamSet<float>& params,
                                      const audio::Waveform& w,
                                      const feat::FrameSpec& spec,
                                      const audio::AugmentPolicy& policy,
                                      std::size_t n_crops, rng::Stream& rng);

}  // namespace spk::eval
