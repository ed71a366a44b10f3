#include "spk/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace spk::eval {

double cosine_score(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_score: dim mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw std::domain_error("cosine_score: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

OperatingPoint point_at(const std::vector<double>& sorted_targets,
                        const std::vector<double>& sorted_nontargets, double t) {
  // accept rule: score >= t
  const auto miss_end = std::lower_bound(sorted_targets.begin(), sorted_targets.end(), t);
  const auto fa_begin =
      std::lower_bound(sorted_nontargets.begin(), sorted_nontargets.end(), t);
  OperatingPoint p;
  p.threshold = t;
  p.p_miss = double(miss_end - sorted_targets.begin()) / double(sorted_targets.size());
  p.p_fa = double(sorted_nontargets.end() - fa_begin) / double(sorted_nontargets.size());
  return p;
}

}  // namespace

std::vector<OperatingPoint> det_points(const ScoreSet& scores) {
  if (scores.target.empty() || scores.nontarget.empty())
    throw std::invalid_argument("det_points: need at least one trial of each class");
  std::vector<double> targets = scores.target, nontargets = scores.nontarget;
  std::sort(targets.begin(), targets.end());
  std::sort(nontargets.begin(), nontargets.end());

  std::vector<double> all;
  all.reserve(targets.size() + nontargets.size());
  all.insert(all.end(), targets.begin(), targets.end());
  all.insert(all.end(), nontargets.begin(), nontargets.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> thresholds;
  thresholds.push_back(-inf);
  for (std::size_t i = 0; i + 1 < all.size(); ++i)
    thresholds.push_back(0.5 * (all[i] + all[i + 1]));
  thresholds.push_back(inf);

  std::vector<OperatingPoint> points;
  points.reserve(thresholds.size());
  for (double t : thresholds) points.push_back(point_at(targets, nontargets, t));
  return points;
}

MetricResult eer(const ScoreSet& scores) {
  const auto points = det_points(scores);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double diff = points[i].p_miss - points[i].p_fa;
    if (diff == 0.0) return {points[i].p_miss, points[i].threshold};
    if (diff > 0.0) {
      // sign flipped between i-1 and i; interpolate linearly
      const auto& a = points[i - 1];
      const auto& b = points[i];
      const double d1 = a.p_miss - a.p_fa;
      const double d2 = diff;
      const double lam = -d1 / (d2 - d1);
      const double value = a.p_miss + lam * (b.p_miss - a.p_miss);
      double thr = b.threshold;
      if (std::isfinite(a.threshold) && std::isfinite(b.threshold))
        thr = a.threshold + lam * (b.threshold - a.threshold);
      else if (std::isfinite(a.threshold))
        thr = a.threshold;
      return {value, thr};
    }
  }
  // p_miss - p_fa reaches +1 at +inf, so the flip always exists
  throw std::logic_error("eer: no crossing found");
}

MetricResult min_dcf(const ScoreSet& scores, const DcfParams& p) {
  const auto points = det_points(scores);
  MetricResult best{std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& pt : points) {
    const double c = p.c_miss * pt.p_miss * p.p_target +
                     p.c_fa * pt.p_fa * (1.0 - p.p_target);
    if (c < best.value) best = {c, pt.threshold};
  }
  return best;
}

double topk_accuracy(const TensorD& logit_rows, const std::vector<int>& labels,
                     std::size_t k) {
  const std::size_t B = logit_rows.dim(0), C = logit_rows.dim(1);
  if (k > C) throw std::invalid_argument("topk_accuracy: k > number of classes");
  if (labels.size() != B) throw std::invalid_argument("topk_accuracy: label count");
  std::size_t hits = 0;
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t y = static_cast<std::size_t>(labels[b]);
    const double sy = logit_rows.at2(b, y);
    std::size_t rank = 0;  // classes ranked ahead of the true one
    for (std::size_t j = 0; j < C; ++j) {
      if (j == y) continue;
      if (logit_rows.at2(b, j) > sy || (logit_rows.at2(b, j) == sy && j < y)) ++rank;
    }
    if (rank < k) ++hits;
  }
  return double(hits) / double(B);
}

std::vector<double> extract_embedding(const nn::EncoderConfig& config,
                                      const nn::ParamSet<float>& params,
                                      const audio::Waveform& w,
                                      const feat::FrameSpec& spec,
                                      const audio::AugmentPolicy& policy,
                                      std::size_t n_crops, rng::Stream& rng) {
  if (n_crops < 1) throw std::invalid_argument("extract_embedding: n_crops >= 1");
  std::vector<double> mean(config.embedding_dim, 0.0);
  for (std::size_t c = 0; c < n_crops; ++c) {
    const audio::Waveform crop = audio::sample_training_crop(w, policy, rng);
    const TensorD spec_mat = feat::normalize_per_bin(feat::stft_amplitude(crop, spec));
    TensorF input = tensor_cast<float>(spec_mat);
    input.shape = {1, spec_mat.dim(0), spec_mat.dim(1)};
    const TensorF emb = nn::forward(config, params, input, /*train=*/false, nullptr);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += emb[i];
  }
  for (double& x : mean) x /= double(n_crops);
  return mean;
}

}  // namespace spk::eval
