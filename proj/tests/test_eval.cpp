#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "spk/eval.hpp"
#include "spk/rng.hpp"

using namespace spk;
using namespace spk::eval;

namespace {

// independent brute force: evaluate every candidate threshold by direct
// counting, interpolate EER between the adjacent sign-flip points
double brute_force_eer(const ScoreSet& s) {
  std::vector<double> all;
  all.insert(all.end(), s.target.begin(), s.target.end());
  all.insert(all.end(), s.nontarget.begin(), s.nontarget.end());
  std::sort(all.begin(), all.end());
  std::vector<double> thr{-1e300};
  for (std::size_t i = 0; i + 1 < all.size(); ++i)
    thr.push_back(0.5 * (all[i] + all[i + 1]));
  thr.push_back(1e300);

  auto point = [&](double t) {
    double miss = 0.0, fa = 0.0;
    for (double v : s.target)
      if (v < t) miss += 1.0;
    for (double v : s.nontarget)
      if (v >= t) fa += 1.0;
    return std::pair{miss / double(s.target.size()), fa / double(s.nontarget.size())};
  };
  for (std::size_t i = 0; i < thr.size(); ++i) {
    auto [pm, pf] = point(thr[i]);
    if (pm == pf) return pm;
    if (pm > pf) {
      // crossed between thr[i-1] and thr[i]
      auto [pm0, pf0] = point(thr[i - 1]);
      const double a = (pf0 - pm0) / ((pf0 - pm0) + (pm - pf));
      return pm0 + a * (pm - pm0);
    }
  }
  return 1.0;
}

double brute_force_min_dcf(const ScoreSet& s, const DcfParams& p) {
  std::vector<double> all;
  all.insert(all.end(), s.target.begin(), s.target.end());
  all.insert(all.end(), s.nontarget.begin(), s.nontarget.end());
  std::sort(all.begin(), all.end());
  std::vector<double> thr{-1e300};
  for (std::size_t i = 0; i + 1 < all.size(); ++i)
    thr.push_back(0.5 * (all[i] + all[i + 1]));
  thr.push_back(1e300);
  double best = 1e300;
  for (double t : thr) {
    double miss = 0.0, fa = 0.0;
    for (double v : s.target)
      if (v < t) miss += 1.0;
    for (double v : s.nontarget)
      if (v >= t) fa += 1.0;
    const double dcf = p.c_miss * (miss / double(s.target.size())) * p.p_target +
                       p.c_fa * (fa / double(s.nontarget.size())) * (1.0 - p.p_target);
    best = std::min(best, dcf);
  }
  return best;
}

}  // namespace

TEST_CASE("cosine score on trivial vectors") {
  CHECK(cosine_score({1, 0, 0}, {1, 0, 0}) == doctest::Approx(1.0));
  CHECK(cosine_score({1, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(cosine_score({2, 0}, {-3, 0}) == doctest::Approx(-1.0));
  CHECK(cosine_score({3, 4}, {3, 4}) == doctest::Approx(1.0));
}

TEST_CASE("worked EER example") {
  ScoreSet s;
  s.target = {0.9, 0.8, 0.4};
  s.nontarget = {0.7, 0.3, 0.2};
  MetricResult r = eer(s);
  CHECK(r.value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("EER edge distributions") {
  SUBCASE("perfect separation -> 0") {
    ScoreSet s;
    s.target = {0.8, 0.9, 0.95};
    s.nontarget = {0.1, 0.2, 0.3};
    CHECK(eer(s).value == doctest::Approx(0.0));
  }
  SUBCASE("inverted separation -> 1") {
    ScoreSet s;
    s.target = {0.1, 0.2};
    s.nontarget = {0.8, 0.9};
    CHECK(eer(s).value == doctest::Approx(1.0));
  }
  SUBCASE("identical distributions -> 0.5") {
    ScoreSet s;
    s.target = {0.2, 0.4, 0.6, 0.8};
    s.nontarget = {0.2, 0.4, 0.6, 0.8};
    CHECK(eer(s).value == doctest::Approx(0.5));
  }
  SUBCASE("empty sides are rejected") {
    ScoreSet s;
    s.target = {0.5};
    CHECK_THROWS(eer(s));
  }
}

TEST_CASE("EER and min C_det match brute force on random trials") {
  auto g = rng::stream(77, 0);
  for (int rep = 0; rep < 5; ++rep) {
    ScoreSet s;
    const std::size_t nt = 400 + rng::uniform_index(g, 200);
    const std::size_t nn = 1000 - nt;
    for (std::size_t i = 0; i < nt; ++i) s.target.push_back(0.3 + 0.5 * rng::normal(g));
    for (std::size_t i = 0; i < nn; ++i)
      s.nontarget.push_back(-0.3 + 0.5 * rng::normal(g));
    CHECK(std::abs(eer(s).value - brute_force_eer(s)) <= 1e-9);
    DcfParams p;
    CHECK(std::abs(min_dcf(s, p).value - brute_force_min_dcf(s, p)) <= 1e-9);
  }
}

TEST_CASE("detection cost point values") {
  // a single target above a single nontarget yields the extreme operating
  // points (P_miss,P_fa) = (0,1) at -inf and (1,0) at +inf
  ScoreSet s;
  s.target = {1.0};
  s.nontarget = {0.0};
  auto pts = det_points(s);
  REQUIRE(pts.size() >= 2);
  DcfParams p;
  auto dcf = [&](const OperatingPoint& op) {
    return p.c_miss * op.p_miss * p.p_target + p.c_fa * op.p_fa * (1.0 - p.p_target);
  };
  const auto& lo = pts.front();
  CHECK(lo.p_miss == 0.0);
  CHECK(lo.p_fa == 1.0);
  CHECK(dcf(lo) == doctest::Approx(0.9900).epsilon(1e-15));
  const auto& hi = pts.back();
  CHECK(hi.p_miss == 1.0);
  CHECK(hi.p_fa == 0.0);
  CHECK(dcf(hi) == doctest::Approx(0.0100).epsilon(1e-15));

  // thresholds ascend, P_miss is non-decreasing, P_fa non-increasing
  for (std::size_t i = 1; i < pts.size(); ++i) {
    CHECK(pts[i].threshold > pts[i - 1].threshold);
    CHECK(pts[i].p_miss >= pts[i - 1].p_miss);
    CHECK(pts[i].p_fa <= pts[i - 1].p_fa);
  }
  // min over that set is the separable optimum, 0
  CHECK(min_dcf(s).value == doctest::Approx(0.0));
}

TEST_CASE("EER is invariant under strictly increasing score transforms") {
  auto g = rng::stream(78, 0);
  ScoreSet s;
  for (int i = 0; i < 60; ++i) s.target.push_back(rng::normal(g) + 0.4);
  for (int i = 0; i < 80; ++i) s.nontarget.push_back(rng::normal(g) - 0.4);
  ScoreSet t;
  auto f = [](double x) { return std::tanh(x) * 3.0 + x / 7.0; };
  for (double v : s.target) t.target.push_back(f(v));
  for (double v : s.nontarget) t.nontarget.push_back(f(v));
  CHECK(eer(s).value == doctest::Approx(eer(t).value).epsilon(1e-9));
}

TEST_CASE("top-k accuracy") {
  // three rows whose true label ranks 1st, 3rd and 6th
  TensorD logits({3, 6});
  std::vector<int> labels = {0, 2, 5};
  double row0[6] = {9, 1, 2, 3, 4, 5};
  double row1[6] = {9, 8, 7, 1, 2, 3};
  double row2[6] = {9, 8, 7, 6, 5, 0};
  for (std::size_t j = 0; j < 6; ++j) {
    logits.at2(0, j) = row0[j];
    logits.at2(1, j) = row1[j];
    logits.at2(2, j) = row2[j];
  }
  CHECK(topk_accuracy(logits, labels, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(topk_accuracy(logits, labels, 3) == doctest::Approx(2.0 / 3.0));
  CHECK(topk_accuracy(logits, labels, 5) == doctest::Approx(2.0 / 3.0));
  CHECK(topk_accuracy(logits, labels, 6) == doctest::Approx(1.0));
  // monotone in k
  double prev = 0.0;
  for (std::size_t k = 1; k <= 6; ++k) {
    const double a = topk_accuracy(logits, labels, k);
    CHECK(a >= prev);
    prev = a;
  }
}

TEST_CASE("top-k tie break favors the lower class index") {
  TensorD logits({1, 3});
  logits.at2(0, 0) = 1.0;
  logits.at2(0, 1) = 1.0;
  logits.at2(0, 2) = 0.0;
  // class 1 ties with class 0; rank of label 1 with k=1 loses the tie
  CHECK(topk_accuracy(logits, {1}, 1) == doctest::Approx(0.0));
  CHECK(topk_accuracy(logits, {0}, 1) == doctest::Approx(1.0));
  CHECK(topk_accuracy(logits, {1}, 2) == doctest::Approx(1.0));
}
