// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Criterion 7 trains ~25 toy models and dominates the runtime
// (several minutes on one core).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "spk/checkpoint.hpp"
#include "spk/config.hpp"
#include "spk/eval.hpp"
#include "spk/features.hpp"
#include "spk/losses.hpp"
#include "spk/nn.hpp"
#include "spk/pipeline.hpp"
#include "spk/rng.hpp"

using namespace spk;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point t0 = clock::now();
  return std::chrono::duration<double>(clock::now() - t0).count();
}

// ---- criterion 1: gradient suite ----

void criterion1() {
  const double start = now_seconds();
  bool ok = true;
  std::ostringstream detail;
  for (loss::LossKind kind : {loss::LossKind::Softmax, loss::LossKind::ASoftmax,
                              loss::LossKind::AMSoftmax, loss::LossKind::LogisticMargin}) {
    const double tol = kind == loss::LossKind::Softmax ? 1e-6 : 1e-4;
    auto rep = cli::cmd_gradcheck(kind, 20, 1234);
    detail << loss::loss_kind_name(kind) << " worst " << rep.worst() << "  ";
    if (!(rep.max_rel_errors.size() == 20 && rep.worst() <= tol)) ok = false;
  }
  const double elapsed = now_seconds() - start;
  detail << "(" << elapsed << "s)";
  if (elapsed >= 60.0) ok = false;
  report(1, ok, "loss gradients vs finite differences: " + detail.str());
}

// ---- criterion 2: degenerate equivalences ----

void criterion2() {
  auto g = rng::stream(77, 0);
  const std::size_t B = 6, C = 8, d = 10;
  TensorD x({B, d});
  for (auto& v : x.v) v = rng::normal(g);
  loss::Head head;
  head.W = TensorD({C, d});
  for (auto& v : head.W.v) v = rng::normal(g);
  std::vector<int> labels(B);
  for (auto& l : labels) l = int(rng::uniform_index(g, C));

  loss::Head unit = head;
  for (std::size_t j = 0; j < C; ++j) {
    double n = 0.0;
    for (std::size_t i = 0; i < d; ++i) n += unit.W.at2(j, i) * unit.W.at2(j, i);
    n = std::sqrt(n);
    for (std::size_t i = 0; i < d; ++i) unit.W.at2(j, i) /= n;
  }
  TensorD xhat = x;
  for (std::size_t b = 0; b < B; ++b) {
    double n = 0.0;
    for (std::size_t i = 0; i < d; ++i) n += xhat.at2(b, i) * xhat.at2(b, i);
    n = std::sqrt(n);
    for (std::size_t i = 0; i < d; ++i) xhat.at2(b, i) /= n;
  }

  double worst = 0.0;

  {  // AM-Softmax(m=0, s=1) == softmax on cosines
    loss::LossConfig cfg;
    cfg.kind = loss::LossKind::AMSoftmax;
    cfg.margin = 0.0;
    cfg.scale = 1.0;
    loss::Head biased = unit;
    biased.bias.assign(C, 0.0);
    worst = std::max(worst, std::abs(loss::amsoftmax(x, labels, head, cfg).loss -
                                     loss::softmax_ce(xhat, labels, biased).loss));
  }
  {  // Logistic Margin(alpha=0) == softmax on normalized embeddings
    loss::LossConfig cfg;
    cfg.kind = loss::LossKind::LogisticMargin;
    cfg.alpha = 0.0;
    loss::Head biased = head;
    biased.bias.assign(C, 0.25);
    worst = std::max(worst, std::abs(loss::logistic_margin(x, labels, biased, cfg).loss -
                                     loss::softmax_ce(xhat, labels, biased).loss));
  }
  {  // A-Softmax(m=1) == softmax on |x| cos(theta)
    loss::LossConfig cfg;
    cfg.kind = loss::LossKind::ASoftmax;
    cfg.m = 1;
    loss::Head biased = unit;
    biased.bias.assign(C, 0.0);
    worst = std::max(worst, std::abs(loss::asoftmax(x, labels, head, cfg, 500).loss -
                                     loss::softmax_ce(x, labels, biased).loss));
  }
  report(2, worst <= 1e-12,
         "degenerate configs vs softmax, worst |diff| = " + std::to_string(worst));
}

// ---- criterion 3: feature shape + DFT oracle ----

void criterion3() {
  feat::FrameSpec spec;
  audio::Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(48240);
  auto g = rng::stream(3, 0);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * 740.0 * i / 16000.0) +
                   0.1 * rng::normal(g);
  TensorD s = feat::stft_amplitude(w, spec);
  bool ok = s.dim(0) == 300 && s.dim(1) == 257;

  const auto win = feat::hamming_window(400);
  double worst = 0.0;
  for (std::size_t t = 0; t < 300 && ok; t += 7) {
    std::vector<std::complex<double>> x(512, 0.0);
    for (std::size_t i = 0; i < 400; ++i) x[i] = w.samples[t * 160 + i] * win[i];
    for (std::size_t k = 0; k < 257; ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t n = 0; n < 512; ++n)
        acc += x[n] * std::polar(1.0, -2.0 * std::numbers::pi * double(k) * double(n) / 512.0);
      const double a = std::abs(acc);
      const double rel = std::abs(s.at2(t, k) - a) / std::max({a, s.at2(t, k), 1e-9});
      worst = std::max(worst, rel);
    }
  }
  ok = ok && worst <= 1e-6;
  report(3, ok,
         "48240 samples -> " + std::to_string(s.dim(0)) + "x" + std::to_string(s.dim(1)) +
             ", naive-DFT worst rel err " + std::to_string(worst));
}

// ---- criterion 4: reference topology shapes ----

void criterion4() {
  auto shapes = nn::shape_propagate(nn::resnet20_config());
  const std::vector<std::vector<std::size_t>> want = {
      {64, 150, 129}, {128, 75, 65}, {256, 38, 33}, {512, 19, 17}, {512, 1, 17}};
  bool ok = !shapes.empty() && shapes.back() == std::vector<std::size_t>{512};
  for (const auto& w : want)
    ok = ok && std::find(shapes.begin(), shapes.end(), w) != shapes.end();
  report(4, ok, "stage output sizes 150x129 / 75x65 / 38x33 / 19x17 / 1x17 / 512");
}

// ---- criterion 5: metric oracles ----

void criterion5() {
  auto g = rng::stream(55, 0);
  eval::ScoreSet s;
  for (int i = 0; i < 450; ++i) s.target.push_back(0.4 + 0.6 * rng::normal(g));
  for (int i = 0; i < 550; ++i) s.nontarget.push_back(-0.4 + 0.6 * rng::normal(g));

  // brute force over every candidate threshold
  auto count = [&](double t, double* pm, double* pf) {
    double miss = 0.0, fa = 0.0;
    for (double v : s.target)
      if (v < t) miss += 1.0;
    for (double v : s.nontarget)
      if (v >= t) fa += 1.0;
    *pm = miss / double(s.target.size());
    *pf = fa / double(s.nontarget.size());
  };
  std::vector<double> all;
  all.insert(all.end(), s.target.begin(), s.target.end());
  all.insert(all.end(), s.nontarget.begin(), s.nontarget.end());
  std::sort(all.begin(), all.end());
  std::vector<double> thr{-1e300};
  for (std::size_t i = 0; i + 1 < all.size(); ++i) thr.push_back(0.5 * (all[i] + all[i + 1]));
  thr.push_back(1e300);

  double bf_eer = -1.0, bf_dcf = 1e300;
  double prev_pm = 0.0, prev_pf = 1.0;
  for (double t : thr) {
    double pm, pf;
    count(t, &pm, &pf);
    bf_dcf = std::min(bf_dcf, pm * 0.01 + pf * 0.99);
    if (bf_eer < 0.0) {
      if (pm == pf) bf_eer = pm;
      else if (pm > pf) {
        const double d1 = prev_pm - prev_pf, d2 = pm - pf;
        const double lam = -d1 / (d2 - d1);
        bf_eer = prev_pm + lam * (pm - prev_pm);
      }
    }
    prev_pm = pm;
    prev_pf = pf;
  }

  const double e = eval::eer(s).value;
  const double m = eval::min_dcf(s).value;
  bool ok = std::abs(e - bf_eer) <= 1e-9 && std::abs(m - bf_dcf) <= 1e-9;

  // Eq. 7 point checks at the extreme operating points
  eval::ScoreSet two;
  two.target = {1.0};
  two.nontarget = {0.0};
  auto pts = eval::det_points(two);
  const auto dcf_at = [](const eval::OperatingPoint& p) {
    return p.p_miss * 0.01 + p.p_fa * 0.99;
  };
  ok = ok && dcf_at(pts.front()) == 0.9900 && dcf_at(pts.back()) == 0.0100;

  report(5, ok,
         "EER/minDCF vs brute force on 1000 trials (eer " + std::to_string(e) +
             "), point checks 0.0100/0.9900");
}

// ---- criterion 6: augmentation oracles ----

void criterion6() {
  auto g = rng::stream(66, 0);
  audio::Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(503);
  for (auto& x : w.samples) x = rng::normal(g);

  bool ok = true;
  for (int c = 0; c < 10000 && ok; ++c) {
    const std::size_t offset = rng::uniform_index(g, w.size());
    const std::size_t length = 1 + rng::uniform_index(g, 1200);
    audio::Waveform crop = audio::repeat_extend_crop(w, offset, length);
    for (std::size_t i = 0; i < length; ++i)
      if (crop.samples[i] != w.samples[(offset + i) % w.size()]) ok = false;
    audio::Waveform rr = audio::time_reverse(audio::time_reverse(crop));
    if (!(rr.samples == crop.samples)) ok = false;
  }
  report(6, ok, "time-reverse involution + repeat-extension modulo oracle, 10^4 cases");
}

// ---- criterion 7: toy end-to-end trends ----

cli::RunConfig toy_config(std::uint64_t seed, std::int64_t iterations) {
  cli::RunConfig cfg;
  cfg.crop_len = 2480;
  cfg.win_len = 200;
  cfg.hop = 80;
  cfg.fft_size = 256;
  cfg.encoder = nn::small_encoder_config(32, 29, 129);
  cfg.batch_size = 16;
  cfg.iterations = iterations;
  cfg.schedule = {0.02, 0.75, 8, 150};
  cfg.n_crops = 10;
  cfg.seed = seed;
  return cfg;
}

double test_eer(const cli::Checkpoint& ckpt, const cli::Manifest& man) {
  auto store = cli::cmd_embed(ckpt, man.subset("test"), 10, ckpt.config.test_augment);
  auto trials = cli::make_trials(man, "test");
  return cli::cmd_score_trials(store, trials).eer;
}

void criterion7(const std::string& dir) {
  cli::SyntheticSpec spec;  // 20 speakers x 10 utterances
  cli::Manifest man = cli::synth_data(spec, dir + "/corpus", 11);

  // (a) softmax reaches train Top-1 >= 95% within 5 minutes on one core
  bool ok_a = false;
  double top1 = 0.0, elapsed = 0.0;
  {
    const double start = now_seconds();
    cli::Checkpoint ckpt = cli::cmd_train(toy_config(7, 600), man, std::nullopt);
    auto rep = cli::cmd_evaluate_ident(ckpt, man.subset("train"), 5, true);
    elapsed = now_seconds() - start;
    top1 = rep.top1;
    ok_a = top1 >= 0.95 && elapsed < 300.0;
  }
  report(7, ok_a,
         "(a) softmax toy training: train Top-1 " + std::to_string(top1) + " in " +
             std::to_string(elapsed) + "s");

  // (b) augmentation Both >= None on held-out Top-1, and
  // (c) warm-started AM-Softmax / Logistic Margin EER <= softmax baseline
  int b_wins = 0, c_am_wins = 0, c_lm_wins = 0;
  std::ostringstream btrace, ctrace;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cli::RunConfig both_cfg = toy_config(seed, 300);
    cli::Checkpoint both = cli::cmd_train(both_cfg, man, std::nullopt);
    const double both_top1 = cli::cmd_evaluate_ident(both, man.subset("test"), 10, true).top1;

    cli::RunConfig none_cfg = both_cfg;
    none_cfg.train_augment = false;
    none_cfg.test_augment = false;
    cli::Checkpoint none = cli::cmd_train(none_cfg, man, std::nullopt);
    const double none_top1 =
        cli::cmd_evaluate_ident(none, man.subset("test"), 10, false).top1;
    if (both_top1 >= none_top1) ++b_wins;
    btrace << both_top1 << "/" << none_top1 << " ";

    const double base_eer = test_eer(both, man);
    cli::RunConfig am_cfg = both_cfg;
    am_cfg.iterations = 200;
    am_cfg.loss.kind = loss::LossKind::AMSoftmax;
    const double am_eer = test_eer(cli::cmd_train(am_cfg, man, both), man);
    cli::RunConfig lm_cfg = am_cfg;
    lm_cfg.loss.kind = loss::LossKind::LogisticMargin;
    const double lm_eer = test_eer(cli::cmd_train(lm_cfg, man, both), man);
    if (am_eer <= base_eer) ++c_am_wins;
    if (lm_eer <= base_eer) ++c_lm_wins;
    ctrace << base_eer << ">=" << am_eer << "," << lm_eer << " ";
  }
  report(7, b_wins >= 4,
         "(b) augmentation Both >= None in " + std::to_string(b_wins) +
             "/5 seeds (both/none: " + btrace.str() + ")");
  report(7, c_am_wins >= 4 && c_lm_wins >= 4,
         "(c) warm-started margin EER <= softmax in AM " + std::to_string(c_am_wins) +
             "/5, LM " + std::to_string(c_lm_wins) + "/5 seeds (" + ctrace.str() + ")");
}

// ---- criterion 8: determinism ----

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void criterion8(const std::string& dir) {
  cli::SyntheticSpec spec;
  spec.n_speakers = 4;
  spec.utts_per_speaker = 10;
  spec.min_duration = 0.4;
  spec.max_duration = 0.7;
  cli::Manifest man = cli::synth_data(spec, dir + "/det_corpus", 21);

  cli::RunConfig cfg = toy_config(3, 25);
  cfg.crop_len = 1040;
  cfg.encoder = nn::small_encoder_config(16, 11, 129);
  cfg.batch_size = 8;

  bool ok = true;
  for (int r = 0; r < 2; ++r) {
    cli::Checkpoint ckpt = cli::cmd_train(cfg, man, std::nullopt);
    cli::save_checkpoint(dir + "/det_" + std::to_string(r) + ".ckpt", ckpt);
    auto store = cli::cmd_embed(ckpt, man.subset("val"), 3, true);
    cli::save_store(dir + "/det_" + std::to_string(r) + ".emb", store);
    cli::cmd_sweep(cfg, man, cli::SweepAxis::Dropout, dir + "/det_sweep_" + std::to_string(r));
  }
  ok = ok && slurp(dir + "/det_0.ckpt") == slurp(dir + "/det_1.ckpt");
  ok = ok && slurp(dir + "/det_0.emb") == slurp(dir + "/det_1.emb");
  ok = ok && slurp(dir + "/det_0.emb.ids") == slurp(dir + "/det_1.emb.ids");
  ok = ok && slurp(dir + "/det_sweep_0/sweep.csv") == slurp(dir + "/det_sweep_1/sweep.csv");
  report(8, ok, "bit-identical checkpoints, embedding stores and sweep CSVs across reruns");
}

}  // namespace

int main() {
  const std::string dir =
      (fs::temp_directory_path() / ("spk_acceptance_" + std::to_string(std::random_device{}())))
          .string();
  fs::create_directories(dir);

  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7(dir);
  criterion8(dir);

  std::error_code ec;
  fs::remove_all(dir, ec);
  std::printf("%s\n", failures == 0 ? "ALL CRITERIA PASS" : "CRITERIA FAILED");
  return failures == 0 ? 0 : 1;
}
