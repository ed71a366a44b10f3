#include "spk/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

namespace spk::cli {

namespace fs = std::filesystem;

namespace {

// Disjoint stream tags so every random decision has its own (seed, index)
// lane and parallel order cannot matter.
enum StreamTag : std::uint64_t {
  kEncoderInit = 1,
  kHeadInit = 2,
  kBatchPick = 3,
  kExample = 4,
  kValidation = 5,
  kSynthSpeaker = 6,
  kSynthUtterance = 7,
  kEmbed = 8,
};

rng::Stream tagged_stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t n) {
  return rng::stream(seed, (tag << 56) ^ n);
}

audio::Waveform load_checked(const std::string& path, int expected_rate) {
  audio::Waveform w = audio::load_wav(path);
  if (w.sample_rate != expected_rate)
    throw audio::AudioError(audio::AudioErrc::SampleRateMismatch,
                            path + ": sample rate " + std::to_string(w.sample_rate) +
                                " != configured " + std::to_string(expected_rate));
  return w;
}

bool is_margin_loss(loss::LossKind k) { return k != loss::LossKind::Softmax; }

bool loss_has_bias(loss::LossKind k) {
  return k == loss::LossKind::Softmax || k == loss::LossKind::LogisticMargin;
}

loss::Head head_from_params(const nn::ParamSet<float>& params, bool has_bias) {
  loss::Head head;
  head.W = tensor_cast<double>(params.tensors[params.index_of("head.w")]);
  if (has_bias) {
    const auto& b = params.tensors[params.index_of("head.b")];
    head.bias.assign(b.v.begin(), b.v.end());
  }
  return head;
}

std::vector<double> scores_under(loss::LossKind kind, const loss::Head& head,
                                 const std::vector<double>& emb) {
  const std::size_t C = head.classes(), d = head.dim();
  if (emb.size() != d) throw std::invalid_argument("embedding dim mismatch with head");
  std::vector<double> scores(C, 0.0);
  if (kind == loss::LossKind::Softmax) {
    for (std::size_t j = 0; j < C; ++j) {
      double s = head.bias.empty() ? 0.0 : head.bias[j];
      for (std::size_t i = 0; i < d; ++i) s += head.W.at2(j, i) * emb[i];
      scores[j] = s;
    }
    return scores;
  }
  double n2 = 0.0;
  for (double x : emb) n2 += x * x;
  const double norm = std::sqrt(n2);
  if (norm == 0.0) throw std::domain_error("zero-norm embedding");
  if (kind == loss::LossKind::LogisticMargin) {
    for (std::size_t j = 0; j < C; ++j) {
      double s = head.bias[j];
      for (std::size_t i = 0; i < d; ++i) s += head.W.at2(j, i) * emb[i] / norm;
      scores[j] = s;
    }
    return scores;
  }
  // cosine for the normalized-weight heads
  for (std::size_t j = 0; j < C; ++j) {
    double dot = 0.0, wn2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      dot += head.W.at2(j, i) * emb[i];
      wn2 += head.W.at2(j, i) * head.W.at2(j, i);
    }
    scores[j] = dot / (std::sqrt(wn2) * norm);
  }
  return scores;
}

// crop -> normalized spectrogram -> [1,T,F] float tensor
TensorF featurize(const audio::Waveform& crop, const feat::FrameSpec& spec) {
  const TensorD m = feat::normalize_per_bin(feat::stft_amplitude(crop, spec));
  TensorF input = tensor_cast<float>(m);
  input.shape = {1, m.dim(0), m.dim(1)};
  return input;
}

}  // namespace

// -------- synthetic corpus --------

Manifest synth_data(const SyntheticSpec& spec, const std::string& out_dir,
                    std::uint64_t seed) {
  if (spec.n_speakers < 2) throw std::invalid_argument("synth_data: need >= 2 speakers");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir))
    throw std::runtime_error("cannot create output directory: " + out_dir);

  const double nyquist = spec.sample_rate / 2.0;
  Manifest manifest;
  for (int s = 0; s < spec.n_speakers; ++s) {
    auto sg = tagged_stream(seed, kSynthSpeaker, std::uint64_t(s));
    double formants[3];
    for (double& f : formants)
      f = 300.0 + rng::uniform01(sg) * std::min(3500.0, nyquist - 500.0);
    manifest.speaker_names.push_back("spk" + std::to_string(s));

    for (int u = 0; u < spec.utts_per_speaker; ++u) {
      const std::uint64_t uidx = std::uint64_t(s) * spec.utts_per_speaker + u;
      auto ug = tagged_stream(seed, kSynthUtterance, uidx);
      const double dur = spec.min_duration +
                         rng::uniform01(ug) * (spec.max_duration - spec.min_duration);
      const std::size_t n = std::size_t(dur * spec.sample_rate);
      audio::Waveform w;
      w.sample_rate = spec.sample_rate;
      w.samples.assign(n, 0.0);
      double amp[3], phase[3];
      double amp_sum = 0.0;
      for (int k = 0; k < 3; ++k) {
        amp[k] = 0.5 + 0.5 * rng::uniform01(ug);
        phase[k] = 2.0 * std::numbers::pi * rng::uniform01(ug);
        amp_sum += amp[k];
      }
      // slow amplitude modulation gives each formant bin temporal structure
      // that survives per-bin normalization of the spectrogram
      const double mod_rate = 4.0 + 4.0 * rng::uniform01(ug);
      const double mod_phase = 2.0 * std::numbers::pi * rng::uniform01(ug);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = double(i) / spec.sample_rate;
        const double env =
            0.55 + 0.45 * std::sin(2.0 * std::numbers::pi * mod_rate * t + mod_phase);
        double x = 0.0;
        for (int k = 0; k < 3; ++k)
          x += amp[k] * std::sin(2.0 * std::numbers::pi * formants[k] * t + phase[k]);
        w.samples[i] = 0.7 * env * x / amp_sum;
      }
      for (std::size_t i = 0; i < n; ++i)
        w.samples[i] += spec.noise_level * rng::normal(ug);

      const std::string path =
          (fs::path(out_dir) / ("spk" + std::to_string(s) + "_utt" +
                                std::to_string(u) + ".wav"))
              .string();
      audio::save_wav(path, w);
      const std::string split = u % 5 == 3 ? "val" : (u % 5 == 4 ? "test" : "train");
      manifest.records.push_back({path, s, split});
    }
  }
  save_manifest((fs::path(out_dir) / "manifest.csv").string(), manifest);
  return manifest;
}

// -------- training --------

Checkpoint cmd_train(const RunConfig& cfg, const Manifest& manifest,
                     const std::optional<Checkpoint>& warm_start,
                     bool allow_cold_start, std::ostream* log) {
  if (is_margin_loss(cfg.loss.kind) && !warm_start && !allow_cold_start)
    throw std::runtime_error(
        loss::loss_kind_name(cfg.loss.kind) +
        " training requires a softmax warm start (--allow-cold-start to override)");

  const auto train_set = manifest.subset("train");
  const auto val_set = manifest.subset("val");
  if (train_set.empty()) throw std::runtime_error("manifest has no train split");
  const std::size_t n_classes = manifest.n_speakers();
  const std::size_t d = cfg.encoder.embedding_dim;
  const bool has_bias = loss_has_bias(cfg.loss.kind);
  const feat::FrameSpec spec = cfg.frame_spec();
  const audio::AugmentPolicy policy = cfg.train_policy();

  std::vector<audio::Waveform> train_wavs, val_wavs;
  for (const auto& r : train_set) train_wavs.push_back(load_checked(r.path, cfg.sample_rate));
  for (const auto& r : val_set) val_wavs.push_back(load_checked(r.path, cfg.sample_rate));

  // parameters: encoder stack plus the classification head
  auto eg = tagged_stream(cfg.seed, kEncoderInit, 0);
  nn::ParamSet<float> params = nn::init_params<float>(cfg.encoder, eg);
  auto hg = tagged_stream(cfg.seed, kHeadInit, 0);
  {
    auto& hw = params.add("head.w", {n_classes, d});
    nn::detail::xavier_uniform(hw, d, n_classes, hg);
    if (has_bias) params.add("head.b", {n_classes});
  }

  if (warm_start) {
    const Checkpoint& warm = *warm_start;
    if (!(warm.config.encoder == cfg.encoder))
      throw std::runtime_error("warm-start checkpoint encoder config does not match");
    if (warm.n_classes != n_classes)
      throw std::runtime_error("warm-start checkpoint class count does not match");
    for (std::size_t i = 0; i < warm.params.names.size(); ++i) {
      const std::string& name = warm.params.names[i];
      if (name.rfind("head.", 0) == 0) continue;  // heads are re-initialized
      params.tensors[params.index_of(name)] = warm.params.tensors[i];
    }
    // Warm-starting logistic margin from an AM-Softmax head: keep the learned
    // directions, scale them to s, start biases at zero.
    if (cfg.loss.kind == loss::LossKind::LogisticMargin &&
        warm.config.loss.kind == loss::LossKind::AMSoftmax) {
      const auto& src = warm.params.tensors[warm.params.index_of("head.w")];
      auto& dst = params.tensors[params.index_of("head.w")];
      for (std::size_t j = 0; j < n_classes; ++j) {
        double n2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) n2 += double(src.at2(j, i)) * src.at2(j, i);
        const double scale = n2 > 0.0 ? warm.config.loss.scale / std::sqrt(n2) : 0.0;
        for (std::size_t i = 0; i < d; ++i)
          dst.at2(j, i) = static_cast<float>(src.at2(j, i) * scale);
      }
    }
  }

  nn::OptimizerState<float> state;
  state.momentum = cfg.momentum;
  state.weight_decay = cfg.weight_decay;
  state.velocity = params.zeros_like();

  const std::size_t B = cfg.batch_size;
  std::vector<int> labels(B);
  std::vector<std::size_t> picks(B);
  std::vector<nn::ForwardCache<float>> caches(B);

  auto validate = [&]() -> double {
    if (val_set.empty()) return -1.0;
    std::size_t hits = 0;
    const loss::Head head = head_from_params(params, has_bias);
    const audio::AugmentPolicy vp = cfg.test_policy();
    for (std::size_t i = 0; i < val_set.size(); ++i) {
      auto vg = tagged_stream(cfg.seed, kValidation, i);
      const auto emb = eval::extract_embedding(cfg.encoder, params, val_wavs[i], spec,
                                               vp, 1, vg);
      const auto scores = scores_under(cfg.loss.kind, head, emb);
      const std::size_t best =
          std::size_t(std::max_element(scores.begin(), scores.end()) - scores.begin());
      if (int(best) == val_set[i].speaker) ++hits;
    }
    return double(hits) / double(val_set.size());
  };

  for (std::int64_t iter = 0; iter < cfg.iterations; ++iter) {
    state.lr = nn::lr_at(cfg.schedule, iter);

    auto bg = tagged_stream(cfg.seed, kBatchPick, std::uint64_t(iter));
    for (std::size_t b = 0; b < B; ++b) {
      picks[b] = rng::uniform_index(bg, train_set.size());
      labels[b] = train_set[picks[b]].speaker;
    }

    TensorD batch_emb({B, d});
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t b = 0; b < std::ptrdiff_t(B); ++b) {
      auto xg = tagged_stream(cfg.seed, kExample,
                              std::uint64_t(iter) * B + std::uint64_t(b));
      const audio::Waveform crop =
          audio::sample_training_crop(train_wavs[picks[std::size_t(b)]], policy, xg);
      const TensorF input = featurize(crop, spec);
      const TensorF emb = nn::forward(cfg.encoder, params, input, /*train=*/true, &xg,
                                      &caches[std::size_t(b)]);
      for (std::size_t i = 0; i < d; ++i) batch_emb.at2(std::size_t(b), i) = emb[i];
    }

    const loss::Head head = head_from_params(params, has_bias);
    const loss::LossOutput lo =
        loss::loss_forward(batch_emb, labels, head, cfg.loss, iter);
    if (!std::isfinite(lo.loss)) throw TrainDivergence(iter);

    nn::ParamSet<float> grads = params.zeros_like();
    {
      auto& gw = grads.tensors[grads.index_of("head.w")];
      for (std::size_t i = 0; i < gw.size(); ++i)
        gw[i] = static_cast<float>(lo.grad_W[i]);
      if (has_bias) {
        auto& gb = grads.tensors[grads.index_of("head.b")];
        for (std::size_t i = 0; i < gb.size(); ++i)
          gb[i] = static_cast<float>(lo.grad_c[i]);
      }
    }

    std::vector<nn::ParamSet<float>> slot_grads(B);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t b = 0; b < std::ptrdiff_t(B); ++b) {
      slot_grads[std::size_t(b)] = params.zeros_like();
      TensorF gout({d});
      for (std::size_t i = 0; i < d; ++i)
        gout[i] = static_cast<float>(lo.grad_x.at2(std::size_t(b), i));
      nn::backward(cfg.encoder, params, caches[std::size_t(b)], gout,
                   slot_grads[std::size_t(b)]);
    }
    // reduce in fixed slot order for bit-reproducibility
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < grads.tensors.size(); ++t)
        for (std::size_t i = 0; i < grads.tensors[t].size(); ++i)
          grads.tensors[t][i] += slot_grads[b].tensors[t][i];

    nn::sgd_step(params, grads, state);

    const bool step_end =
        (iter + 1) % cfg.schedule.iters_per_step == 0 || iter + 1 == cfg.iterations;
    if (step_end && log) {
      *log << "iter " << iter + 1 << " lr " << state.lr << " loss " << lo.loss
           << " val_top1 " << validate() << "\n";
    }
  }

  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.n_classes = n_classes;
  ckpt.iteration = cfg.iterations;
  ckpt.params = std::move(params);
  ckpt.velocity = std::move(state.velocity);
  return ckpt;
}

// -------- embeddings / scoring --------

std::size_t EmbeddingStore::find(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == id) return i;
  throw std::out_of_range("id not in embedding store: " + id);
}

void save_store(const std::string& path, const EmbeddingStore& store) {
  feat::write_matrix(path, store.vectors);
  std::ofstream f(path + ".ids");
  if (!f) throw std::runtime_error("cannot create id sidecar: " + path + ".ids");
  for (const auto& id : store.ids) f << id << "\n";
}

EmbeddingStore load_store(const std::string& path) {
  EmbeddingStore store;
  store.vectors = feat::read_matrix(path);
  std::ifstream f(path + ".ids");
  if (!f) throw std::runtime_error("cannot open id sidecar: " + path + ".ids");
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) store.ids.push_back(line);
  if (store.ids.size() != store.vectors.dim(0))
    throw std::runtime_error("embedding store / sidecar row count mismatch");
  return store;
}

EmbeddingStore cmd_embed(const Checkpoint& ckpt,
                         const std::vector<ManifestRecord>& subset,
                         std::size_t n_crops, bool test_augment) {
  const RunConfig& cfg = ckpt.config;
  const feat::FrameSpec spec = cfg.frame_spec();
  audio::AugmentPolicy policy = cfg.test_policy();
  policy.enabled = test_augment;

  EmbeddingStore store;
  store.ids.reserve(subset.size());
  for (const auto& r : subset) store.ids.push_back(r.path);
  store.vectors = TensorD({subset.size(), cfg.encoder.embedding_dim});

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(subset.size()); ++i) {
    const audio::Waveform w =
        load_checked(subset[std::size_t(i)].path, cfg.sample_rate);
    auto g = tagged_stream(cfg.seed, kEmbed, std::uint64_t(i));
    const auto emb = eval::extract_embedding(cfg.encoder, ckpt.params, w, spec, policy,
                                             n_crops, g);
    for (std::size_t j = 0; j < emb.size(); ++j)
      store.vectors.at2(std::size_t(i), j) = emb[j];
  }
  return store;
}

std::vector<Trial> load_trials(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open trial list: " + path);
  std::vector<Trial> trials;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream iss(line);
    int label;
    Trial t;
    if (!(iss >> label >> t.enroll >> t.test) || (label != 0 && label != 1))
      throw std::runtime_error("bad trial line: " + line);
    t.target = label == 1;
    trials.push_back(std::move(t));
  }
  return trials;
}

void save_trials(const std::string& path, const std::vector<Trial>& trials) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot create trial list: " + path);
  for (const auto& t : trials)
    f << (t.target ? 1 : 0) << " " << t.enroll << " " << t.test << "\n";
}

std::vector<Trial> make_trials(const Manifest& manifest, const std::string& split) {
  const auto subset = manifest.subset(split);
  std::vector<Trial> trials;
  for (std::size_t i = 0; i < subset.size(); ++i)
    for (std::size_t j = i + 1; j < subset.size(); ++j)
      trials.push_back(
          {subset[i].speaker == subset[j].speaker, subset[i].path, subset[j].path});
  return trials;
}

ScoreReport cmd_score_trials(const EmbeddingStore& store,
                             const std::vector<Trial>& trials) {
  ScoreReport report;
  eval::ScoreSet set;
  const std::size_t dim = store.vectors.dim(1);
  for (const auto& t : trials) {
    const std::size_t a = store.find(t.enroll), b = store.find(t.test);
    std::vector<double> va(dim), vb(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      va[i] = store.vectors.at2(a, i);
      vb[i] = store.vectors.at2(b, i);
    }
    const double s = eval::cosine_score(va, vb);
    report.scores.push_back(s);
    (t.target ? set.target : set.nontarget).push_back(s);
  }
  const auto e = eval::eer(set);
  const auto c = eval::min_dcf(set);
  report.eer = e.value;
  report.eer_threshold = e.threshold;
  report.min_dcf = c.value;
  report.min_dcf_threshold = c.threshold;
  return report;
}

void save_scores(const std::string& path, const std::vector<Trial>& trials,
                 const std::vector<double>& scores) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot create scores file: " + path);
  for (std::size_t i = 0; i < trials.size(); ++i)
    f << trials[i].enroll << " " << trials[i].test << " " << format_double(scores[i])
      << "\n";
}

// -------- identification --------

std::vector<double> head_scores(const Checkpoint& ckpt, const std::vector<double>& emb) {
  const loss::Head head =
      head_from_params(ckpt.params, loss_has_bias(ckpt.config.loss.kind));
  return scores_under(ckpt.config.loss.kind, head, emb);
}

IdentReport cmd_evaluate_ident(const Checkpoint& ckpt,
                               const std::vector<ManifestRecord>& subset,
                               std::size_t n_crops, bool test_augment) {
  if (subset.empty()) throw std::runtime_error("evaluate-ident: empty subset");
  const EmbeddingStore store = cmd_embed(ckpt, subset, n_crops, test_augment);
  const std::size_t C = ckpt.n_classes;
  TensorD logits({subset.size(), C});
  std::vector<int> labels(subset.size());
  for (std::size_t i = 0; i < subset.size(); ++i) {
    std::vector<double> emb(store.vectors.dim(1));
    for (std::size_t j = 0; j < emb.size(); ++j) emb[j] = store.vectors.at2(i, j);
    const auto scores = head_scores(ckpt, emb);
    for (std::size_t j = 0; j < C; ++j) logits.at2(i, j) = scores[j];
    labels[i] = subset[i].speaker;
  }
  IdentReport r;
  r.top1 = eval::topk_accuracy(logits, labels, 1);
  r.top5 = eval::topk_accuracy(logits, labels, std::min<std::size_t>(5, C));
  return r;
}

// -------- gradient checking --------

double GradCheckReport::worst() const {
  double w = 0.0;
  for (double e : max_rel_errors) w = std::max(w, e);
  return w;
}

GradCheckReport cmd_gradcheck(loss::LossKind kind, int trials, std::uint64_t seed) {
  GradCheckReport report{kind, {}};
  for (int t = 0; t < trials; ++t) {
    auto g = rng::stream(seed, std::uint64_t(t));
    const std::size_t C = 2 + rng::uniform_index(g, 9);   // [2,10]
    const std::size_t d = 2 + rng::uniform_index(g, 15);  // [2,16]
    const std::size_t B = 1 + rng::uniform_index(g, 4);
    TensorD x({B, d});
    for (auto& v : x.v) v = rng::normal(g);
    loss::Head head;
    head.W = TensorD({C, d});
    for (auto& v : head.W.v) v = rng::normal(g);
    if (loss_has_bias(kind))
      for (std::size_t j = 0; j < C; ++j) head.bias.push_back(0.1 * rng::normal(g));
    std::vector<int> labels(B);
    for (auto& y : labels) y = int(rng::uniform_index(g, C));
    loss::LossConfig cfg;
    cfg.kind = kind;
    const std::int64_t iter = std::int64_t(rng::uniform_index(g, 2000));
    report.max_rel_errors.push_back(loss::grad_check(x, labels, head, cfg, iter));
  }
  return report;
}

// -------- sweep --------

SweepAxis sweep_axis_from_name(const std::string& name) {
  if (name == "dim") return SweepAxis::Dim;
  if (name == "loss") return SweepAxis::Loss;
  if (name == "dropout") return SweepAxis::Dropout;
  if (name == "augment") return SweepAxis::Augment;
  throw std::invalid_argument("unknown sweep axis: " + name);
}

namespace {

void set_embedding_dim(RunConfig& cfg, std::size_t dim) {
  cfg.encoder.embedding_dim = dim;
  for (auto& l : cfg.encoder.layers)
    if (auto* dense = std::get_if<nn::Dense>(&l)) dense->out_dim = dim;
}

void set_dropout(RunConfig& cfg, double p) {
  auto& layers = cfg.encoder.layers;
  layers.erase(std::remove_if(layers.begin(), layers.end(),
                              [](const nn::LayerConfig& l) {
                                return std::holds_alternative<nn::Dropout>(l);
                              }),
               layers.end());
  if (p > 0.0) {
    // before the final dense layer
    for (std::size_t i = layers.size(); i-- > 0;) {
      if (std::holds_alternative<nn::Dense>(layers[i])) {
        layers.insert(layers.begin() + std::ptrdiff_t(i), nn::Dropout{p});
        return;
      }
    }
  }
}

struct SweepCell {
  std::string axis_value;
  RunConfig cfg;
  bool needs_warm = false;
};

std::vector<SweepCell> sweep_cells(const RunConfig& base, SweepAxis axis) {
  std::vector<SweepCell> cells;
  switch (axis) {
    case SweepAxis::Dim:
      for (std::size_t dim : {64u, 128u, 256u, 512u}) {
        SweepCell c{std::to_string(dim), base, false};
        set_embedding_dim(c.cfg, dim);
        cells.push_back(std::move(c));
      }
      break;
    case SweepAxis::Loss:
      for (auto kind : {loss::LossKind::Softmax, loss::LossKind::ASoftmax,
                        loss::LossKind::AMSoftmax, loss::LossKind::LogisticMargin}) {
        SweepCell c{loss::loss_kind_name(kind), base, kind != loss::LossKind::Softmax};
        c.cfg.loss.kind = kind;
        cells.push_back(std::move(c));
      }
      break;
    case SweepAxis::Dropout:
      for (double p : {0.0, 0.5}) {
        SweepCell c{p == 0.0 ? "none" : "0.5", base, false};
        set_dropout(c.cfg, p);
        cells.push_back(std::move(c));
      }
      break;
    case SweepAxis::Augment:
      for (const char* stage : {"none", "testing", "training", "both"}) {
        SweepCell c{stage, base, false};
        const std::string s = stage;
        c.cfg.train_augment = s == "training" || s == "both";
        c.cfg.test_augment = s == "testing" || s == "both";
        cells.push_back(std::move(c));
      }
      break;
  }
  return cells;
}

SweepRow run_cell(const SweepCell& cell, const Manifest& manifest,
                  const std::optional<Checkpoint>& warm, const std::string& cell_dir) {
  SweepRow row{cell.axis_value, false, "", 0, 0, 0, 0};
  try {
    fs::create_directories(cell_dir);
    const Checkpoint ckpt = cmd_train(cell.cfg, manifest, warm);
    save_checkpoint((fs::path(cell_dir) / "checkpoint.ckpt").string(), ckpt);
    const auto test_set = manifest.subset("test");
    const auto ident =
        cmd_evaluate_ident(ckpt, test_set, cell.cfg.n_crops, cell.cfg.test_augment);
    const EmbeddingStore store =
        cmd_embed(ckpt, test_set, cell.cfg.n_crops, cell.cfg.test_augment);
    const auto trials = make_trials(manifest, "test");
    const ScoreReport score = cmd_score_trials(store, trials);
    row.ok = true;
    row.top1 = ident.top1;
    row.top5 = ident.top5;
    row.eer = score.eer;
    row.min_dcf = score.min_dcf;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

}  // namespace

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream o;
  o << "axis_value,top1,top5,eer,min_dcf\n";
  for (const auto& r : rows) {
    if (r.ok)
      o << r.axis_value << "," << format_double(r.top1) << "," << format_double(r.top5)
        << "," << format_double(r.eer) << "," << format_double(r.min_dcf) << "\n";
    else
      o << r.axis_value << ",error: " << r.error << ",,,\n";
  }
  return o.str();
}

std::vector<SweepRow> cmd_sweep(const RunConfig& base, const Manifest& manifest,
                                SweepAxis axis, const std::string& out_dir,
                                bool parallel_cells, std::ostream* log) {
  fs::create_directories(out_dir);
  const auto cells = sweep_cells(base, axis);
  std::vector<SweepRow> rows(cells.size());

  // Margin-loss cells warm-start from the softmax cell, so train that first.
  std::optional<Checkpoint> softmax_warm;
  if (axis == SweepAxis::Loss) {
    rows[0] = run_cell(cells[0], manifest, std::nullopt,
                       (fs::path(out_dir) / ("cell_" + cells[0].axis_value)).string());
    if (rows[0].ok)
      softmax_warm = load_checkpoint(
          (fs::path(out_dir) / ("cell_" + cells[0].axis_value) / "checkpoint.ckpt")
              .string());
  }

  auto run_one = [&](std::size_t i) {
    if (axis == SweepAxis::Loss && i == 0) return;  // already done
    const auto& cell = cells[i];
    const std::string cell_dir =
        (fs::path(out_dir) / ("cell_" + cell.axis_value)).string();
    rows[i] = run_cell(cell, manifest, cell.needs_warm ? softmax_warm : std::nullopt,
                       cell_dir);
  };

  if (parallel_cells) {
    std::vector<std::thread> workers;
    for (std::size_t i = 0; i < cells.size(); ++i) workers.emplace_back(run_one, i);
    for (auto& w : workers) w.join();
  } else {
    for (std::size_t i = 0; i < cells.size(); ++i) run_one(i);
  }

  const std::string csv = sweep_csv(rows);
  std::ofstream f(fs::path(out_dir) / "sweep.csv");
  f << csv;
  if (log) *log << csv;
  return rows;
}

}  // namespace spk::cli
