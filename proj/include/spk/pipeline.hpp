#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spk/checkpoint.hpp"
#include "spk/config.hpp"
#include "spk/eval.hpp"

namespace spk::cli {

// -------- synthetic corpus --------

// Desk-scale stand-in for a real corpus: each speaker is a random tuple of
// "formant" sinusoid frequencies; utterances are those sinusoids with random
// phases/amplitudes plus white noise.
struct SyntheticSpec {
  int n_speakers = 20;
  int utts_per_speaker = 10;
  double min_duration = 1.0;  // seconds
  double max_duration = 2.0;
  int sample_rate = 16000;
  double noise_level = 0.05;
};

Manifest synth_data(const SyntheticSpec& spec, const std::string& out_dir,
                    std::uint64_t seed);

// -------- training --------

struct TrainDivergence : std::runtime_error {
  explicit TrainDivergence(std::int64_t it)
      : std::runtime_error("training diverged (loss is not finite) at iteration " +
                           std::to_string(it)),
        iteration(it) {}
  std::int64_t iteration;
};

// SGD loop over the manifest's train split. Margin losses require a
// warm-start checkpoint unless allow_cold_start is set; the encoder is
// copied from the warm checkpoint and the head re-initialized (Xavier).
// Logs one line of loss / validation Top-1 per learning-rate step.
Checkpoint cmd_train(const RunConfig& cfg, const Manifest& manifest,
                     const std::optional<Checkpoint>& warm_start,
                     bool allow_cold_start = false, std::ostream* log = nullptr);

// -------- embeddings / scoring --------

struct EmbeddingStore {
  std::vector<std::string> ids;
  TensorD vectors;  // N x d

  std::size_t find(const std::string& id) const;
};

// Binary matrix (golden-file layout) at `path` plus an id sidecar `path.ids`.
void save_store(const std::string& path, const EmbeddingStore& store);
EmbeddingStore load_store(const std::string& path);

// Multi-crop embeddings of every record in `subset`; deterministic per seed.
EmbeddingStore cmd_embed(const Checkpoint& ckpt,
                         const std::vector<ManifestRecord>& subset,
                         std::size_t n_crops, bool test_augment);

struct Trial {
  bool target;
  std::string enroll;
  std::string test;
};

// "<label 1|0> <enroll_path> <test_path>" per line
std::vector<Trial> load_trials(const std::string& path);
void save_trials(const std::string& path, const std::vector<Trial>& trials);

// All within-split pairs (same speaker = target), for desk-scale evaluation.
std::vector<Trial> make_trials(const Manifest& manifest, const std::string& split);

struct ScoreReport {
  std::vector<double> scores;  // one per trial, trial order
  double eer;
  double eer_threshold;
  double min_dcf;
  double min_dcf_threshold;
};

ScoreReport cmd_score_trials(const EmbeddingStore& store,
                             const std::vector<Trial>& trials);
void save_scores(const std::string& path, const std::vector<Trial>& trials,
                 const std::vector<double>& scores);

// -------- identification --------

struct IdentReport {
  double top1;
  double top5;
};

// Class scores of one embedding under the checkpoint's head, using the
// loss's own scoring rule (dot+bias for softmax, cosine for the normalized
// heads, normalized dot+bias for logistic margin).
std::vector<double> head_scores(const Checkpoint& ckpt, const std::vector<double>& emb);

IdentReport cmd_evaluate_ident(const Checkpoint& ckpt,
                               const std::vector<ManifestRecord>& subset,
                               std::size_t n_crops, bool test_augment);

// -------- gradient checking --------

struct GradCheckReport {
  loss::LossKind kind;
  std::vector<double> max_rel_errors;  // one per random instance
  double worst() const;
};

// Random instances with C in [2,10], d in [2,16], 64-bit, checked against
// central finite differences.
GradCheckReport cmd_gradcheck(loss::LossKind kind, int trials, std::uint64_t seed);

// -------- sweep --------

struct SweepRow {
  std::string axis_value;
  bool ok;
  std::string error;
  double top1, top5, eer, min_dcf;
};

enum class SweepAxis { Dim, Loss, Dropout, Augment };

SweepAxis sweep_axis_from_name(const std::string& name);

// Runs train/embed/score per axis cell; failures are recorded and the sweep
// continues. Returns rows in axis order and writes <out_dir>/sweep.csv.
std::vector<SweepRow> cmd_sweep(const RunConfig& base, const Manifest& manifest,
                                SweepAxis axis, const std::string& out_dir,
                                bool parallel_cells = false,
                                std::ostream* log = nullptr);

std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace spk::cli
