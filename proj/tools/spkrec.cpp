// Command-line surface: synthetic data, feature extraction, training,
// embedding, scoring, identification, gradient checks and the sweep harness.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "spk/checkpoint.hpp"
#include "spk/config.hpp"
#include "spk/pipeline.hpp"

namespace fs = std::filesystem;
using namespace spk;

namespace {

cli::RunConfig default_config() {
  cli::RunConfig cfg;
  // Desk-scale defaults: ~0.3 s crops, small stride-2 encoder.
  cfg.crop_len = 5040;
  cfg.batch_size = 16;
  cfg.schedule = {0.02, 0.75, 8, 150};
  cfg.iterations = 1200;
  cfg.n_crops = 10;
  const std::size_t rows = feat::frame_count(cfg.crop_len, cfg.frame_spec());
  cfg.encoder = nn::small_encoder_config(64, rows, cfg.frame_spec().bins());
  return cfg;
}

int fail(const std::exception& e) {
  nlohmann::json j{{"error", e.what()}};
  std::cerr << j.dump() << "\n";
  return 1;
}

std::string stem_for(const std::string& path) {
  return fs::path(path).stem().string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speaker-recognition toolkit"};
  app.require_subcommand(1);

  std::string config_path, manifest_path, out_path, warm_path, ckpt_path, store_path,
      trials_path, split = "test", loss_name = "softmax", axis_name = "loss";
  std::uint64_t seed = 0;
  bool have_seed = false, no_test_augment = false, allow_cold = false,
       parallel_cells = false;
  int n_speakers = 20, utts = 10, trials_n = 20;
  double min_dur = 1.0, max_dur = 2.0, noise = 0.05;
  std::size_t n_crops = 0;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "random seed")->each([&](const std::string&) {
      have_seed = true;
    });
  };

  auto* synth = app.add_subcommand("synth-data", "generate a synthetic corpus");
  synth->add_option("--out", out_path, "output directory")->required();
  add_seed(synth);
  synth->add_option("--speakers", n_speakers, "number of speakers");
  synth->add_option("--utts", utts, "utterances per speaker");
  synth->add_option("--min-duration", min_dur, "seconds");
  synth->add_option("--max-duration", max_dur, "seconds");
  synth->add_option("--noise", noise, "white-noise level");

  auto* feats = app.add_subcommand("extract-features", "write spectrogram matrices");
  feats->add_option("--config", config_path, "run config file");
  feats->add_option("--manifest", manifest_path)->required();
  feats->add_option("--out", out_path, "output directory")->required();

  auto* train = app.add_subcommand("train", "run the SGD loop");
  train->add_option("--config", config_path, "run config file");
  train->add_option("--manifest", manifest_path)->required();
  train->add_option("--out", out_path, "output directory")->required();
  train->add_option("--warm-start", warm_path, "checkpoint to initialize from");
  train->add_flag("--allow-cold-start", allow_cold,
                  "permit margin losses without a warm start");
  add_seed(train);

  auto* embed = app.add_subcommand("embed", "extract multi-crop embeddings");
  embed->add_option("--checkpoint", ckpt_path)->required();
  embed->add_option("--manifest", manifest_path)->required();
  embed->add_option("--split", split, "train|val|test");
  embed->add_option("--n-crops", n_crops, "crops per utterance");
  embed->add_option("--out", out_path, "embedding store path")->required();
  embed->add_flag("--no-test-augment", no_test_augment);
  add_seed(embed);

  auto* score = app.add_subcommand("score-trials", "cosine scores, EER, min C_det");
  score->add_option("--store", store_path, "embedding store")->required();
  score->add_option("--trials", trials_path, "trial list file")->required();
  score->add_option("--out", out_path, "scores output file")->required();

  auto* ident = app.add_subcommand("evaluate-ident", "closed-set Top-1/Top-5");
  ident->add_option("--checkpoint", ckpt_path)->required();
  ident->add_option("--manifest", manifest_path)->required();
  ident->add_option("--split", split, "train|val|test");
  ident->add_option("--n-crops", n_crops, "crops per utterance");
  ident->add_flag("--no-test-augment", no_test_augment);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck->add_option("--loss", loss_name, "softmax|asoftmax|amsoftmax|logistic_margin|all");
  gradcheck->add_option("--trials", trials_n, "random instances");
  add_seed(gradcheck);

  auto* sweep = app.add_subcommand("sweep", "experiment grid over one axis");
  sweep->add_option("--config", config_path, "run config file");
  sweep->add_option("--manifest", manifest_path)->required();
  sweep->add_option("--axis", axis_name, "dim|loss|dropout|augment");
  sweep->add_option("--out", out_path, "output directory")->required();
  sweep->add_flag("--parallel", parallel_cells, "run cells on separate threads");
  add_seed(sweep);

  CLI11_PARSE(app, argc, argv);

  try {
    cli::RunConfig cfg =
        config_path.empty() ? default_config() : cli::load_config(config_path);
    if (have_seed) cfg.seed = seed;

    if (synth->parsed()) {
      cli::SyntheticSpec spec;
      spec.n_speakers = n_speakers;
      spec.utts_per_speaker = utts;
      spec.min_duration = min_dur;
      spec.max_duration = max_dur;
      spec.noise_level = noise;
      const auto manifest = cli::synth_data(spec, out_path, have_seed ? seed : 1);
      std::cout << "wrote " << manifest.records.size() << " utterances, "
                << manifest.n_speakers() << " speakers, manifest at " << out_path
                << "/manifest.csv\n";
    } else if (feats->parsed()) {
      const auto manifest = cli::load_manifest(manifest_path);
      fs::create_directories(out_path);
      const auto spec = cfg.frame_spec();
      for (const auto& rec : manifest.records) {
        const auto w = audio::load_wav(rec.path);
        const auto m = feat::normalize_per_bin(feat::stft_amplitude(w, spec));
        feat::write_matrix((fs::path(out_path) / (stem_for(rec.path) + ".bin")).string(),
                           m);
      }
      std::cout << "wrote " << manifest.records.size() << " feature matrices to "
                << out_path << "\n";
    } else if (train->parsed()) {
      const auto manifest = cli::load_manifest(manifest_path);
      std::optional<cli::Checkpoint> warm;
      if (!warm_path.empty()) warm = cli::load_checkpoint(warm_path);
      fs::create_directories(out_path);
      std::ofstream log(fs::path(out_path) / "train.log");
      const auto ckpt = cli::cmd_train(cfg, manifest, warm, allow_cold, &log);
      cli::save_config((fs::path(out_path) / "config.ini").string(), cfg);
      cli::save_checkpoint((fs::path(out_path) / "checkpoint.ckpt").string(), ckpt);
      std::cout << "checkpoint written to " << out_path << "/checkpoint.ckpt\n";
    } else if (embed->parsed()) {
      auto ckpt = cli::load_checkpoint(ckpt_path);
      if (have_seed) ckpt.config.seed = seed;
      const auto manifest = cli::load_manifest(manifest_path);
      const auto subset = manifest.subset(split);
      const std::size_t crops = n_crops ? n_crops : ckpt.config.n_crops;
      const bool augment = no_test_augment ? false : ckpt.config.test_augment;
      const auto store = cli::cmd_embed(ckpt, subset, crops, augment);
      cli::save_store(out_path, store);
      std::cout << "wrote " << store.ids.size() << " embeddings to " << out_path
                << "\n";
    } else if (score->parsed()) {
      const auto store = cli::load_store(store_path);
      const auto trials = cli::load_trials(trials_path);
      const auto report = cli::cmd_score_trials(store, trials);
      cli::save_scores(out_path, trials, report.scores);
      std::cout << "trials " << trials.size() << " eer " << report.eer
                << " eer_threshold " << report.eer_threshold << " min_dcf "
                << report.min_dcf << " min_dcf_threshold " << report.min_dcf_threshold
                << "\n";
    } else if (ident->parsed()) {
      const auto ckpt = cli::load_checkpoint(ckpt_path);
      const auto manifest = cli::load_manifest(manifest_path);
      const auto subset = manifest.subset(split);
      const std::size_t crops = n_crops ? n_crops : ckpt.config.n_crops;
      const bool augment = no_test_augment ? false : ckpt.config.test_augment;
      const auto r = cli::cmd_evaluate_ident(ckpt, subset, crops, augment);
      std::cout << "top1 " << r.top1 << " top5 " << r.top5 << "\n";
    } else if (gradcheck->parsed()) {
      std::vector<loss::LossKind> kinds;
      if (loss_name == "all")
        kinds = {loss::LossKind::Softmax, loss::LossKind::ASoftmax,
                 loss::LossKind::AMSoftmax, loss::LossKind::LogisticMargin};
      else
        kinds = {loss::loss_kind_from_name(loss_name)};
      for (auto kind : kinds) {
        const auto report =
            cli::cmd_gradcheck(kind, trials_n, have_seed ? seed : 1);
        std::cout << loss::loss_kind_name(kind) << " trials " << trials_n
                  << " max_rel_error " << report.worst() << "\n";
      }
    } else if (sweep->parsed()) {
      const auto manifest = cli::load_manifest(manifest_path);
      const auto rows = cli::cmd_sweep(cfg, manifest,
                                       cli::sweep_axis_from_name(axis_name), out_path,
                                       parallel_cells, &std::cout);
      (void)rows;
      std::cout << "sweep results in " << out_path << "/sweep.csv\n";
    }
  } catch (const std::exception& e) {
    return fail(e);
  }
  return 0;
}
