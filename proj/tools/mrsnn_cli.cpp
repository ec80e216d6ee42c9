// mrsnn: command line driver for the experiment pipeline.
//
//   mrsnn train-single --config cfg.json --mode visual --out runs/visual
//   mrsnn integrate --mask-s runs/visual/seed{seed}/mask.txt --mask-t ... --out runs/int
//
// Every subcommand accepts --config, --seed and --out; the remaining flags
// override individual config keys.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mrsnn/experiment.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, cache_dir, mnist_dir, audio_dir;
  std::optional<std::string> mode, learning, optimizer, topology;
  std::optional<std::string> mask, mask_s, mask_t, checkpoint, ff_checkpoint, motif_checkpoint,
      pbp_checkpoint, reward_checkpoint;
  std::optional<int> epochs, train_limit, test_limit, batch_size, null_graphs, mcgurk_pairs;
  std::optional<double> lr, lr_recurrent;
  std::vector<double> levels;
  std::vector<std::string> reports;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON experiment config");
  app->add_option("--seed", o.seed, "run a single seed instead of the config's list");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--cache-dir", o.cache_dir, "dataset cache (default $MRSNN_CACHE_DIR)");
  app->add_option("--mnist-dir", o.mnist_dir);
  app->add_option("--audio-dir", o.audio_dir);
  app->add_option("--mode", o.mode, "visual | auditory | multi");
  app->add_option("--learning", o.learning, "pseudo_bp | reward");
  app->add_option("--optimizer", o.optimizer, "adam | sgd");
  app->add_option("--topology", o.topology, "full | ff | mask");
  app->add_option("--mask", o.mask, "frozen mask (may contain {seed})");
  app->add_option("--epochs", o.epochs);
  app->add_option("--lr", o.lr);
  app->add_option("--lr-recurrent", o.lr_recurrent);
  app->add_option("--batch-size", o.batch_size);
  app->add_option("--train-limit", o.train_limit);
  app->add_option("--test-limit", o.test_limit);
}

mrsnn::ExperimentConfig resolve(const Overrides& o) {
  auto j = o.config.empty() ? mrsnn::ExperimentConfig{}.to_json()
                            : mrsnn::ExperimentConfig::load(o.config).to_json();
  auto set = [&](const char* key, const auto& opt) {
    if (opt) j[key] = *opt;
  };
  if (o.seed) j["seeds"] = std::vector<std::uint64_t>{*o.seed};
  set("out", o.out);
  set("cache_dir", o.cache_dir);
  set("mnist_dir", o.mnist_dir);
  set("audio_dir", o.audio_dir);
  if (o.mode) j["network"]["mode"] = *o.mode;
  set("learning", o.learning);
  set("optimizer", o.optimizer);
  set("topology", o.topology);
  set("mask", o.mask);
  set("mask_s", o.mask_s);
  set("mask_t", o.mask_t);
  set("checkpoint", o.checkpoint);
  set("ff_checkpoint", o.ff_checkpoint);
  set("motif_checkpoint", o.motif_checkpoint);
  set("pbp_checkpoint", o.pbp_checkpoint);
  set("reward_checkpoint", o.reward_checkpoint);
  set("epochs", o.epochs);
  set("lr", o.lr);
  set("lr_recurrent", o.lr_recurrent);
  set("batch_size", o.batch_size);
  set("train_limit", o.train_limit);
  set("test_limit", o.test_limit);
  set("null_graphs", o.null_graphs);
  set("mcgurk_pairs", o.mcgurk_pairs);
  if (!o.levels.empty()) j["noise_levels"] = o.levels;
  if (!o.reports.empty()) j["reports"] = o.reports;
  return mrsnn::ExperimentConfig::from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motif-gated recurrent spiking network experiments"};
  app.require_subcommand(1);
  Overrides o;

  auto* train_single = app.add_subcommand("train-single", "train on one modality and extract its motif mask");
  auto* census = app.add_subcommand("census", "triad census of a trained recurrent layer");
  auto* integrate = app.add_subcommand("integrate", "average visual and auditory masks");
  auto* train_multi = app.add_subcommand("train-multi", "train on congruent pairs with a frozen mask");
  auto* noise_eval = app.add_subcommand("noise-eval", "FF vs FF-Motif accuracy under input noise");
  auto* mcgurk = app.add_subcommand("mcgurk", "feature distances for congruent and incongruent pairs");
  auto* report = app.add_subcommand("report", "summarize run reports");
  auto* synth = app.add_subcommand("synth-audio", "write a synthetic spoken-digit corpus");
  for (auto* s : {train_single, census, integrate, train_multi, noise_eval, mcgurk, report, synth}) {
    add_common(s, o);
  }
  census->add_option("--checkpoint", o.checkpoint, "model checkpoint (may contain {seed})");
  census->add_option("--null-graphs", o.null_graphs);
  integrate->add_option("--mask-s", o.mask_s, "visual mask (may contain {seed})");
  integrate->add_option("--mask-t", o.mask_t, "auditory mask (may contain {seed})");
  noise_eval->add_option("--ff-checkpoint", o.ff_checkpoint);
  noise_eval->add_option("--motif-checkpoint", o.motif_checkpoint);
  noise_eval->add_option("--levels", o.levels, "noise levels in [0,1]");
  mcgurk->add_option("--pbp-checkpoint", o.pbp_checkpoint);
  mcgurk->add_option("--reward-checkpoint", o.reward_checkpoint);
  mcgurk->add_option("--pairs", o.mcgurk_pairs, "pairs per set");
  report->add_option("--report", o.reports, "run report.json (repeatable)");
  int synth_n = mrsnn::kDefaultSyntheticUtterances;
  mrsnn::SyntheticAudioOptions synth_opts;
  synth->add_option("--n", synth_n, "utterances");
  synth->add_option("--speakers", synth_opts.speakers);
  synth->add_option("--noise", synth_opts.noise);
  synth->add_option("--pitch-spread", synth_opts.pitch_spread);
  synth->add_option("--token-jitter", synth_opts.token_jitter);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve(o);
    const auto t0 = std::chrono::steady_clock::now();
    mrsnn::CommandResult r;
    if (*train_single) r = mrsnn::cmd_train_single(cfg);
    else if (*census) r = mrsnn::cmd_census(cfg);
    else if (*integrate) r = mrsnn::cmd_integrate(cfg);
    else if (*train_multi) r = mrsnn::cmd_train_multi(cfg);
    else if (*noise_eval) r = mrsnn::cmd_noise_eval(cfg);
    else if (*mcgurk) r = mrsnn::cmd_mcgurk(cfg);
    else if (*report) r = mrsnn::cmd_report(cfg);
    else r = mrsnn::cmd_synth_audio(cfg, synth_n, synth_opts);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& f : r.files) std::cerr << "wrote " << f.string() << '\n';
    std::cerr << "wall-clock " << secs << " s\n";
    std::cout << r.summary.dump(2) << '\n';
  } catch (const mrsnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
