#pragma once

// End-to-end experiment driver behind the `mrsnn` command line tool:
// single-sensory training and mask extraction, triad census, mask
// integration, multi-sensory retraining with a frozen mask, noise
// robustness evaluation and the incongruent-pair feature-distance study.
//
// Every command is a pure function of (ExperimentConfig, input files). Output
// files embed the SHA-256 of the effective config and contain no timestamps,
// so re-running a command reproduces them byte for byte. Outputs are staged
// in a scratch directory and moved into place only when the command succeeds.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrsnn/data.hpp"
#include "mrsnn/learning.hpp"
#include "mrsnn/motif.hpp"
#include "mrsnn/network.hpp"

namespace mrsnn {

enum class Topology { full, ff, mask };
std::string_view to_string(Topology t);
Topology topology_from_string(std::string_view s);

struct ExperimentConfig {
  std::string cache_dir;   // empty: $MRSNN_CACHE_DIR or ~/.cache/mrsnn
  std::string mnist_dir;   // empty: <cache>/mnist
  std::string audio_dir;   // empty: <cache>/spoken_digits
  int train_limit = 0;     // visual prefix sizes; 0 keeps the whole split
  int test_limit = 0;

  NetworkConfig network;
  LifParams lif;
  MfccConfig mfcc;
  LearningMode learning = LearningMode::pseudo_bp;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double lr = 1e-4;
  double lr_recurrent = 1e-4;
  int batch_size = 64;
  int epochs = 20;
  std::vector<double> noise_levels = {0.0, 0.8};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string out = "runs";

  // Recurrent topology during training; `mask` loads `mask` below.
  Topology topology = Topology::full;
  // Paths may contain "{seed}", replaced per seed.
  std::string mask;            // frozen mask for training (topology mask / train-multi)
  std::string mask_s;          // integrate: visual mask
  std::string mask_t;          // integrate: auditory mask
  std::string checkpoint;      // census: model to analyze
  std::string ff_checkpoint;   // noise-eval
  std::string motif_checkpoint;
  std::string pbp_checkpoint;  // mcgurk
  std::string reward_checkpoint;
  std::vector<std::string> reports;  // report: run reports to summarize

  double theta = 0.5;
  int null_graphs = 2000;
  int mcgurk_pairs = 300;  // per pair set
  double separation_threshold = 2.0;

  nlohmann::ordered_json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  // SHA-256 of to_json().dump().
  std::string checksum() const;
  void validate() const;

  std::filesystem::path mnist_path() const;
  std::filesystem::path audio_path() const;
};

// "{seed}" substitution.
std::filesystem::path seed_path(const std::string& pattern, std::uint64_t seed);

// ---- datasets as training examples -----------------------------------------

struct SplitExamples {
  std::vector<Example> train;
  std::vector<Example> test;
};

SplitExamples visual_examples(const Dataset& ds, int train_limit = 0, int test_limit = 0);
// MFCC grids ([frames x coefficients], row-major) for every utterance.
SplitExamples auditory_examples(const Dataset& ds, const MfccConfig& mfcc);
// Joins paired samples into two-modality examples labelled assigned_label.
std::vector<Example> paired_examples(const std::vector<Example>& visual,
                                     const std::vector<Example>& auditory,
                                     const std::vector<PairedSample>& pairs);
std::vector<Sample> label_only(const std::vector<Example>& ex);

// Loads the examples a config's network mode trains on. Multi mode pairs
// congruent samples: as many training pairs as visual training images and
// as many test pairs as visual test images.
SplitExamples load_examples(const ExperimentConfig& cfg, std::uint64_t seed);

// ---- training ---------------------------------------------------------------

struct EpochRow {
  int epoch = 0;
  std::string mode;
  double loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  std::uint64_t seed = 0;
};

struct TrainedModel {
  NetworkWeights weights;
  MotifMask mask;
  std::vector<EpochRow> rows;
  std::uint64_t b_rand_checksum = 0;  // reward mode only
};

TrainedModel train_model(const SplitExamples& data, const ExperimentConfig& cfg,
                         const MotifMask& mask, std::uint64_t seed);

// Checkpoint plus "<path>.mask.txt" holding the mask the model ran with.
void save_model(const std::filesystem::path& path, const NetworkWeights& w, const MotifMask& mask,
                const NetworkConfig& cfg, const std::string& config_checksum);
struct LoadedModel {
  NetworkWeights weights;
  MotifMask mask;
  NetworkConfig network;
};
LoadedModel load_model(const std::filesystem::path& path);

// ---- statistics -------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  std::optional<double> std;  // sample std; absent for fewer than two values
};
MeanStd mean_std(const std::vector<double>& v);

double median(std::vector<double> v);
// Freedman-Diaconis bin edges over [min, max] (a single bin when IQR = 0).
std::vector<double> fd_bin_edges(const std::vector<double>& v);
// Density per bin (integrates to 1 over the edges).
std::vector<double> histogram_density(const std::vector<double>& v, const std::vector<double>& edges);

struct Separation {
  double median_incongruent = 0.0;
  double median_congruent[2] = {0.0, 0.0};
  double pooled_sd[2] = {0.0, 0.0};
  double statistic[2] = {0.0, 0.0};  // |median gap| / pooled sd per congruent set
  bool separated = false;            // both statistics above threshold
};
Separation separation_test(const std::vector<double>& incongruent,
                           const std::vector<double>& congruent_a,
                           const std::vector<double>& congruent_b, double threshold);

// ---- commands -----------------------------------------------------------------

struct CommandResult {
  std::vector<std::filesystem::path> files;  // written outputs
  nlohmann::ordered_json summary;
};

CommandResult cmd_train_single(const ExperimentConfig& cfg);
CommandResult cmd_census(const ExperimentConfig& cfg);
CommandResult cmd_integrate(const ExperimentConfig& cfg);
CommandResult cmd_train_multi(const ExperimentConfig& cfg);
CommandResult cmd_noise_eval(const ExperimentConfig& cfg);
CommandResult cmd_mcgurk(const ExperimentConfig& cfg);
CommandResult cmd_report(const ExperimentConfig& cfg);
// Writes a synthetic spoken-digit corpus to cfg.audio_path().
CommandResult cmd_synth_audio(const ExperimentConfig& cfg, int n, const SyntheticAudioOptions& opts);

}  // namespace mrsnn
