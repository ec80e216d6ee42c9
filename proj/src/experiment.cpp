#include "mrsnn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "mrsnn/coverage.hpp"
#include "mrsnn/rng.hpp"

namespace mrsnn {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kInitTag = 0x1417;
// Runs trained under a mask draw their weights from a separate stream. The mask
// is extracted from a network initialized with kInitTag and small learning
// rates leave W_r close to its start, so reusing that stream would keep
// exactly the positive recurrent weights and make W_r . M all excitatory.
constexpr std::uint64_t kMaskedInitTag = 0x1418;
constexpr std::uint64_t kTrainTag = 0x7421;
constexpr std::uint64_t kEvalTag = 0xE7A1;
constexpr std::uint64_t kRewardTag = 0x4E3A;
constexpr std::uint64_t kNullTag = 0x6E75;
constexpr std::uint64_t kPairTag = 0x9A12;

// Output files are written under a scratch directory and moved into the
// output directory only once the command has finished.
class Stage {
 public:
  Stage(const fs::path& out, const std::string& command)
      : out_(out), dir_(out / (".staging-" + command)) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  Stage(const Stage&) = delete;
  Stage& operator=(const Stage&) = delete;
  ~Stage() {
    std::error_code ec;
    if (!committed_) fs::remove_all(dir_, ec);
  }

  fs::path path(const fs::path& rel) {
    const auto p = dir_ / rel;
    fs::create_directories(p.parent_path());
    return p;
  }

  std::vector<fs::path> commit() {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir_)) {
      if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir_));
    }
    std::sort(files.begin(), files.end());
    for (auto& rel : files) {
      const auto dst = out_ / rel;
      fs::create_directories(dst.parent_path());
      fs::rename(dir_ / rel, dst);
      rel = dst;
    }
    fs::remove_all(dir_);
    committed_ = true;
    return files;
  }

 private:
  fs::path out_, dir_;
  bool committed_ = false;
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot write " + p.string());
  os << s;
  if (!os) throw ConfigError("short write to " + p.string());
}

std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw ConfigError(what + " not found: " + p.string());
}

void require_set(const std::string& v, const std::string& key) {
  if (v.empty()) throw ConfigError("config: '" + key + "' is required for this command");
}

void write_config(Stage& stage, const ExperimentConfig& cfg, const std::string& command) {
  auto j = cfg.to_json();
  j["config_sha256"] = cfg.checksum();
  write_text(stage.path("config_" + command + ".json"), j.dump(2) + "\n");
}

std::string csv_header(const ExperimentConfig& cfg) { return "# config_sha256=" + cfg.checksum() + "\n"; }

std::string mode_label(const NetworkConfig& net, LearningMode lm) {
  return std::string(to_string(net.mode)) + ":" + std::string(to_string(lm));
}

ojson mean_std_json(const std::vector<double>& v) {
  const auto ms = mean_std(v);
  ojson j;
  j["mean"] = ms.mean;
  j["std"] = ms.std ? ojson(*ms.std) : ojson(nullptr);
  j["n"] = v.size();
  return j;
}

// Visual and auditory corpora loaded at most once per command.
struct Corpora {
  const ExperimentConfig& cfg;
  std::optional<SplitExamples> visual, auditory;

  const SplitExamples& vis() {
    if (!visual) visual = visual_examples(load_mnist(cfg.mnist_path()), cfg.train_limit, cfg.test_limit);
    return *visual;
  }
  const SplitExamples& aud() {
    if (!auditory) auditory = auditory_examples(load_spoken_digits(cfg.audio_path()), cfg.mfcc);
    return *auditory;
  }
  SplitExamples for_mode(const NetworkConfig& net, std::uint64_t seed) {
    switch (net.mode) {
      case ModalityMode::visual: return vis();
      case ModalityMode::auditory: return aud();
      case ModalityMode::multi: break;
    }
    const auto& v = vis();
    const auto& a = aud();
    SplitExamples out;
    const auto train_pairs = make_pairs(label_only(v.train), label_only(a.train), PairSpec::matching(),
                                        static_cast<int>(v.train.size()), derive_seed(seed, kPairTag, 0));
    const auto test_pairs = make_pairs(label_only(v.test), label_only(a.test), PairSpec::matching(),
                                       static_cast<int>(v.test.size()), derive_seed(seed, kPairTag, 1));
    out.train = paired_examples(v.train, a.train, train_pairs);
    out.test = paired_examples(v.test, a.test, test_pairs);
    return out;
  }
};

void check_modalities(const NetworkConfig& net) {
  if (net.uses(Modality::visual) &&
      (net.visual_height != 28 || net.visual_width != 28)) {
    throw ConfigError("config: visual input must be 28x28 for MNIST");
  }
}

}  // namespace

// ---- config ---------------------------------------------------------------------

std::string_view to_string(Topology t) {
  switch (t) {
    case Topology::full: return "full";
    case Topology::ff: return "ff";
    case Topology::mask: return "mask";
  }
  return "?";
}

Topology topology_from_string(std::string_view s) {
  if (s == "full") return Topology::full;
  if (s == "ff") return Topology::ff;
  if (s == "mask") return Topology::mask;
  throw ConfigError("unknown topology '" + std::string(s) + "' (full, ff, mask)");
}

ojson ExperimentConfig::to_json() const {
  ojson j;
  j["cache_dir"] = cache_dir;
  j["mnist_dir"] = mnist_dir;
  j["audio_dir"] = audio_dir;
  j["train_limit"] = train_limit;
  j["test_limit"] = test_limit;
  j["network"] = ojson::parse(config_to_json(network));
  j["lif"] = {{"capacitance", lif.capacitance}, {"leak_conductance", lif.leak_conductance},
              {"v_rest", lif.v_rest},           {"v_reset", lif.v_reset},
              {"v_th", lif.v_th},               {"tau_ref", lif.tau_ref},
              {"dt", lif.dt},                   {"v_win", lif.v_win}};
  j["mfcc"] = {{"frame_ms", mfcc.frame_ms},         {"hop_ms", mfcc.hop_ms},
               {"n_mel_filters", mfcc.n_mel_filters}, {"n_coefficients", mfcc.n_coefficients},
               {"pre_emphasis", mfcc.pre_emphasis}, {"n_frames", mfcc.n_frames}};
  j["learning"] = std::string(mrsnn::to_string(learning));
  j["optimizer"] = optimizer == OptimizerKind::adam ? "adam" : "sgd";
  j["lr"] = lr;
  j["lr_recurrent"] = lr_recurrent;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["noise_levels"] = noise_levels;
  j["seeds"] = seeds;
  j["out"] = out;
  j["topology"] = std::string(mrsnn::to_string(topology));
  j["mask"] = mask;
  j["mask_s"] = mask_s;
  j["mask_t"] = mask_t;
  j["checkpoint"] = checkpoint;
  j["ff_checkpoint"] = ff_checkpoint;
  j["motif_checkpoint"] = motif_checkpoint;
  j["pbp_checkpoint"] = pbp_checkpoint;
  j["reward_checkpoint"] = reward_checkpoint;
  j["reports"] = reports;
  j["theta"] = theta;
  j["null_graphs"] = null_graphs;
  j["mcgurk_pairs"] = mcgurk_pairs;
  j["separation_threshold"] = separation_threshold;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  static const std::vector<std::string> known = {
      "cache_dir", "mnist_dir", "audio_dir", "train_limit", "test_limit", "network", "lif", "mfcc",
      "learning", "optimizer", "lr", "lr_recurrent", "batch_size", "epochs", "noise_levels", "seeds",
      "out", "topology", "mask", "mask_s", "mask_t", "checkpoint", "ff_checkpoint",
      "motif_checkpoint", "pbp_checkpoint", "reward_checkpoint", "reports", "theta", "null_graphs",
      "mcgurk_pairs", "separation_threshold", "config_sha256"};
  try {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    for (const auto& [k, v] : j.items()) {
      if (std::find(known.begin(), known.end(), k) == known.end()) {
        throw ConfigError("config: unknown key '" + k + "'");
      }
    }
    c.cache_dir = j.value("cache_dir", c.cache_dir);
    c.mnist_dir = j.value("mnist_dir", c.mnist_dir);
    c.audio_dir = j.value("audio_dir", c.audio_dir);
    c.train_limit = j.value("train_limit", c.train_limit);
    c.test_limit = j.value("test_limit", c.test_limit);
    if (j.contains("network")) c.network = config_from_json(j["network"].dump());
    if (j.contains("lif")) {
      const auto& l = j["lif"];
      c.lif.capacitance = l.value("capacitance", c.lif.capacitance);
      c.lif.leak_conductance = l.value("leak_conductance", c.lif.leak_conductance);
      c.lif.v_rest = l.value("v_rest", c.lif.v_rest);
      c.lif.v_reset = l.value("v_reset", c.lif.v_reset);
      c.lif.v_th = l.value("v_th", c.lif.v_th);
      c.lif.tau_ref = l.value("tau_ref", c.lif.tau_ref);
      c.lif.dt = l.value("dt", c.lif.dt);
      c.lif.v_win = l.value("v_win", c.lif.v_win);
    }
    if (j.contains("mfcc")) {
      const auto& m = j["mfcc"];
      c.mfcc.frame_ms = m.value("frame_ms", c.mfcc.frame_ms);
      c.mfcc.hop_ms = m.value("hop_ms", c.mfcc.hop_ms);
      c.mfcc.n_mel_filters = m.value("n_mel_filters", c.mfcc.n_mel_filters);
      c.mfcc.n_coefficients = m.value("n_coefficients", c.mfcc.n_coefficients);
      c.mfcc.pre_emphasis = m.value("pre_emphasis", c.mfcc.pre_emphasis);
      c.mfcc.n_frames = m.value("n_frames", c.mfcc.n_frames);
    }
    c.learning = learning_mode_from_string(j.value("learning", std::string("pseudo_bp")));
    const auto opt = j.value("optimizer", std::string("sgd"));
    if (opt != "adam" && opt != "sgd") throw ConfigError("config: optimizer must be adam or sgd");
    c.optimizer = opt == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
    c.lr = j.value("lr", c.lr);
    c.lr_recurrent = j.value("lr_recurrent", c.lr_recurrent);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.noise_levels = j.value("noise_levels", c.noise_levels);
    c.seeds = j.value("seeds", c.seeds);
    c.out = j.value("out", c.out);
    c.topology = topology_from_string(j.value("topology", std::string("full")));
    c.mask = j.value("mask", c.mask);
    c.mask_s = j.value("mask_s", c.mask_s);
    c.mask_t = j.value("mask_t", c.mask_t);
    c.checkpoint = j.value("checkpoint", c.checkpoint);
    c.ff_checkpoint = j.value("ff_checkpoint", c.ff_checkpoint);
    c.motif_checkpoint = j.value("motif_checkpoint", c.motif_checkpoint);
    c.pbp_checkpoint = j.value("pbp_checkpoint", c.pbp_checkpoint);
    c.reward_checkpoint = j.value("reward_checkpoint", c.reward_checkpoint);
    c.reports = j.value("reports", c.reports);
    c.theta = j.value("theta", c.theta);
    c.null_graphs = j.value("null_graphs", c.null_graphs);
    c.mcgurk_pairs = j.value("mcgurk_pairs", c.mcgurk_pairs);
    c.separation_threshold = j.value("separation_threshold", c.separation_threshold);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_text(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

std::string ExperimentConfig::checksum() const {
  const auto s = to_json().dump();
  return sha256_hex({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

void ExperimentConfig::validate() const {
  network.validate();
  lif.validate();
  mfcc.validate();
  if (seeds.empty()) throw ConfigError("config: seed list must be non-empty");
  if (epochs < 0) throw ConfigError("config: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (!(lr >= 0.0) || !(lr_recurrent >= 0.0)) throw ConfigError("config: learning rates must be >= 0");
  if (train_limit < 0 || test_limit < 0) throw ConfigError("config: limits must be >= 0");
  for (double l : noise_levels) {
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("config: noise level outside [0,1]");
  }
  if (null_graphs < 1) throw ConfigError("config: null_graphs must be >= 1");
  if (mcgurk_pairs < 2) throw ConfigError("config: mcgurk_pairs must be >= 2");
  if (out.empty()) throw ConfigError("config: out must be set");
  if (network.uses(Modality::auditory) &&
      (network.auditory_height != mfcc.n_frames || network.auditory_width != mfcc.n_coefficients)) {
    throw ConfigError("config: auditory input must be n_frames x n_coefficients of the MFCC config");
  }
  check_modalities(network);
}

fs::path ExperimentConfig::mnist_path() const {
  return mnist_dir.empty() ? resolve_cache_dir(cache_dir) / "mnist" : fs::path(mnist_dir);
}

fs::path ExperimentConfig::audio_path() const {
  return audio_dir.empty() ? resolve_cache_dir(cache_dir) / "spoken_digits" : fs::path(audio_dir);
}

fs::path seed_path(const std::string& pattern, std::uint64_t seed) {
  std::string s = pattern;
  const std::string key = "{seed}";
  for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos)) {
    s.replace(pos, key.size(), std::to_string(seed));
  }
  return s;
}

// ---- examples ---------------------------------------------------------------------

SplitExamples visual_examples(const Dataset& ds, int train_limit, int test_limit) {
  if (ds.modality != Modality::visual) throw ConfigError("visual_examples: not an image dataset");
  SplitExamples out;
  auto take = [](const std::vector<Sample>& src, int limit, std::vector<Example>& dst) {
    const std::size_t n = limit > 0 ? std::min<std::size_t>(src.size(), limit) : src.size();
    dst.reserve(n);
    for (std::size_t i = 0; i < n; ++i) dst.push_back({src[i].data, {}, src[i].label});
  };
  take(ds.train, train_limit, out.train);
  take(ds.test, test_limit, out.test);
  return out;
}

SplitExamples auditory_examples(const Dataset& ds, const MfccConfig& mfcc_cfg) {
  if (ds.modality != Modality::auditory) throw ConfigError("auditory_examples: not an audio dataset");
  SplitExamples out;
  auto convert = [&](const std::vector<Sample>& src, std::vector<Example>& dst) {
    dst.reserve(src.size());
    for (const auto& s : src) {
      const Eigen::MatrixXd grid = mfcc(s.data, ds.sample_rate, mfcc_cfg);
      Example ex;
      ex.label = s.label;
      ex.auditory.resize(static_cast<std::size_t>(grid.size()));
      for (Eigen::Index r = 0; r < grid.rows(); ++r) {
        for (Eigen::Index c = 0; c < grid.cols(); ++c) {
          ex.auditory[static_cast<std::size_t>(r * grid.cols() + c)] = static_cast<float>(grid(r, c));
        }
      }
      dst.push_back(std::move(ex));
    }
  };
  convert(ds.train, out.train);
  convert(ds.test, out.test);
  return out;
}

std::vector<Example> paired_examples(const std::vector<Example>& visual,
                                     const std::vector<Example>& auditory,
                                     const std::vector<PairedSample>& pairs) {
  std::vector<Example> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back({visual.at(p.visual).visual, auditory.at(p.auditory).auditory, p.assigned_label});
  }
  return out;
}

std::vector<Sample> label_only(const std::vector<Example>& ex) {
  std::vector<Sample> out(ex.size());
  for (std::size_t i = 0; i < ex.size(); ++i) out[i].label = ex[i].label;
  return out;
}

SplitExamples load_examples(const ExperimentConfig& cfg, std::uint64_t seed) {
  Corpora c{cfg, {}, {}};
  return c.for_mode(cfg.network, seed);
}

// ---- training ---------------------------------------------------------------------

TrainedModel train_model(const SplitExamples& data, const ExperimentConfig& cfg,
                         const MotifMask& mask, std::uint64_t seed) {
  const auto& net = cfg.network;
  TrainedModel m;
  const auto init_tag = cfg.topology == Topology::mask ? kMaskedInitTag : kInitTag;
  m.weights = NetworkWeights::initialize(net, derive_seed(seed, init_tag));
  m.mask = mask;
  TrainConfig tc;
  tc.mode = cfg.learning;
  tc.optimizer = cfg.optimizer;
  tc.lr = cfg.lr;
  tc.batch_size = cfg.batch_size;
  Optimizer opt(cfg.optimizer, cfg.lr, cfg.lr_recurrent);
  std::optional<RewardLearningState> rl;
  if (cfg.learning == LearningMode::reward) {
    rl = RewardLearningState::initialize(net.hidden_size, net.output_size,
                                         derive_seed(seed, kRewardTag), std::max(cfg.lr, 1e-300),
                                         std::max(cfg.lr_recurrent, 1e-300));
    m.b_rand_checksum = rl->checksum();
  }
  const auto label = mode_label(net, cfg.learning);
  for (int e = 0; e < cfg.epochs; ++e) {
    const auto tm = train_epoch(data.train, m.weights, mask, net, cfg.lif, tc, opt,
                                rl ? &*rl : nullptr, e, derive_seed(seed, kTrainTag));
    const auto ev = evaluate(data.test, m.weights, mask, net, cfg.lif, derive_seed(seed, kEvalTag));
    m.rows.push_back({e + 1, label, tm.loss, tm.accuracy, ev.accuracy, seed});
    std::fprintf(stderr, "[seed %llu] epoch %d/%d %s loss %.4f train %.4f test %.4f\n",
                 static_cast<unsigned long long>(seed), e + 1, cfg.epochs, label.c_str(), tm.loss,
                 tm.accuracy, ev.accuracy);
  }
  if (cfg.epochs == 0) {
    const auto ev = evaluate(data.test, m.weights, mask, net, cfg.lif, derive_seed(seed, kEvalTag));
    m.rows.push_back({0, label, ev.loss, 0.0, ev.accuracy, seed});
  }
  if (rl && rl->checksum() != m.b_rand_checksum) {
    throw TrainingFault("B_rand changed during training");
  }
  return m;
}

void save_model(const fs::path& path, const NetworkWeights& w, const MotifMask& mask,
                const NetworkConfig& cfg, const std::string& config_checksum) {
  save_checkpoint(path, w, cfg, config_checksum);
  save_mask(path.string() + ".mask.txt", mask, "config_sha256=" + config_checksum);
}

LoadedModel load_model(const fs::path& path) {
  require_file(path, "checkpoint");
  auto [w, net] = load_checkpoint(path);
  return {std::move(w), load_mask(path.string() + ".mask.txt"), net};
}

// ---- statistics -----------------------------------------------------------------

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  r.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() >= 2) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

double median(std::vector<double> v) {
  if (v.empty()) throw DomainError("median of an empty set");
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double sample_sd(const std::vector<double>& v) {
  const auto ms = mean_std(v);
  return ms.std.value_or(0.0);
}

}  // namespace

std::vector<double> fd_bin_edges(const std::vector<double>& v) {
  if (v.empty()) throw DomainError("fd_bin_edges: empty sample");
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  const double lo = *mn, hi = *mx;
  const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
  const double width = 2.0 * iqr / std::cbrt(static_cast<double>(v.size()));
  int bins = 1;
  if (width > 0.0 && hi > lo) bins = std::clamp(static_cast<int>(std::ceil((hi - lo) / width)), 1, 1000);
  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  const double span = hi > lo ? hi - lo : 1.0;
  for (int b = 0; b <= bins; ++b) edges[static_cast<std::size_t>(b)] = lo + span * b / bins;
  return edges;
}

std::vector<double> histogram_density(const std::vector<double>& v, const std::vector<double>& edges) {
  if (edges.size() < 2) throw DomainError("histogram_density: need at least two edges");
  const std::size_t bins = edges.size() - 1;
  std::vector<double> count(bins, 0.0);
  for (double x : v) {
    auto it = std::upper_bound(edges.begin(), edges.end(), x);
    std::size_t b = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
    if (b >= bins) b = bins - 1;
    if (x >= edges.front() && x <= edges.back()) count[b] += 1.0;
  }
  for (std::size_t b = 0; b < bins; ++b) {
    const double w = edges[b + 1] - edges[b];
    count[b] = v.empty() || w <= 0.0 ? 0.0 : count[b] / (static_cast<double>(v.size()) * w);
  }
  return count;
}

Separation separation_test(const std::vector<double>& incongruent,
                           const std::vector<double>& congruent_a,
                           const std::vector<double>& congruent_b, double threshold) {
  Separation s;
  s.median_incongruent = median(incongruent);
  const double sd_inc = sample_sd(incongruent);
  s.separated = true;
  const std::vector<double>* cong[2] = {&congruent_a, &congruent_b};
  for (int k = 0; k < 2; ++k) {
    s.median_congruent[k] = median(*cong[k]);
    const double sd_k = sample_sd(*cong[k]);
    s.pooled_sd[k] = std::sqrt(0.5 * (sd_inc * sd_inc + sd_k * sd_k));
    const double gap = std::abs(s.median_incongruent - s.median_congruent[k]);
    s.statistic[k] = s.pooled_sd[k] > 0.0 ? gap / s.pooled_sd[k] : (gap > 0.0 ? INFINITY : 0.0);
    s.separated = s.separated && s.statistic[k] > threshold;
  }
  return s;
}

// ---- commands ---------------------------------------------------------------------

namespace {

MotifMask training_mask(const ExperimentConfig& cfg, std::uint64_t seed) {
  const int h = cfg.network.hidden_size;
  switch (cfg.topology) {
    case Topology::full: return MotifMask::full(h);
    case Topology::ff: return MotifMask::zeros(h);
    case Topology::mask: break;
  }
  auto m = load_mask(seed_path(cfg.mask, seed));
  if (m.size() != h) throw ConfigError("mask size does not match hidden_size");
  return m;
}

std::string mask_digest(const fs::path& p) { return sha256_file(p); }

CommandResult run_training(const ExperimentConfig& cfg, const std::string& command, bool extract) {
  if (cfg.topology == Topology::mask) {
    require_set(cfg.mask, "mask");
    for (auto s : cfg.seeds) require_file(seed_path(cfg.mask, s), "mask");
  }
  std::map<std::uint64_t, std::string> mask_before;
  if (cfg.topology == Topology::mask) {
    for (auto s : cfg.seeds) mask_before[s] = mask_digest(seed_path(cfg.mask, s));
  }
  const auto sum = cfg.checksum();
  Stage stage(cfg.out, command);
  write_config(stage, cfg, command);
  Corpora corpora{cfg, {}, {}};

  std::string csv = csv_header(cfg) + "epoch,mode,loss,train_acc,test_acc,seed\n";
  ojson per_seed = ojson::array();
  std::vector<double> finals;
  for (auto seed : cfg.seeds) {
    const auto data = corpora.for_mode(cfg.network, seed);
    const auto mask = training_mask(cfg, seed);
    const auto model = train_model(data, cfg, mask, seed);
    for (const auto& r : model.rows) {
      csv += std::to_string(r.epoch) + "," + r.mode + "," + fmt(r.loss) + "," + fmt(r.train_acc) +
             "," + fmt(r.test_acc) + "," + std::to_string(r.seed) + "\n";
    }
    const fs::path dir = "seed" + std::to_string(seed);
    save_model(stage.path(dir / "model.ckpt"), model.weights, mask, cfg.network, sum);
    ojson row;
    row["seed"] = seed;
    row["final_test_acc"] = model.rows.back().test_acc;
    row["final_train_acc"] = model.rows.back().train_acc;
    row["final_loss"] = model.rows.back().loss;
    row["train_samples"] = data.train.size();
    row["test_samples"] = data.test.size();
    if (cfg.learning == LearningMode::reward) row["b_rand_fnv1a"] = model.b_rand_checksum;
    if (extract) {
      const auto m = extract_mask(model.weights.recurrent.cwiseProduct(mask.m), cfg.theta);
      save_mask(stage.path(dir / "mask.txt"), m, "config_sha256=" + sum);
      row["mask_edges"] = static_cast<std::int64_t>(m.m.sum());
    }
    if (cfg.topology == Topology::mask) {
      const auto after = mask_digest(seed_path(cfg.mask, seed));
      if (after != mask_before[seed]) throw TrainingFault("frozen mask file changed during training");
      row["mask_sha256"] = after;
    }
    finals.push_back(model.rows.back().test_acc);
    per_seed.push_back(row);
  }
  write_text(stage.path("metrics.csv"), csv);
  ojson report;
  report["config_sha256"] = sum;
  report["command"] = command;
  report["mode"] = mode_label(cfg.network, cfg.learning);
  report["topology"] = std::string(to_string(cfg.topology));
  report["per_seed"] = per_seed;
  report["test_acc"] = mean_std_json(finals);
  write_text(stage.path("report.json"), report.dump(2) + "\n");
  return {stage.commit(), report};
}

}  // namespace

CommandResult cmd_train_single(const ExperimentConfig& cfg) {
  coverage::mark("cmd_train_single");
  if (cfg.network.mode == ModalityMode::multi) {
    throw ConfigError("train-single needs network.mode visual or auditory");
  }
  return run_training(cfg, "train-single", true);
}

CommandResult cmd_train_multi(const ExperimentConfig& cfg) {
  coverage::mark("cmd_train_multi");
  if (cfg.network.mode != ModalityMode::multi) throw ConfigError("train-multi needs network.mode multi");
  if (cfg.topology != Topology::mask) {
    throw ConfigError("train-multi trains with a frozen mask; set topology to 'mask'");
  }
  return run_training(cfg, "train-multi", false);
}

CommandResult cmd_census(const ExperimentConfig& cfg) {
  coverage::mark("cmd_census");
  require_set(cfg.checkpoint, "checkpoint");
  for (auto s : cfg.seeds) require_file(seed_path(cfg.checkpoint, s), "checkpoint");
  const auto sum = cfg.checksum();
  Stage stage(cfg.out, "census");
  write_config(stage, cfg, "census");
  ojson summary = ojson::array();
  for (auto seed : cfg.seeds) {
    const auto model = load_model(seed_path(cfg.checkpoint, seed));
    const Matrix w = model.weights.recurrent.cwiseProduct(model.mask.m);
    const auto adj = binarize(normalize_weights(w), cfg.theta);
    const auto census = analyze(adj, cfg.null_graphs, derive_seed(seed, kNullTag));
    std::ostringstream os;
    write_census_json(os, census);
    ojson j;
    j["config_sha256"] = sum;
    j["seed"] = seed;
    j["nodes"] = adj.size();
    j["edges"] = adj.edge_count();
    j["null_graphs"] = cfg.null_graphs;
    j["classes"] = ojson::parse(os.str());
    write_text(stage.path("seed" + std::to_string(seed) + "/census.json"), j.dump(2) + "\n");
    save_mask(stage.path("seed" + std::to_string(seed) + "/mask.txt"),
              extract_mask(w, cfg.theta), "config_sha256=" + sum);
    summary.push_back({{"seed", seed}, {"edges", adj.edge_count()}});
  }
  return {stage.commit(), summary};
}

CommandResult cmd_integrate(const ExperimentConfig& cfg) {
  coverage::mark("cmd_integrate");
  require_set(cfg.mask_s, "mask_s");
  require_set(cfg.mask_t, "mask_t");
  for (auto s : cfg.seeds) {
    require_file(seed_path(cfg.mask_s, s), "visual mask");
    require_file(seed_path(cfg.mask_t, s), "auditory mask");
  }
  const auto sum = cfg.checksum();
  Stage stage(cfg.out, "integrate");
  write_config(stage, cfg, "integrate");
  ojson summary = ojson::array();
  for (auto seed : cfg.seeds) {
    const auto m = integrate_masks(load_mask(seed_path(cfg.mask_s, seed)),
                                   load_mask(seed_path(cfg.mask_t, seed)));
    save_mask(stage.path("seed" + std::to_string(seed) + "/mask_integrated.txt"), m,
              "config_sha256=" + sum);
    summary.push_back({{"seed", seed}, {"mass", m.m.sum()}});
  }
  return {stage.commit(), summary};
}

CommandResult cmd_noise_eval(const ExperimentConfig& cfg) {
  coverage::mark("cmd_noise_eval");
  require_set(cfg.ff_checkpoint, "ff_checkpoint");
  require_set(cfg.motif_checkpoint, "motif_checkpoint");
  for (auto s : cfg.seeds) {
    require_file(seed_path(cfg.ff_checkpoint, s), "FF checkpoint");
    require_file(seed_path(cfg.motif_checkpoint, s), "FF-Motif checkpoint");
  }
  if (cfg.noise_levels.empty()) throw ConfigError("noise-eval: noise_levels is empty");
  const auto sum = cfg.checksum();
  Stage stage(cfg.out, "noise-eval");
  write_config(stage, cfg, "noise-eval");
  Corpora corpora{cfg, {}, {}};
  const std::pair<const char*, const std::string*> variants[2] = {{"ff", &cfg.ff_checkpoint},
                                                                  {"ff_motif", &cfg.motif_checkpoint}};
  std::string rows = csv_header(cfg) + "topology,level,seed,accuracy\n";
  std::map<std::pair<std::string, double>, std::vector<double>> acc;
  for (auto seed : cfg.seeds) {
    for (const auto& [name, pattern] : variants) {
      const auto model = load_model(seed_path(*pattern, seed));
      const auto data = corpora.for_mode(model.network, seed);
      for (double level : cfg.noise_levels) {
        const auto ev = evaluate(data.test, model.weights, model.mask, model.network, cfg.lif,
                                 derive_seed(seed, kEvalTag), level);
        rows += std::string(name) + "," + fmt(level) + "," + std::to_string(seed) + "," +
                fmt(ev.accuracy) + "\n";
        acc[{name, level}].push_back(ev.accuracy);
      }
    }
  }
  std::string table = csv_header(cfg) + "topology,level,mean_accuracy,std_accuracy,seeds\n";
  ojson summary = ojson::array();
  for (const auto& [name, pattern] : variants) {
    for (double level : cfg.noise_levels) {
      const auto& v = acc[{name, level}];
      const auto ms = mean_std(v);
      table += std::string(name) + "," + fmt(level) + "," + fmt(ms.mean) + "," +
               (ms.std ? fmt(*ms.std) : std::string("")) + "," + std::to_string(v.size()) + "\n";
      summary.push_back({{"topology", name}, {"level", level}, {"accuracy", mean_std_json(v)}});
    }
  }
  write_text(stage.path("noise.csv"), rows);
  write_text(stage.path("noise_table.csv"), table);
  return {stage.commit(), summary};
}

CommandResult cmd_mcgurk(const ExperimentConfig& cfg) {
  coverage::mark("cmd_mcgurk");
  require_set(cfg.pbp_checkpoint, "pbp_checkpoint");
  require_set(cfg.reward_checkpoint, "reward_checkpoint");
  for (auto s : cfg.seeds) {
    require_file(seed_path(cfg.pbp_checkpoint, s), "pseudo_bp checkpoint");
    require_file(seed_path(cfg.reward_checkpoint, s), "reward checkpoint");
  }
  const auto sum = cfg.checksum();
  Stage stage(cfg.out, "mcgurk");
  write_config(stage, cfg, "mcgurk");
  Corpora corpora{cfg, {}, {}};
  const auto& vis = corpora.vis().test;
  const auto& aud = corpora.aud().test;
  const auto vis_labels = label_only(vis);
  const auto aud_labels = label_only(aud);

  // Pair sets: audio "two" + image 2, audio "three" + image 3, audio "two" + image 3.
  struct SetSpec {
    const char* name;
    int visual, auditory;
  };
  const SetSpec sets[3] = {{"a2_v2", 2, 2}, {"a3_v3", 3, 3}, {"a2_v3", 3, 2}};

  std::string hist = csv_header(cfg) + "mode,seed,set,bin_lo,bin_hi,density\n";
  std::string dists = csv_header(cfg) + "mode,seed,set,index,distance\n";
  ojson modes;
  const std::pair<const char*, const std::string*> variants[2] = {
      {"pseudo_bp", &cfg.pbp_checkpoint}, {"reward", &cfg.reward_checkpoint}};
  for (const auto& [mode_name, pattern] : variants) {
    ojson per_seed = ojson::array();
    int separated = 0;
    for (auto seed : cfg.seeds) {
      const auto model = load_model(seed_path(*pattern, seed));
      if (model.network.mode != ModalityMode::multi) {
        throw ConfigError("mcgurk: checkpoint " + seed_path(*pattern, seed).string() +
                          " is not a multi-sensory model");
      }
      auto features = [&](int v, int a, std::uint64_t tag) {
        const auto pairs = make_pairs(vis_labels, aud_labels, PairSpec::mismatched(v, a),
                                      cfg.mcgurk_pairs, derive_seed(seed, kPairTag, tag));
        const auto ex = paired_examples(vis, aud, pairs);
        return evaluate(ex, model.weights, model.mask, model.network, cfg.lif,
                        derive_seed(seed, kEvalTag, tag))
            .features;
      };
      // Centroids from one draw of congruent pairs, distances on another.
      const Matrix c2 = features(2, 2, 10).colwise().mean();
      const Matrix c3 = features(3, 3, 11).colwise().mean();
      std::vector<double> d[3];
      for (int k = 0; k < 3; ++k) {
        const Matrix f = features(sets[k].visual, sets[k].auditory, 20 + static_cast<std::uint64_t>(k));
        for (Eigen::Index i = 0; i < f.rows(); ++i) {
          const double to2 = (f.row(i) - c2).norm();
          const double to3 = (f.row(i) - c3).norm();
          const double dist = k == 0 ? to2 : k == 1 ? to3 : std::min(to2, to3);
          d[k].push_back(dist);
          dists += std::string(mode_name) + "," + std::to_string(seed) + "," + sets[k].name + "," +
                   std::to_string(i) + "," + fmt(dist) + "\n";
        }
        const auto edges = fd_bin_edges(d[k]);
        const auto dens = histogram_density(d[k], edges);
        for (std::size_t b = 0; b < dens.size(); ++b) {
          hist += std::string(mode_name) + "," + std::to_string(seed) + "," + sets[k].name + "," +
                  fmt(edges[b]) + "," + fmt(edges[b + 1]) + "," + fmt(dens[b]) + "\n";
        }
      }
      const auto sep = separation_test(d[2], d[0], d[1], cfg.separation_threshold);
      separated += sep.separated ? 1 : 0;
      per_seed.push_back({{"seed", seed},
                          {"median_incongruent", sep.median_incongruent},
                          {"median_congruent", {sep.median_congruent[0], sep.median_congruent[1]}},
                          {"pooled_sd", {sep.pooled_sd[0], sep.pooled_sd[1]}},
                          {"statistic", {sep.statistic[0], sep.statistic[1]}},
                          {"separated", sep.separated}});
    }
    modes[mode_name] = {{"per_seed", per_seed}, {"separated_seeds", separated}};
  }
  ojson out;
  out["config_sha256"] = sum;
  out["threshold"] = cfg.separation_threshold;
  out["pairs_per_set"] = cfg.mcgurk_pairs;
  out["modes"] = modes;
  write_text(stage.path("histograms.csv"), hist);
  write_text(stage.path("distances.csv"), dists);
  write_text(stage.path("mcgurk.json"), out.dump(2) + "\n");
  return {stage.commit(), out};
}

CommandResult cmd_report(const ExperimentConfig& cfg) {
  coverage::mark("cmd_report");
  if (cfg.reports.empty()) throw ConfigError("report: no run reports listed");
  for (const auto& r : cfg.reports) require_file(r, "run report");
  Stage stage(cfg.out, "report");
  write_config(stage, cfg, "report");
  std::string csv = csv_header(cfg) + "run,mode,topology,seed,test_acc\n";
  std::string table = csv_header(cfg) + "run,mode,topology,mean_test_acc,std_test_acc,seeds\n";
  ojson runs = ojson::array();
  for (const auto& path : cfg.reports) {
    const auto j = nlohmann::json::parse(read_text(path));
    std::vector<double> acc;
    const auto mode = j.at("mode").get<std::string>();
    const auto topo = j.at("topology").get<std::string>();
    for (const auto& row : j.at("per_seed")) {
      acc.push_back(row.at("final_test_acc").get<double>());
      csv += path + "," + mode + "," + topo + "," + std::to_string(row.at("seed").get<std::uint64_t>()) +
             "," + fmt(acc.back()) + "\n";
    }
    const auto ms = mean_std(acc);
    table += path + "," + mode + "," + topo + "," + fmt(ms.mean) + "," +
             (ms.std ? fmt(*ms.std) : std::string("")) + "," + std::to_string(acc.size()) + "\n";
    runs.push_back({{"run", path}, {"mode", mode}, {"topology", topo}, {"test_acc", mean_std_json(acc)},
                    {"source_config_sha256", j.value("config_sha256", std::string())}});
  }
  ojson out;
  out["config_sha256"] = cfg.checksum();
  out["runs"] = runs;
  write_text(stage.path("summary_rows.csv"), csv);
  write_text(stage.path("summary.csv"), table);
  write_text(stage.path("summary.json"), out.dump(2) + "\n");
  return {stage.commit(), out};
}

CommandResult cmd_synth_audio(const ExperimentConfig& cfg, int n, const SyntheticAudioOptions& opts) {
  const auto dir = cfg.audio_path();
  const auto ds = synthetic_corpus(SyntheticKind::audio, n, cfg.seeds.front(), opts);
  const auto tmp = dir.string() + ".staging";
  fs::remove_all(tmp);
  try {
    write_spoken_digits(tmp, ds);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
  fs::remove_all(dir);
  fs::create_directories(dir.parent_path().empty() ? fs::path(".") : dir.parent_path());
  fs::rename(tmp, dir);
  ojson out;
  out["dir"] = dir.string();
  out["train"] = ds.train.size();
  out["test"] = ds.test.size();
  out["dataset_sha256"] = ds.checksum();
  return {{dir / kManifestName}, out};
}

}  // namespace mrsnn
