// Acceptance driver: prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
//
//   acceptance --workdir DIR [--only 1,2,7] [--cli PATH]
//
// Criteria 7-10 train the desk-scale pipeline (10k/2k MNIST, the cached
// spoken-digit corpus, 20 epochs, 5 seeds). Each pipeline stage is skipped
// when DIR already holds its outputs for the same config checksum, so a
// second invocation only re-evaluates. Delete DIR to force a full re-run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "../oracles.hpp"
#include "mrsnn/data.hpp"
#include "mrsnn/experiment.hpp"
#include "mrsnn/rng.hpp"

using namespace mrsnn;
namespace fs = std::filesystem;

namespace {

// ---- tolerances -------------------------------------------------------------

constexpr double kCensusSeconds = 60.0;
constexpr double kKsMax = 0.1;
constexpr double kPlantedP = 0.05;
constexpr double kFdRelErr = 1e-4;
constexpr double kSigmas = 3.0;
constexpr double kMelRelTol = 1e-9;
constexpr double kVisualMin = 0.92;
constexpr double kAuditoryMin = 0.85;
constexpr double kNoiseGapMin = 0.02;
constexpr double kNoiseLevel = 0.8;
constexpr int kMcGurkSeedsMin = 4;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Adjacency random_digraph(int n, double p, Rng& rng) {
  Adjacency a(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && uniform01(rng) < p) a.set(i, j);
  return a;
}

// ---- 1. census oracle ---------------------------------------------------------

Verdict census_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  int mismatches = 0, incomplete = 0;
  for (int g = 0; g < 100; ++g) {
    const int n = 3 + static_cast<int>(uniform_index(rng, 23));
    const double p = 0.05 * static_cast<double>(1 + uniform_index(rng, 10));
    const auto a = random_digraph(n, p, rng);
    const auto ref = oracle::census(a);
    const auto fast = triad_census(a);
    if (fast != ref.counts || triad_census_sparse(a) != ref.counts) ++mismatches;
    if (connected_triples(fast) + ref.disconnected != choose3(n)) ++incomplete;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && incomplete == 0 && secs < kCensusSeconds,
          fmt("100 graphs, %d census mismatches, %d incomplete, %.1f s (limit %.0f s)", mismatches,
              incomplete, secs, kCensusSeconds)};
}

// ---- 2. null calibration --------------------------------------------------------

// Pooled KS distance of the 13 class p-values of 200 G(n,p) graphs tested
// against their own null model.
double self_null_ks(double density, int n_random) {
  constexpr int N = 30;
  std::vector<double> all;
  for (int g = 0; g < 200; ++g) {
    Rng rng(derive_seed(77, static_cast<std::uint64_t>(g)));
    Adjacency a(N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j)
        if (i != j) a.set(i, j, uniform01(rng) < density);
    const auto p = null_pvalues(triad_census(a), N, a.edge_count(), n_random,
                                derive_seed(5, static_cast<std::uint64_t>(g)));
    all.insert(all.end(), p.begin(), p.end());
  }
  return oracle::ks_uniform(all);
}

Verdict null_calibration() {
  constexpr int kNulls = 2000;
  const double ks_sparse = self_null_ks(0.1, kNulls);
  const double ks_mid = self_null_ks(0.2, kNulls);
  const double ks_half = self_null_ks(0.5, kNulls);

  Rng rng(31);
  auto g = random_digraph(50, 0.05, rng);
  for (int t = 0; t + 2 < 48; t += 3)
    for (int i = t; i < t + 3; ++i)
      for (int j = t; j < t + 3; ++j)
        if (i != j) g.set(i, j);
  const double planted = analyze(g, kNulls, 5).p_values[12];

  // Density 0.1 is reported only: most classes have zero counts in both the
  // observed graph and every null, which pins p = 1 and is not a calibration
  // failure. See the decisions ledger.
  return {ks_mid < kKsMax && ks_half < kKsMax && planted < kPlantedP,
          fmt("KS at density 0.2 = %.3f, 0.5 = %.3f (limit %.2f; 0.1 = %.3f reported only); "
              "planted reciprocal triangles p = %.4f (limit %.2f)",
              ks_mid, ks_half, kKsMax, ks_sparse, planted, kPlantedP)};
}

// ---- 3. mask algebra --------------------------------------------------------------

Verdict mask_algebra() {
  Rng rng(13);
  int bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 4 + static_cast<int>(uniform_index(rng, 20));
    Matrix a = Matrix::Zero(n, n), b = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) {
          a(i, j) = uniform01(rng) < 0.5 ? 1.0f : 0.0f;
          b(i, j) = uniform01(rng) < 0.5 ? 1.0f : 0.0f;
        }
    const auto m = integrate_masks({a}, {b});
    bool ok = true;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) ok = ok && m.m(i, j) == (a(i, j) + b(i, j)) / 2.0f;
    ok = ok && integrate_masks({b}, {a}) == m && integrate_masks({a}, {a}).m == a;
    bad += ok ? 0 : 1;
  }

  // 100 single-sample optimizer steps under both rules and both optimizers.
  NetworkConfig cfg;
  cfg.conv_channels = 2;
  cfg.hidden_size = 12;
  cfg.timesteps = 8;
  cfg.visual_height = cfg.visual_width = 6;
  MotifMask mask = MotifMask::full(12);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j)
      if (uniform01(rng) < 0.5) mask.m(i, j) = 0.0f;
  std::vector<Example> data(100);
  for (auto& e : data) {
    e.visual.resize(36);
    for (auto& x : e.visual) x = static_cast<float>(uniform01(rng));
    e.label = static_cast<int>(uniform_index(rng, 10));
  }
  int moved_masked = 0, runs_without_free_change = 0;
  for (auto mode : {LearningMode::pseudo_bp, LearningMode::reward}) {
    for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam}) {
      auto w = NetworkWeights::initialize(cfg, 8);
      const auto w0 = w;
      TrainConfig tc;
      tc.mode = mode;
      tc.optimizer = kind;
      tc.lr = 0.05;
      tc.batch_size = 1;
      const auto rl = RewardLearningState::initialize(12, 10, 2, 0.05, 0.05);
      Optimizer opt(kind, 0.05, 0.05);
      train_epoch(data, w, mask, cfg, LifParams{}, tc, opt, &rl, 0, 1);
      bool free_moved = false;
      for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j) {
          const bool same = std::memcmp(&w.recurrent(i, j), &w0.recurrent(i, j), sizeof(float)) == 0;
          if (mask.m(i, j) == 0.0f) moved_masked += same ? 0 : 1;
          else free_moved = free_moved || !same;
        }
      runs_without_free_change += free_moved ? 0 : 1;
    }
  }
  return {bad == 0 && moved_masked == 0 && runs_without_free_change == 0,
          fmt("1000 mask pairs, %d algebra violations; 4 x 100 training steps, %d masked weights "
              "changed, %d runs left free weights untouched",
              bad, moved_masked, runs_without_free_change)};
}

// ---- 4. dynamics ------------------------------------------------------------------

Vector scalar(float x) {
  Vector v(1);
  v << x;
  return v;
}

Verdict dynamics() {
  const LifParams p;
  std::vector<std::string> failed;

  // Reset: a neuron at threshold fires and returns to v_reset.
  {
    auto st = LayerState::at_rest(2, p);
    st.v_f << static_cast<float>(p.v_th), 0.49f;
    const auto fr = fire_and_reset(st, 1, p);
    if (!(fr.spikes[0] == 1.0f && fr.state.v_f[0] == static_cast<float>(p.v_reset) &&
          fr.spikes[1] == 0.0f && fr.state.v_f[1] == 0.49f)) {
      failed.push_back("reset");
    }
  }
  // Refractory: with tau_ref = 2 the flag is held one extra step.
  {
    LifParams held = p;
    held.tau_ref = 2.0;
    auto st = LayerState::at_rest(1, held);
    st.v_f << 0.7f;
    const auto a = fire_and_reset(st, 5, held);
    const auto b = fire_and_reset(a.state, 6, held);
    const auto c = fire_and_reset(b.state, 7, held);
    if (!(a.spikes[0] == 1.0f && b.spikes[0] == 1.0f && c.spikes[0] == 0.0f)) failed.push_back("refractory");
  }
  // Leak to rest is monotone, zero input at rest is a fixed point.
  {
    auto st = LayerState::at_rest(1, p);
    st.v_f << 0.45f;
    float prev = st.v_f[0];
    bool mono = true;
    for (int t = 1; t <= 50; ++t) {
      st = step_feedforward(st, Vector::Zero(1), Matrix::Zero(1, 1), p);
      mono = mono && st.v_f[0] < prev && st.v_f[0] > static_cast<float>(p.v_rest);
      prev = st.v_f[0];
      st = fire_and_reset(st, t, p).state;
    }
    if (!mono) failed.push_back("leak monotonicity");
    auto rest = LayerState::at_rest(3, p);
    const auto next = step_feedforward(rest, Vector::Zero(4), Matrix::Ones(3, 4), p);
    if (!(next.v_f == rest.v_f) || fire_and_reset(next, 1, p).spikes.sum() != 0.0f) {
      failed.push_back("zero-input fixed point");
    }
  }
  // First spike under constant current equals the double-precision Euler oracle.
  int first_mismatch = 0;
  for (float current : {0.11f, 0.15f, 0.2f, 0.3f, 0.5f, 1.0f}) {
    auto st = LayerState::at_rest(1, p);
    int first = -1;
    for (int t = 1; t <= 28 && first < 0; ++t) {
      st = step_feedforward(st, scalar(current), Matrix::Ones(1, 1), p);
      auto fr = fire_and_reset(st, t, p);
      if (fr.spikes[0] > 0.0f) first = t;
      st = fr.state;
    }
    double v = p.v_rest;
    int oracle_first = -1;
    for (int t = 1; t <= 28 && oracle_first < 0; ++t) {
      v += (p.dt / p.capacitance) * (-p.leak_conductance * (v - p.v_rest) + static_cast<double>(current));
      if (v >= p.v_th) oracle_first = t;
    }
    first_mismatch += first == oracle_first ? 0 : 1;
  }
  if (first_mismatch) failed.push_back(fmt("first-spike time (%d currents)", first_mismatch));

  std::string detail = failed.empty() ? "reset, refractory, leak monotonicity, zero-input fixed point, "
                                        "first-spike time for 6 currents all match"
                                      : "failed:";
  for (const auto& f : failed) detail += " " + f;
  return {failed.empty(), detail};
}

// ---- 5. gradients -------------------------------------------------------------------

double readout_loss(const Matrix& spike_sum, const Eigen::MatrixXd& w, std::span<const int> labels) {
  double total = 0.0;
  for (Eigen::Index b = 0; b < spike_sum.rows(); ++b) {
    Eigen::VectorXd z = w * spike_sum.row(b).transpose().cast<double>();
    const double mx = z.maxCoeff();
    double s = 0.0;
    for (Eigen::Index c = 0; c < z.size(); ++c) s += std::exp(z[c] - mx);
    total += -(z[labels[static_cast<std::size_t>(b)]] - mx - std::log(s));
  }
  return total / static_cast<double>(spike_sum.rows());
}

Verdict gradients() {
  NetworkConfig cfg;
  cfg.hidden_size = 40;
  const LifParams p;
  double worst = 0.0;
  for (int batch = 0; batch < 10; ++batch) {
    const auto w = NetworkWeights::initialize(cfg, 100 + static_cast<std::uint64_t>(batch));
    Rng rng(200 + static_cast<std::uint64_t>(batch));
    std::vector<NetworkInput> inputs;
    std::vector<int> labels;
    for (int i = 0; i < 10; ++i) {
      Example e;
      e.visual.resize(784);
      for (auto& x : e.visual) x = static_cast<float>(uniform01(rng));
      e.label = static_cast<int>(uniform_index(rng, 10));
      inputs.push_back(make_input(e, cfg, derive_seed(static_cast<std::uint64_t>(batch), static_cast<std::uint64_t>(i))));
      labels.push_back(e.label);
    }
    std::vector<const NetworkInput*> ptrs;
    for (const auto& in : inputs) ptrs.push_back(&in);
    BatchTrace trace;
    const auto out = run_batch(ptrs, w, MotifMask::full(40), cfg, p, &trace);
    const auto ce = cross_entropy(out.logits, labels);
    const auto g = bptt_gradients(trace, ce.d_logits, w, MotifMask::full(40), cfg, p);
    Eigen::MatrixXd wd = w.readout.cast<double>();
    const double h = 1e-5;
    double num = 0.0, den = 0.0;
    for (Eigen::Index c = 0; c < wd.rows(); ++c) {
      for (Eigen::Index j = 0; j < wd.cols(); ++j) {
        const double keep = wd(c, j);
        wd(c, j) = keep + h;
        const double lp = readout_loss(trace.spike_sum, wd, labels);
        wd(c, j) = keep - h;
        const double lm = readout_loss(trace.spike_sum, wd, labels);
        wd(c, j) = keep;
        const double fd = (lp - lm) / (2 * h);
        num += (g.readout(c, j) - fd) * (g.readout(c, j) - fd);
        den += fd * fd;
      }
    }
    worst = std::max(worst, den > 0.0 ? std::sqrt(num / den) : INFINITY);
  }

  // Window is open strictly inside (V_th - V_win, V_th + V_win).
  Vector v(3);
  v << static_cast<float>(p.v_th), static_cast<float>(p.v_th - p.v_win), static_cast<float>(p.v_th + p.v_win);
  const Vector s = surrogate_grad(v, p);
  const bool table = s[0] == 1.0f && s[1] == 0.0f && s[2] == 0.0f;

  // B_rand is left untouched by reward training.
  NetworkConfig small;
  small.conv_channels = 2;
  small.hidden_size = 10;
  small.timesteps = 6;
  small.visual_height = small.visual_width = 6;
  auto rl = RewardLearningState::initialize(10, 10, 3, 0.01, 0.01);
  const auto before = rl.checksum();
  std::vector<Example> data(40);
  Rng rng(4);
  for (auto& e : data) {
    e.visual.resize(36);
    for (auto& x : e.visual) x = static_cast<float>(uniform01(rng));
    e.label = static_cast<int>(uniform_index(rng, 10));
  }
  auto w = NetworkWeights::initialize(small, 2);
  TrainConfig tc;
  tc.mode = LearningMode::reward;
  tc.batch_size = 4;
  Optimizer opt(OptimizerKind::sgd, 0.01, 0.01);
  for (int e = 0; e < 3; ++e) train_epoch(data, w, MotifMask::full(10), small, p, tc, opt, &rl, e, 1);
  const bool invariant = rl.checksum() == before;

  return {worst < kFdRelErr && table && invariant,
          fmt("readout FD worst relative error %.2e over 10 batches (limit %.0e); surrogate at "
              "{V_th, V_th-V_win, V_th+V_win} = {%g, %g, %g} (want 1, 0, 0); B_rand checksum %s",
              worst, kFdRelErr, s[0], s[1], s[2], invariant ? "unchanged" : "CHANGED")};
}

// ---- 6. encoders ----------------------------------------------------------------------

std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x) {
  const auto n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      out[k] += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * i % n) / static_cast<double>(n));
  return out;
}

Verdict encoders() {
  std::vector<std::string> notes;
  bool ok = true;
  const std::size_t T = 10000;
  double worst_z = 0.0;
  for (float rate : {0.05f, 0.3f, 0.5f, 0.9f}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const std::vector<float> v{rate};
      const double r = static_cast<double>(bernoulli_encode(v, T, seed).count()) / T;
      const double z = std::abs(r - rate) / std::sqrt(rate * (1.0 - rate) / T);
      worst_z = std::max(worst_z, z);
    }
  }
  ok = ok && worst_z <= kSigmas;
  notes.push_back(fmt("Bernoulli worst |z| %.2f", worst_z));

  const std::size_t n = 100000;
  Rng rng(2);
  std::vector<float> img(n);
  for (auto& x : img) x = static_cast<float>(uniform01(rng));
  double worst_noise_z = 0.0;
  for (double level : {0.2, 0.5, 0.8}) {
    const auto r = inject_noise_with_mask(img, level, 17);
    std::size_t replaced = 0;
    for (std::size_t i = 0; i < n; ++i) {
      replaced += r.replaced[i];
      if (!r.replaced[i] && std::memcmp(&r.values[i], &img[i], sizeof(float)) != 0) ok = false;
    }
    const double frac = static_cast<double>(replaced) / n;
    worst_noise_z = std::max(worst_noise_z, std::abs(frac - level) / std::sqrt(level * (1 - level) / n));
  }
  ok = ok && worst_noise_z <= kSigmas;
  notes.push_back(fmt("noise fraction worst |z| %.2f", worst_noise_z));

  const double sr = 8000;
  const int nfft = 512, filters = 26;
  const auto centres = mel_center_frequencies(sr, filters);
  int peak_miss = 0;
  double worst_rel = 0.0;
  for (int band = 2; band < filters - 1; band += 2) {
    std::vector<double> frame(nfft);
    for (int i = 0; i < nfft; ++i) {
      frame[static_cast<std::size_t>(i)] = std::sin(2.0 * std::numbers::pi * centres[static_cast<std::size_t>(band)] * i / sr) *
                                            (0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (nfft - 1)));
    }
    const auto e = mel_energies(frame, nfft, sr, filters);
    std::vector<std::complex<double>> c(frame.begin(), frame.end());
    const auto spec = naive_dft(c);
    Eigen::VectorXd power(nfft / 2 + 1);
    for (int k = 0; k <= nfft / 2; ++k) power[k] = std::norm(spec[static_cast<std::size_t>(k)]);
    const Eigen::VectorXd ref = mel_filterbank(nfft, sr, filters) * power;
    Eigen::Index arg_ref = 0;
    ref.maxCoeff(&arg_ref);
    const auto arg = std::max_element(e.begin(), e.end()) - e.begin();
    if (arg != band || arg_ref != band) ++peak_miss;
    for (int m = 0; m < filters; ++m) {
      worst_rel = std::max(worst_rel, std::abs(e[static_cast<std::size_t>(m)] - ref[m]) / std::max(1e-300, std::abs(ref[m])));
    }
  }
  ok = ok && peak_miss == 0 && worst_rel <= kMelRelTol;
  notes.push_back(fmt("mel peak misses %d of 12 tones, worst energy rel. error %.1e", peak_miss, worst_rel));

  std::string d;
  for (const auto& s : notes) d += (d.empty() ? "" : "; ") + s;
  return {ok, d + fmt(" (limits %.0f sigma, %.0e)", kSigmas, kMelRelTol)};
}

// ---- pipeline (7-10) -----------------------------------------------------------------

struct Pipeline {
  fs::path dir;
  ExperimentConfig base;
  std::string error;  // set when a stage threw
  bool ran = false;

  ExperimentConfig at(const std::string& name) const {
    auto c = base;
    c.out = (dir / name).string();
    return c;
  }

  // Runs `fn` unless the stage already completed with this config.
  void stage(const std::string& name, const ExperimentConfig& cfg,
             const std::function<CommandResult(const ExperimentConfig&)>& fn) {
    if (!error.empty()) return;
    const auto marker = dir / (name + ".done");
    if (fs::exists(marker) && slurp(marker) == cfg.checksum()) {
      std::printf("  stage %-12s cached\n", name.c_str());
      return;
    }
    std::printf("  stage %-12s running\n", name.c_str());
    std::fflush(stdout);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(cfg);
    } catch (const std::exception& e) {
      error = name + ": " + e.what();
      return;
    }
    const double secs = seconds_since(t0);
    std::ofstream(marker) << cfg.checksum();
    std::ofstream(dir / (name + ".seconds")) << secs << '\n';
    std::printf("  stage %-12s done in %.0f s\n", name.c_str(), secs);
    std::fflush(stdout);
  }

  void run() {
    ran = true;
    fs::create_directories(dir);
    const auto seed_ckpt = [&](const char* run) { return (dir / run / "seed{seed}/model.ckpt").string(); };
    const auto seed_mask = [&](const char* run) { return (dir / run / "seed{seed}/mask.txt").string(); };

    auto vis = at("visual");
    vis.network.mode = ModalityMode::visual;
    stage("visual", vis, cmd_train_single);
    auto aud = at("auditory");
    aud.network.mode = ModalityMode::auditory;
    stage("auditory", aud, cmd_train_single);

    auto cen_v = at("census_visual");
    cen_v.checkpoint = seed_ckpt("visual");
    stage("census_visual", cen_v, cmd_census);
    auto cen_a = at("census_auditory");
    cen_a.checkpoint = seed_ckpt("auditory");
    stage("census_auditory", cen_a, cmd_census);

    auto integ = at("integrate");
    integ.mask_s = seed_mask("visual");
    integ.mask_t = seed_mask("auditory");
    stage("integrate", integ, cmd_integrate);

    auto multi = at("multi");
    multi.network.mode = ModalityMode::multi;
    multi.topology = Topology::mask;
    multi.mask = (dir / "integrate/seed{seed}/mask_integrated.txt").string();
    stage("multi", multi, cmd_train_multi);

    auto ff = at("ff");
    ff.topology = Topology::ff;
    stage("ff", ff, cmd_train_single);
    auto ffm = at("ff_motif");
    ffm.topology = Topology::mask;
    ffm.mask = seed_mask("visual");
    stage("ff_motif", ffm, cmd_train_single);

    auto noise = at("noise");
    noise.noise_levels = {0.0, kNoiseLevel};
    noise.ff_checkpoint = seed_ckpt("ff");
    noise.motif_checkpoint = seed_ckpt("ff_motif");
    stage("noise", noise, cmd_noise_eval);

    auto reward = multi;
    reward.out = (dir / "multi_reward").string();
    reward.learning = LearningMode::reward;
    stage("multi_reward", reward, cmd_train_multi);

    auto mg = at("mcgurk");
    mg.network.mode = ModalityMode::multi;
    mg.pbp_checkpoint = seed_ckpt("multi");
    mg.reward_checkpoint = seed_ckpt("multi_reward");
    stage("mcgurk", mg, cmd_mcgurk);

    auto rep = at("report");
    rep.reports = {(dir / "visual/report.json").string(), (dir / "auditory/report.json").string(),
                   (dir / "multi/report.json").string(), (dir / "multi_reward/report.json").string(),
                   (dir / "ff/report.json").string(), (dir / "ff_motif/report.json").string()};
    stage("report", rep, cmd_report);
  }

  std::vector<double> finals(const char* run) const {
    const auto j = nlohmann::json::parse(slurp(dir / run / "report.json"));
    std::vector<double> v;
    for (const auto& row : j.at("per_seed")) v.push_back(row.at("final_test_acc").get<double>());
    return v;
  }
};

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt("%.4f", x);
  return s;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? NAN : s / static_cast<double>(v.size());
}

// Training time recorded when the stage last ran, NAN when unknown.
double stage_seconds(const Pipeline& pl, const char* run) {
  std::ifstream in(pl.dir / (std::string(run) + ".seconds"));
  double s = NAN;
  in >> s;
  return s;
}

Verdict single_sensory(const Pipeline& pl) {
  const double minutes = (stage_seconds(pl, "visual") + stage_seconds(pl, "auditory")) / 60.0;
  const auto v = pl.finals("visual");
  const auto a = pl.finals("auditory");
  const bool ok = v.size() == 5 && a.size() == 5 && *std::min_element(v.begin(), v.end()) >= kVisualMin &&
                  *std::min_element(a.begin(), a.end()) >= kAuditoryMin;
  return {ok, fmt("visual per seed [%s] (each >= %.2f); auditory per seed [%s] (each >= %.2f); "
                  "visual + auditory training took %.0f min on this machine",
                  list(v).c_str(), kVisualMin, list(a).c_str(), kAuditoryMin, minutes)};
}

Verdict integration(const Pipeline& pl) {
  const double v = mean(pl.finals("visual")), a = mean(pl.finals("auditory")), m = mean(pl.finals("multi"));
  return {m >= std::max(v, a), fmt("multi mean %.4f vs visual %.4f, auditory %.4f", m, v, a)};
}

Verdict robustness(const Pipeline& pl) {
  std::istringstream in(slurp(pl.dir / "noise/noise.csv"));
  std::string line;
  std::map<std::string, std::vector<double>> at_level, clean;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("topology", 0) == 0) continue;
    std::stringstream ss(line);
    std::string topo, level, seed, acc;
    std::getline(ss, topo, ',');
    std::getline(ss, level, ',');
    std::getline(ss, seed, ',');
    std::getline(ss, acc, ',');
    const double l = std::stod(level);
    if (std::abs(l - kNoiseLevel) < 1e-9) at_level[topo].push_back(std::stod(acc));
    if (l == 0.0) clean[topo].push_back(std::stod(acc));
  }
  const double ff = mean(at_level["ff"]), motif = mean(at_level["ff_motif"]);
  const double gap = motif - ff;
  return {at_level["ff"].size() == 5 && at_level["ff_motif"].size() == 5 && gap >= kNoiseGapMin,
          fmt("noise %.1f: FF-Motif %.4f, FF %.4f, gap %+.2f points (need >= %+.0f); clean FF-Motif "
              "%.4f, FF %.4f",
              kNoiseLevel, motif, ff, 100 * gap, 100 * kNoiseGapMin, mean(clean["ff_motif"]),
              mean(clean["ff"]))};
}

Verdict mcgurk(const Pipeline& pl) {
  const auto j = nlohmann::json::parse(slurp(pl.dir / "mcgurk/mcgurk.json"));
  const auto& r = j.at("modes").at("reward").at("per_seed");
  const auto& b = j.at("modes").at("pseudo_bp").at("per_seed");
  int good = 0, reward_sep = 0, pbp_sep = 0;
  std::string stats;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const bool rs = r[i].at("separated").get<bool>();
    const bool bs = b[i].at("separated").get<bool>();
    reward_sep += rs;
    pbp_sep += bs;
    good += rs && !bs;
    stats += fmt("%s[r %.2f/%.2f, p %.2f/%.2f]", stats.empty() ? "" : " ",
                 r[i].at("statistic")[0].get<double>(), r[i].at("statistic")[1].get<double>(),
                 b[i].at("statistic")[0].get<double>(), b[i].at("statistic")[1].get<double>());
  }
  return {good >= kMcGurkSeedsMin,
          fmt("%d of %zu seeds with reward separated and pseudo_bp not (need >= %d); reward separated "
              "in %d, pseudo_bp in %d; statistics %s (threshold %.1f)",
              good, r.size(), kMcGurkSeedsMin, reward_sep, pbp_sep, stats.c_str(),
              j.at("threshold").get<double>())};
}

// ---- 11. CLI determinism -----------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
  }
  return out;
}

Verdict cli_determinism(const fs::path& dir, const std::string& cli, const ExperimentConfig& base) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto small = base;
  small.train_limit = 300;
  small.test_limit = 100;
  small.epochs = 1;
  small.seeds = {1, 2};
  small.null_graphs = 50;
  small.mcgurk_pairs = 20;
  small.out = (dir / "unused").string();
  const auto cfg_path = dir / "config.json";
  std::ofstream(cfg_path) << small.to_json().dump(2);

  auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  const auto d = [&](const char* s) { return dir / s; };
  struct Cmd {
    const char* out;
    std::string args;
  };
  const std::vector<Cmd> cmds = {
      {"visual", "train-single --mode visual"},
      {"auditory", "train-single --mode auditory"},
      {"census", "census --checkpoint " + q(d("visual") / "seed{seed}/model.ckpt")},
      {"integrate", "integrate --mask-s " + q(d("visual") / "seed{seed}/mask.txt") + " --mask-t " +
                        q(d("auditory") / "seed{seed}/mask.txt")},
      {"multi", "train-multi --mode multi --topology mask --mask " +
                    q(d("integrate") / "seed{seed}/mask_integrated.txt")},
      {"multi_reward", "train-multi --mode multi --learning reward --topology mask --mask " +
                           q(d("integrate") / "seed{seed}/mask_integrated.txt")},
      {"ff", "train-single --mode visual --topology ff"},
      {"ff_motif", "train-single --mode visual --topology mask --mask " + q(d("visual") / "seed{seed}/mask.txt")},
      {"noise", "noise-eval --levels 0 0.8 --ff-checkpoint " + q(d("ff") / "seed{seed}/model.ckpt") +
                    " --motif-checkpoint " + q(d("ff_motif") / "seed{seed}/model.ckpt")},
      {"mcgurk", "mcgurk --mode multi --pbp-checkpoint " + q(d("multi") / "seed{seed}/model.ckpt") +
                     " --reward-checkpoint " + q(d("multi_reward") / "seed{seed}/model.ckpt")},
      {"report", "report --report " + q(d("visual") / "report.json") + " --report " +
                     q(d("multi") / "report.json")},
  };
  std::vector<std::string> failed;
  std::size_t files = 0;
  for (const auto& c : cmds) {
    const auto out = d(c.out);
    const auto cmd = q(cli) + " " + c.args + " --config " + q(cfg_path) + " --out " + q(out) + " > " +
                     q(dir / (std::string(c.out) + ".log")) + " 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      failed.push_back(std::string(c.out) + " (exit)");
      continue;
    }
    const auto first = snapshot(out);
    if (std::system(cmd.c_str()) != 0) {
      failed.push_back(std::string(c.out) + " (second exit)");
      continue;
    }
    if (snapshot(out) != first || first.empty()) failed.push_back(std::string(c.out) + " (differs)");
    files += first.size();
  }
  std::string detail = fmt("11 subcommand runs repeated, %zu output files compared", files);
  if (!failed.empty()) {
    detail += "; failed:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path workdir = "acceptance_runs";
  std::string cli = MRSNN_CLI_PATH;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--workdir" && i + 1 < argc) workdir = argv[++i];
    else if (a == "--cli" && i + 1 < argc) cli = argv[++i];
    else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else {
      std::fprintf(stderr, "usage: acceptance --workdir DIR [--only 1,2,...] [--cli PATH]\n");
      return 2;
    }
  }
  workdir = fs::absolute(workdir);
  fs::create_directories(workdir);
  auto want = [&](int k) { return only.empty() || only.count(k) > 0; };

  Pipeline pl;
  pl.dir = workdir / "pipeline";
  pl.base.train_limit = 10000;
  pl.base.test_limit = 2000;
  pl.base.noise_levels = {0.0, kNoiseLevel};

  // The spoken-digit substitute corpus is generated on first use.
  const auto audio = pl.base.audio_path();
  if ((want(7) || want(8) || want(10) || want(11)) && !fs::exists(audio / kManifestName)) {
    std::printf("  writing synthetic spoken-digit corpus to %s\n", audio.string().c_str());
    cmd_synth_audio(pl.base, kDefaultSyntheticUtterances, SyntheticAudioOptions{});
  }

  int failures = 0;
  auto report = [&](int k, const char* name, const std::function<Verdict()>& fn) {
    if (!want(k)) return;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    std::printf("[%s] %2d %s: %s (%.0f s)\n", v.pass ? "PASS" : "FAIL", k, name, v.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  };

  report(1, "triad census oracle", census_oracle);
  report(2, "null-model calibration", null_calibration);
  report(3, "mask algebra and freezing", mask_algebra);
  report(4, "LIF dynamics", dynamics);
  report(5, "gradient checks", gradients);
  report(6, "encoder statistics", encoders);

  if (want(7) || want(8) || want(9) || want(10)) pl.run();
  auto guarded = [&](const std::function<Verdict()>& fn) {
    return [&pl, fn]() -> Verdict {
      if (!pl.error.empty()) return {false, "pipeline stage failed: " + pl.error};
      return fn();
    };
  };
  report(7, "single-sensory learning", guarded([&] { return single_sensory(pl); }));
  report(8, "integration trend", guarded([&] { return integration(pl); }));
  report(9, "robustness trend", guarded([&] { return robustness(pl); }));
  report(10, "McGurk separation", guarded([&] { return mcgurk(pl); }));
  report(11, "CLI determinism", [&] { return cli_determinism(workdir / "determinism", cli, pl.base); });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
