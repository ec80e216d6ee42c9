#include "mrsnn/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mrsnn/coverage.hpp"
#include "mrsnn/rng.hpp"

namespace mrsnn {

std::string_view to_string(LearningMode m) {
  return m == LearningMode::pseudo_bp ? "pseudo_bp" : "reward";
}

LearningMode learning_mode_from_string(std::string_view s) {
  if (s == "pseudo_bp") return LearningMode::pseudo_bp;
  if (s == "reward") return LearningMode::reward;
  throw ConfigError("unknown learning mode '" + std::string(s) + "'");
}

Vector surrogate_grad(const Vector& v, const LifParams& params) {
  coverage::mark("surrogate_grad");
  const auto th = static_cast<float>(params.v_th);
  const auto win = static_cast<float>(params.v_win);
  return v.unaryExpr([=](float x) { return kernel::surrogate(x, th, win); });
}

RewardLearningState RewardLearningState::initialize(int hidden, int classes, std::uint64_t seed,
                                                    double eta_f, double eta_r) {
  if (!(eta_f > 0.0 && eta_r > 0.0)) throw ConfigError("reward learning rates must be positive");
  RewardLearningState rl;
  rl.b_rand.resize(hidden, classes);
  Rng rng(derive_seed(seed, 0xB4A9DULL));
  for (Eigen::Index i = 0; i < rl.b_rand.size(); ++i) {
    rl.b_rand.data()[i] = static_cast<float>(uniform01(rng));
  }
  rl.eta_f = eta_f;
  rl.eta_r = eta_r;
  return rl;
}

std::uint64_t RewardLearningState::checksum() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  const auto* p = reinterpret_cast<const unsigned char*>(b_rand.data());
  for (std::size_t i = 0; i < sizeof(float) * static_cast<std::size_t>(b_rand.size()); ++i) {
    h = (h ^ p[i]) * 0x100000001B3ULL;
  }
  return h;
}

Vector reward_gradient(const Vector& hidden_rates, int label, const RewardLearningState& rl) {
  coverage::mark("reward_gradient");
  if (label < 0 || label >= rl.b_rand.cols()) {
    throw DomainError("reward_gradient: label " + std::to_string(label) + " out of range");
  }
  if (hidden_rates.size() != rl.b_rand.rows()) {
    throw DomainError("reward_gradient: hidden size mismatch");
  }
  return rl.b_rand.col(label) - hidden_rates;
}

CrossEntropy cross_entropy(const Matrix& logits, std::span<const int> labels) {
  const auto B = logits.rows();
  CrossEntropy ce;
  ce.d_logits.resize(B, logits.cols());
  double total = 0.0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const int y = labels[static_cast<std::size_t>(b)];
    const double mx = logits.row(b).maxCoeff();
    double z = 0.0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) z += std::exp(logits(b, k) - mx);
    total += -(logits(b, y) - mx - std::log(z));
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      const double p = std::exp(logits(b, k) - mx) / z;
      ce.d_logits(b, k) = static_cast<float>((p - (k == y ? 1.0 : 0.0)) / static_cast<double>(B));
    }
    const auto row = logits.row(b);
    if (argmax_lowest(std::span<const float>(row.data(), static_cast<std::size_t>(row.size()))) == y)
      ++ce.correct;
  }
  ce.loss = total / static_cast<double>(B);
  return ce;
}

namespace {

constexpr std::uint8_t kFlag = 1, kCrossed = 2, kHeld = 4;

const SparseInput& input_of(const NetworkInput& in, Modality m) {
  return m == Modality::visual ? *in.visual : *in.auditory;
}

// dK[tap, c] += scale * sum over (input, tap) of value * delta at the
// conv output the input feeds through that tap.
void conv_kernel_grad(const ConvGeometry& g, const std::vector<std::pair<int, float>>& active,
                      const float* delta, float scale, Matrix& dk) {
  const int C = g.channels, K = g.kernel, ow = g.out_w(), oh = g.out_h();
  for (const auto& [idx, val] : active) {
    const int py = idx / g.in_w, px = idx % g.in_w;
    for (int ky = 0; ky < K; ++ky) {
      const int oy = py - ky;
      if (oy < 0 || oy >= oh) continue;
      for (int kx = 0; kx < K; ++kx) {
        const int ox = px - kx;
        if (ox < 0 || ox >= ow) continue;
        const float* d = delta + static_cast<std::ptrdiff_t>(oy * ow + ox) * C;
        float* out = dk.data() + static_cast<std::ptrdiff_t>(ky * K + kx) * C;
        const float f = scale * val;
        for (int c = 0; c < C; ++c) out[c] += f * d[c];
      }
    }
  }
}

// Spreads a pooled-feature gradient back over the conv neurons it averaged.
void unpool(const ConvGeometry& g, const float* d_pooled, float* d_conv) {
  const int C = g.channels, P = g.pool, ow = g.out_w();
  const float inv = 1.0f / static_cast<float>(P * P);
  std::fill(d_conv, d_conv + g.conv_neurons(), 0.0f);
  for (int py = 0; py < g.pool_h(); ++py) {
    for (int px = 0; px < g.pool_w(); ++px) {
      const float* src = d_pooled + static_cast<std::ptrdiff_t>(py * g.pool_w() + px) * C;
      for (int dy = 0; dy < P; ++dy) {
        for (int dx = 0; dx < P; ++dx) {
          float* dst = d_conv + static_cast<std::ptrdiff_t>((py * P + dy) * ow + px * P + dx) * C;
          for (int c = 0; c < C; ++c) dst[c] = src[c] * inv;
        }
      }
    }
  }
}

}  // namespace

NetworkWeights bptt_gradients(const BatchTrace& trace, const Matrix& d_logits,
                              const NetworkWeights& weights, const MotifMask& mask,
                              const NetworkConfig& cfg, const LifParams& params,
                              const BpttOptions& opts) {
  coverage::mark("bptt_gradients");
  coverage::mark("surrogate_grad");  // applied inline through kernel::surrogate below
  const int B = trace.batch, T = trace.timesteps, H = cfg.hidden_size;
  if (static_cast<int>(trace.hidden.spikes.size()) != T ||
      static_cast<int>(trace.hidden.u_f.size()) != T) {
    throw Error("bptt_gradients: trace is missing timesteps (" +
                std::to_string(trace.hidden.spikes.size()) + " of " + std::to_string(T) + ")");
  }
  const auto a = static_cast<float>(params.euler_factor());
  const auto g = static_cast<float>(params.leak_conductance);
  const auto th = static_cast<float>(params.v_th);
  const auto win = static_cast<float>(params.v_win);
  const float ag = a * g;

  NetworkWeights grad = NetworkWeights::zeros_like(weights);
  const Matrix w_rec = weights.recurrent.cwiseProduct(mask.m);

  Matrix g_out = d_logits * weights.readout;
  if (opts.d_spikes_each_step) g_out += *opts.d_spikes_each_step;
  grad.readout.noalias() = d_logits.transpose() * trace.spike_sum;

  Matrix dvf = Matrix::Zero(B, H), dvr = Matrix::Zero(B, H), dw_next = Matrix::Zero(B, H);
  Matrix dS(B, H), du(B, H), dw(B, H);
  const Matrix zeros_bh = Matrix::Zero(B, H);

  struct ConvBack {
    Modality m;
    const ConvTrace* tr;
    ConvGeometry geo;
    Matrix dv, d_pooled, d_conv;
  };
  std::vector<ConvBack> convs;
  if (opts.input_layers) {
    for (Modality m : {Modality::visual, Modality::auditory}) {
      const auto& ct = m == Modality::visual ? trace.visual : trace.auditory;
      if (!ct) continue;
      if (static_cast<int>(ct->u.size()) != T) throw Error("bptt_gradients: conv trace incomplete");
      const auto geo = geometry(cfg, m);
      convs.push_back({m, &*ct, geo, Matrix::Zero(B, geo.conv_neurons()), Matrix(B, geo.pooled()),
                       Matrix(B, geo.conv_neurons())});
    }
  }

  for (int t = T - 1; t >= 0; --t) {
    dS = g_out;
    dS.noalias() += a * (dw_next * w_rec);
    const Matrix& s_prev = t > 0 ? trace.hidden.spikes[t - 1] : zeros_bh;
    const auto& cf = trace.hidden.code_f[t];
    const auto& cr = trace.hidden.code_r[t];
    const float* uf = trace.hidden.u_f[t].data();
    const float* ur = trace.hidden.u_r[t].data();
    for (std::ptrdiff_t e = 0; e < static_cast<std::ptrdiff_t>(B) * H; ++e) {
      const auto k_f = cf[static_cast<std::size_t>(e)], k_r = cr[static_cast<std::size_t>(e)];
      const float sf = (k_f & kFlag) ? 1.0f : 0.0f;
      const float sr = (k_r & kFlag) ? 1.0f : 0.0f;
      // S = s_f OR s_r, so dS/ds_f = 1 - s_r and vice versa.
      const float dsf = dS.data()[e] * (1.0f - sr);
      const float dsr = dS.data()[e] * (1.0f - sf);
      const float gf = (k_f & kHeld) ? 0.0f : kernel::surrogate(uf[e], th, win);
      const float gr = (k_r & kHeld) ? 0.0f : kernel::surrogate(ur[e], th, win);
      const float duf = dsf * gf + ((k_f & kCrossed) ? 0.0f : dvf.data()[e]);
      const float dwr = dsr * gr + ((k_r & kCrossed) ? 0.0f : dvr.data()[e]);
      const float gate = 1.0f - s_prev.data()[e];
      du.data()[e] = duf;
      dw.data()[e] = dwr;
      dvf.data()[e] = duf * (1.0f - ag * gate);
      dvr.data()[e] = dwr - duf * ag * gate;
    }
    grad.recurrent.noalias() += a * (dw.transpose() * s_prev);

    for (auto& cb : convs) {
      const Pathway& path = weights.pathway(cb.m);
      Pathway& gp = grad.pathway(cb.m);
      gp.ff.noalias() += a * (du.transpose() * cb.tr->pooled[t]);
      cb.d_pooled.noalias() = a * (du * path.ff);
      const int N = cb.geo.conv_neurons();
      const auto& code = cb.tr->code[t];
      const auto* code_prev = t > 0 ? &cb.tr->code[t - 1] : nullptr;
      const float* u = cb.tr->u[t].data();
      for (int b = 0; b < B; ++b) {
        float* dconv = cb.d_conv.row(b).data();
        unpool(cb.geo, cb.d_pooled.row(b).data(), dconv);
        float* dv = cb.dv.row(b).data();
        bool any = false;
        for (int n = 0; n < N; ++n) {
          const std::size_t e = static_cast<std::size_t>(b) * N + n;
          const auto k8 = code[e];
          const float gs = (k8 & kHeld) ? 0.0f : kernel::surrogate(u[e], th, win);
          const float duc = dconv[n] * gs + ((k8 & kCrossed) ? 0.0f : dv[n]);
          const float s_before = (code_prev && ((*code_prev)[e] & kFlag)) ? 1.0f : 0.0f;
          dconv[n] = duc;
          dv[n] = duc * (1.0f - ag * (1.0f - s_before));
          any = any || duc != 0.0f;
        }
        if (any) {
          conv_kernel_grad(cb.geo, input_of(*trace.inputs[b], cb.m).steps[t], dconv, a, gp.conv);
        }
      }
    }
    std::swap(dw_next, dw);
  }
  grad.recurrent = grad.recurrent.cwiseProduct(mask.m);
  return grad;
}

GradientBundle reward_gradients(const BatchTrace& trace, std::span<const int> labels,
                                const CrossEntropy& readout_error, const NetworkWeights& weights,
                                const MotifMask& mask, const RewardLearningState& rl,
                                const NetworkConfig& cfg, const LifParams& params) {
  const int B = trace.batch, T = trace.timesteps;
  const float invB = 1.0f / static_cast<float>(B);
  const Matrix h = trace.spike_sum / static_cast<float>(T);

  GradientBundle out;
  out.grad_r.resize(B, cfg.hidden_size);
  for (int b = 0; b < B; ++b) {
    out.grad_r.row(b) = reward_gradient(h.row(b).transpose(), labels[static_cast<std::size_t>(b)], rl)
                            .transpose();
  }
  // Descent on 0.5 * |h - B_rand R|^2 moves along +Grad_R.
  const Matrix err = -out.grad_r;

  BpttOptions opts;
  opts.d_spikes_each_step = err * (invB / static_cast<float>(T));
  opts.input_layers = false;
  out.bptt = bptt_gradients(trace, Matrix::Zero(B, cfg.output_size), weights, mask, cfg, params,
                            opts);

  out.grad = NetworkWeights::zeros_like(weights);
  out.grad.readout.noalias() = readout_error.d_logits.transpose() * trace.spike_sum;
  out.grad.recurrent = out.bptt->recurrent;
  out.grad.recurrent.noalias() += invB * (err.transpose() * h).cwiseProduct(mask.m);

  for (Modality m : {Modality::visual, Modality::auditory}) {
    const auto& ct = m == Modality::visual ? trace.visual : trace.auditory;
    if (!ct) continue;
    const auto geo = geometry(cfg, m);
    const Pathway& path = weights.pathway(m);
    Pathway& gp = out.grad.pathway(m);
    gp.ff.noalias() = invB * (err.transpose() * ct->mean_pooled);
    // Conv taps learn from Grad_R projected back through the feedforward matrix.
    const Matrix d_pooled = invB * (err * path.ff);
    std::vector<float> d_conv(static_cast<std::size_t>(geo.conv_neurons()));
    std::vector<std::pair<int, float>> active;
    for (int b = 0; b < B; ++b) {
      unpool(geo, d_pooled.row(b).data(), d_conv.data());
      active.clear();
      for (int i = 0; i < geo.inputs(); ++i) {
        if (ct->mean_input(b, i) != 0.0f) active.emplace_back(i, ct->mean_input(b, i));
      }
      conv_kernel_grad(geo, active, d_conv.data(), 1.0f, gp.conv);
    }
  }
  return out;
}

void Optimizer::apply(NetworkWeights& weights, const NetworkWeights& grad, const MotifMask& mask) {
  ++steps_;
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const auto grads = grad.named();
  auto params = weights.named_mut();
  if (grads.size() != params.size()) throw ConfigError("optimizer: gradient/weight layout mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const std::string& name = params[k].first;
    Matrix& w = *params[k].second;
    const Matrix& gmat = *grads[k].second;
    if (gmat.rows() != w.rows() || gmat.cols() != w.cols()) {
      throw ConfigError("optimizer: gradient shape mismatch for " + name);
    }
    const bool recurrent = name == "recurrent";
    const float lr = static_cast<float>(recurrent ? lr_r_ : lr_f_);
    const float* gm = gmat.data();
    float* wd = w.data();
    const float* md = recurrent ? mask.m.data() : nullptr;
    if (kind_ == OptimizerKind::sgd) {
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (md && md[i] == 0.0f) continue;
        wd[i] -= lr * gm[i];
      }
      continue;
    }
    auto& mom = moments_[name];
    if (mom.m.size() == 0) {
      mom.m = Matrix::Zero(w.rows(), w.cols());
      mom.v = Matrix::Zero(w.rows(), w.cols());
    }
    float* m1 = mom.m.data();
    float* m2 = mom.v.data();
    const auto fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
    const auto fc1 = static_cast<float>(c1), fc2 = static_cast<float>(c2);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (md && md[i] == 0.0f) continue;
      m1[i] = fb1 * m1[i] + (1.0f - fb1) * gm[i];
      m2[i] = fb2 * m2[i] + (1.0f - fb2) * gm[i] * gm[i];
      const float step = (m1[i] / fc1) / (std::sqrt(m2[i] / fc2) + static_cast<float>(eps));
      wd[i] -= lr * step;
    }
  }
}

void apply_updates(NetworkWeights& weights, const GradientBundle& bundle, const MotifMask& mask,
                   Optimizer& optimizer) {
  coverage::mark("apply_updates");
  optimizer.apply(weights, bundle.grad, mask);
}

NetworkInput make_input(const Example& ex, const NetworkConfig& cfg, std::uint64_t seed,
                        double noise_level) {
  NetworkInput in;
  for (Modality m : {Modality::visual, Modality::auditory}) {
    if (!cfg.uses(m)) continue;
    const auto& values = m == Modality::visual ? ex.visual : ex.auditory;
    const auto geo = geometry(cfg, m);
    if (static_cast<int>(values.size()) != geo.inputs()) {
      throw ConfigError("make_input: " + std::string(to_string(m)) + " example has " +
                        std::to_string(values.size()) + " values, network expects " +
                        std::to_string(geo.inputs()));
    }
    const std::uint64_t tag = m == Modality::visual ? 0x56 : 0x41;
    std::vector<float> noisy;
    std::span<const float> src(values);
    if (noise_level > 0.0) {
      noisy = inject_noise(values, noise_level, derive_seed(seed, 0x4E01CEULL, tag));
      src = noisy;
    }
    SparseInput sparse;
    if (m == Modality::auditory && cfg.auditory_input == AuditoryInput::current) {
      sparse = constant_input(src, cfg.timesteps);
    } else {
      sparse = to_sparse(bernoulli_encode(src, static_cast<std::size_t>(cfg.timesteps),
                                          derive_seed(seed, 0xE4C0DEULL, tag)));
    }
    (m == Modality::visual ? in.visual : in.auditory) = std::move(sparse);
  }
  return in;
}

EpochMetrics train_epoch(std::span<const Example> data, NetworkWeights& weights,
                         const MotifMask& mask, const NetworkConfig& cfg, const LifParams& params,
                         const TrainConfig& tc, Optimizer& optimizer,
                         const RewardLearningState* rl, int epoch, std::uint64_t seed) {
  coverage::mark("train_epoch");
  if (data.empty()) throw DomainError("train_epoch: dataset is empty");
  if (tc.batch_size < 1) throw ConfigError("train_epoch: batch_size must be >= 1");
  if (tc.mode == LearningMode::reward && !rl) {
    throw ConfigError("train_epoch: reward mode needs a RewardLearningState");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(seed, 0x5F1FULL, static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);
  }

  double loss_sum = 0.0;
  std::int64_t correct = 0;
  std::vector<NetworkInput> inputs;
  std::vector<const NetworkInput*> ptrs;
  std::vector<int> labels;
  BatchTrace trace;
  int batch_index = 0;
  for (std::size_t start = 0; start < order.size(); start += tc.batch_size, ++batch_index) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
    inputs.clear();
    labels.clear();
    for (std::size_t i = start; i < end; ++i) {
      const std::size_t idx = order[i];
      inputs.push_back(make_input(data[idx], cfg,
                                  derive_seed(seed, static_cast<std::uint64_t>(epoch) + 1, idx)));
      labels.push_back(data[idx].label);
    }
    ptrs.clear();
    for (const auto& in : inputs) ptrs.push_back(&in);

    const auto fault = [&](const std::string& why) {
      return TrainingFault("training diverged at epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(batch_index) + ": " + why);
    };
    CrossEntropy ce;
    try {
      run_batch(ptrs, weights, mask, cfg, params, &trace);
      ce = cross_entropy(trace.logits, labels);
    } catch (const NumericFault& e) {
      throw fault(e.what());
    }
    if (!std::isfinite(ce.loss)) throw fault("non-finite loss");
    loss_sum += ce.loss * static_cast<double>(end - start);
    correct += ce.correct;

    GradientBundle bundle;
    if (tc.mode == LearningMode::pseudo_bp) {
      bundle.grad = bptt_gradients(trace, ce.d_logits, weights, mask, cfg, params);
    } else {
      bundle = reward_gradients(trace, labels, ce, weights, mask, *rl, cfg, params);
    }
    apply_updates(weights, bundle, mask, optimizer);
  }
  return {loss_sum / static_cast<double>(data.size()),
          static_cast<double>(correct) / static_cast<double>(data.size())};
}

Evaluation evaluate(std::span<const Example> data, const NetworkWeights& weights,
                    const MotifMask& mask, const NetworkConfig& cfg, const LifParams& params,
                    std::uint64_t seed, double noise_level, int batch_size) {
  coverage::mark("extract_features");
  Evaluation ev;
  ev.features.resize(static_cast<Eigen::Index>(data.size()), cfg.hidden_size);
  ev.predictions.resize(data.size());
  std::int64_t correct = 0;
  double loss_sum = 0.0;
  std::vector<NetworkInput> inputs;
  std::vector<const NetworkInput*> ptrs;
  std::vector<int> labels;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(data.size(), start + static_cast<std::size_t>(batch_size));
    inputs.clear();
    ptrs.clear();
    labels.clear();
    for (std::size_t i = start; i < end; ++i) {
      inputs.push_back(make_input(data[i], cfg, derive_seed(seed, 0xE7A1ULL, i), noise_level));
      labels.push_back(data[i].label);
    }
    for (const auto& in : inputs) ptrs.push_back(&in);
    const auto out = run_batch(ptrs, weights, mask, cfg, params);
    const auto ce = cross_entropy(out.logits, labels);
    loss_sum += ce.loss * static_cast<double>(end - start);
    for (std::size_t i = start; i < end; ++i) {
      const auto row = out.logits.row(static_cast<Eigen::Index>(i - start));
      const int pred =
          argmax_lowest(std::span<const float>(row.data(), static_cast<std::size_t>(row.size())));
      ev.predictions[i] = pred;
      correct += pred == data[i].label ? 1 : 0;
      ev.features.row(static_cast<Eigen::Index>(i)) =
          out.hidden_rates.row(static_cast<Eigen::Index>(i - start));
    }
  }
  if (!data.empty()) {
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    ev.loss = loss_sum / static_cast<double>(data.size());
  }
  return ev;
}

}  // namespace mrsnn
