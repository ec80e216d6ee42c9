#include "mrsnn/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mrsnn/coverage.hpp"

namespace mrsnn {

std::string_view to_string(ModalityMode m) {
  switch (m) {
    case ModalityMode::visual: return "visual";
    case ModalityMode::auditory: return "auditory";
    case ModalityMode::multi: return "multi";
  }
  return "?";
}

ModalityMode modality_mode_from_string(std::string_view s) {
  if (s == "visual") return ModalityMode::visual;
  if (s == "auditory") return ModalityMode::auditory;
  if (s == "multi") return ModalityMode::multi;
  throw ConfigError("unknown modality mode '" + std::string(s) + "'");
}

void NetworkConfig::validate() const {
  if (hidden_size <= 0) throw ConfigError("NetworkConfig: hidden_size must be positive");
  if (output_size != kNumClasses) throw ConfigError("NetworkConfig: output_size must equal 10");
  if (timesteps < 1) throw ConfigError("NetworkConfig: timesteps must be >= 1");
  if (conv_kernel < 1 || conv_channels < 1 || pool < 1) {
    throw ConfigError("NetworkConfig: conv kernel, channels and pool must be positive");
  }
  for (Modality m : {Modality::visual, Modality::auditory}) {
    if (!uses(m)) continue;
    const auto g = geometry(*this, m);
    if (g.out_h() < pool || g.out_w() < pool) {
      throw ConfigError("NetworkConfig: " + std::string(to_string(m)) +
                        " input too small for the conv kernel and pooling");
    }
  }
}

bool NetworkConfig::uses(Modality m) const {
  if (mode == ModalityMode::multi) return true;
  return (mode == ModalityMode::visual) == (m == Modality::visual);
}

ConvGeometry geometry(const NetworkConfig& cfg, Modality m) {
  ConvGeometry g;
  g.in_h = m == Modality::visual ? cfg.visual_height : cfg.auditory_height;
  g.in_w = m == Modality::visual ? cfg.visual_width : cfg.auditory_width;
  g.kernel = cfg.conv_kernel;
  g.channels = cfg.conv_channels;
  g.pool = cfg.pool;
  return g;
}

namespace {

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<float>(uniform(rng, -bound, bound));
  }
}

Matrix init_tensor(int rows, int cols, int fan_in, std::uint64_t seed, std::uint64_t tag) {
  Matrix m(rows, cols);
  Rng rng(derive_seed(seed, 0x1A17ULL, tag));
  fill_uniform(m, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
  return m;
}

}  // namespace

NetworkWeights NetworkWeights::initialize(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  NetworkWeights w;
  const int k2 = cfg.conv_kernel * cfg.conv_kernel;
  for (Modality m : {Modality::visual, Modality::auditory}) {
    if (!cfg.uses(m)) continue;
    const auto g = geometry(cfg, m);
    const std::uint64_t tag = m == Modality::visual ? 1 : 3;
    Pathway p{init_tensor(k2, g.channels, k2, seed, tag),
              init_tensor(cfg.hidden_size, g.pooled(), g.pooled(), seed, tag + 1)};
    (m == Modality::visual ? w.visual : w.auditory) = std::move(p);
  }
  w.recurrent = init_tensor(cfg.hidden_size, cfg.hidden_size, cfg.hidden_size, seed, 5);
  w.readout = init_tensor(cfg.output_size, cfg.hidden_size, cfg.hidden_size, seed, 6);
  return w;
}

NetworkWeights NetworkWeights::zeros_like(const NetworkWeights& w) {
  NetworkWeights z = w;
  for (auto& [name, t] : z.named_mut()) t->setZero();
  return z;
}

std::vector<std::pair<std::string, const Matrix*>> NetworkWeights::named() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  if (visual) {
    out.emplace_back("visual.conv", &visual->conv);
    out.emplace_back("visual.ff", &visual->ff);
  }
  if (auditory) {
    out.emplace_back("auditory.conv", &auditory->conv);
    out.emplace_back("auditory.ff", &auditory->ff);
  }
  out.emplace_back("recurrent", &recurrent);
  out.emplace_back("readout", &readout);
  return out;
}

std::vector<std::pair<std::string, Matrix*>> NetworkWeights::named_mut() {
  std::vector<std::pair<std::string, Matrix*>> out;
  for (auto& [name, ptr] : std::as_const(*this).named()) {
    out.emplace_back(name, const_cast<Matrix*>(ptr));
  }
  return out;
}

bool NetworkWeights::operator==(const NetworkWeights& o) const {
  const auto a = named(), b = o.named();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].first != b[i].first) return false;
    if (a[i].second->rows() != b[i].second->rows() || a[i].second->cols() != b[i].second->cols())
      return false;
    if (std::memcmp(a[i].second->data(), b[i].second->data(),
                    sizeof(float) * static_cast<std::size_t>(a[i].second->size())) != 0)
      return false;
  }
  return true;
}

SparseInput to_sparse(const SpikeTrain& spikes) {
  SparseInput in;
  in.steps.resize(spikes.timesteps());
  for (std::size_t t = 0; t < spikes.timesteps(); ++t) {
    const auto* row = spikes.row(t);
    for (std::size_t i = 0; i < spikes.neurons(); ++i) {
      if (row[i]) in.steps[t].emplace_back(static_cast<int>(i), 1.0f);
    }
  }
  return in;
}

SparseInput constant_input(std::span<const float> values, int timesteps) {
  SparseInput in;
  std::vector<std::pair<int, float>> active;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] != 0.0f) active.emplace_back(static_cast<int>(i), values[i]);
  }
  in.steps.assign(static_cast<std::size_t>(timesteps), active);
  return in;
}

int argmax_lowest(std::span<const float> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = static_cast<int>(i);
  }
  return best;
}

int ForwardRecord::predicted() const {
  return argmax_lowest(std::span<const float>(logits.data(), static_cast<std::size_t>(logits.size())));
}

namespace {

constexpr std::uint8_t kFlag = 1, kCrossed = 2, kHeld = 4;

struct LifConstants {
  float a, g, rest, th, reset;
  double tau_ref;
  explicit LifConstants(const LifParams& p)
      : a(static_cast<float>(p.euler_factor())),
        g(static_cast<float>(p.leak_conductance)),
        rest(static_cast<float>(p.v_rest)),
        th(static_cast<float>(p.v_th)),
        reset(static_cast<float>(p.v_reset)),
        tau_ref(p.tau_ref) {}
};

// Fires one stream element; returns the trace code.
inline std::uint8_t fire(float& v, float& flag, double& last, double time, const LifConstants& c) {
  const bool held = kernel::refractory(time, last, c.tau_ref);
  if (kernel::crosses(v, c.th)) {
    v = c.reset;
    if (!held) last = time;
    flag = 1.0f;
    return static_cast<std::uint8_t>(kFlag | kCrossed | (held ? kHeld : 0));
  }
  flag = held ? 1.0f : 0.0f;
  return held ? static_cast<std::uint8_t>(kFlag | kHeld) : 0;
}

struct ConvState {
  ConvGeometry geo;
  Matrix v, s, cur, pooled;
  std::vector<double> last;
};

ConvState make_conv_state(const ConvGeometry& g, int batch, const LifConstants& c) {
  ConvState st;
  st.geo = g;
  st.v = Matrix::Constant(batch, g.conv_neurons(), c.rest);
  st.s = Matrix::Zero(batch, g.conv_neurons());
  st.cur = Matrix::Zero(batch, g.conv_neurons());
  st.pooled = Matrix::Zero(batch, g.pooled());
  st.last.assign(static_cast<std::size_t>(batch) * g.conv_neurons(), kNeverSpiked);
  return st;
}

const SparseInput& input_of(const NetworkInput& in, Modality m) {
  return m == Modality::visual ? *in.visual : *in.auditory;
}

void scatter_conv(const ConvGeometry& g, const Matrix& kernel_taps,
                  const std::vector<std::pair<int, float>>& active, float* cur) {
  const int C = g.channels, K = g.kernel, ow = g.out_w(), oh = g.out_h();
  for (const auto& [idx, val] : active) {
    const int py = idx / g.in_w, px = idx % g.in_w;
    for (int ky = 0; ky < K; ++ky) {
      const int oy = py - ky;
      if (oy < 0 || oy >= oh) continue;
      for (int kx = 0; kx < K; ++kx) {
        const int ox = px - kx;
        if (ox < 0 || ox >= ow) continue;
        float* dst = cur + static_cast<std::ptrdiff_t>(oy * ow + ox) * C;
        const float* w = kernel_taps.data() + static_cast<std::ptrdiff_t>(ky * K + kx) * C;
        for (int c = 0; c < C; ++c) dst[c] += val * w[c];
      }
    }
  }
}

void pool_spikes(const ConvGeometry& g, const float* s, float* out) {
  const int C = g.channels, P = g.pool, ow = g.out_w();
  const float inv = 1.0f / static_cast<float>(P * P);
  for (int py = 0; py < g.pool_h(); ++py) {
    for (int px = 0; px < g.pool_w(); ++px) {
      float* dst = out + static_cast<std::ptrdiff_t>(py * g.pool_w() + px) * C;
      for (int c = 0; c < C; ++c) dst[c] = 0.0f;
      for (int dy = 0; dy < P; ++dy) {
        for (int dx = 0; dx < P; ++dx) {
          const float* src = s + static_cast<std::ptrdiff_t>((py * P + dy) * ow + px * P + dx) * C;
          for (int c = 0; c < C; ++c) dst[c] += src[c];
        }
      }
      for (int c = 0; c < C; ++c) dst[c] *= inv;
    }
  }
}

void check_weights(const NetworkWeights& w, const MotifMask& mask, const NetworkConfig& cfg) {
  const int H = cfg.hidden_size;
  for (Modality m : {Modality::visual, Modality::auditory}) {
    const bool have = m == Modality::visual ? w.visual.has_value() : w.auditory.has_value();
    if (!cfg.uses(m)) continue;
    if (!have) {
      throw ConfigError("network: missing " + std::string(to_string(m)) + " pathway weights");
    }
    const auto g = geometry(cfg, m);
    const auto& p = w.pathway(m);
    if (p.conv.rows() != g.kernel * g.kernel || p.conv.cols() != g.channels ||
        p.ff.rows() != H || p.ff.cols() != g.pooled()) {
      throw ConfigError("network: " + std::string(to_string(m)) + " pathway shape mismatch");
    }
  }
  if (w.recurrent.rows() != H || w.recurrent.cols() != H) {
    throw ConfigError("network: recurrent weights must be hidden x hidden");
  }
  if (w.readout.rows() != cfg.output_size || w.readout.cols() != H) {
    throw ConfigError("network: readout weights must be classes x hidden");
  }
  if (mask.m.rows() != H || mask.m.cols() != H) {
    throw ConfigError("network: mask must be hidden x hidden");
  }
}

}  // namespace

BatchOutput run_batch(std::span<const NetworkInput* const> inputs, const NetworkWeights& weights,
                      const MotifMask& mask, const NetworkConfig& cfg, const LifParams& params,
                      BatchTrace* trace) {
  coverage::mark("forward");
  // The loop below is the batched form of the per-layer LIF operations.
  coverage::mark("step_feedforward");
  coverage::mark("step_recurrent");
  coverage::mark("fire_and_reset");
  cfg.validate();
  params.validate();
  check_weights(weights, mask, cfg);
  const int B = static_cast<int>(inputs.size());
  const int T = cfg.timesteps;
  const int H = cfg.hidden_size;
  const LifConstants c(params);

  std::vector<Modality> used;
  for (Modality m : {Modality::visual, Modality::auditory}) {
    if (cfg.uses(m)) used.push_back(m);
  }
  for (int b = 0; b < B; ++b) {
    const auto& in = *inputs[b];
    for (Modality m : {Modality::visual, Modality::auditory}) {
      const bool have = m == Modality::visual ? in.visual.has_value() : in.auditory.has_value();
      if (have != cfg.uses(m)) {
        throw ConfigError("network: sample " + std::to_string(b) + " " +
                          (have ? "supplies unexpected " : "lacks ") + std::string(to_string(m)) +
                          " input for mode " + std::string(to_string(cfg.mode)));
      }
      if (have && static_cast<int>(input_of(in, m).steps.size()) != T) {
        throw ConfigError("network: input has " + std::to_string(input_of(in, m).steps.size()) +
                          " timesteps, config expects " + std::to_string(T));
      }
    }
  }

  const Matrix w_rec = weights.recurrent.cwiseProduct(mask.m);

  std::vector<ConvState> conv;
  for (Modality m : used) conv.push_back(make_conv_state(geometry(cfg, m), B, c));

  Matrix v_f = Matrix::Constant(B, H, c.rest);
  Matrix v_r = Matrix::Zero(B, H);
  Matrix s_f = Matrix::Zero(B, H), s_r = Matrix::Zero(B, H);
  Matrix s_prev = Matrix::Zero(B, H);
  Matrix s_now(B, H);
  std::vector<double> last_f(static_cast<std::size_t>(B) * H, kNeverSpiked);
  std::vector<double> last_r(last_f);
  Matrix spike_sum = Matrix::Zero(B, H);
  Matrix drive(B, H), rec(B, H);
  std::vector<std::int64_t> counts(3, 0);

  if (trace) {
    *trace = BatchTrace{};
    trace->batch = B;
    trace->timesteps = T;
    trace->inputs.assign(inputs.begin(), inputs.end());
    for (std::size_t k = 0; k < used.size(); ++k) {
      ConvTrace ct;
      ct.mean_input = Matrix::Zero(B, conv[k].geo.inputs());
      ct.mean_pooled = Matrix::Zero(B, conv[k].geo.pooled());
      (used[k] == Modality::visual ? trace->visual : trace->auditory) = std::move(ct);
    }
  }

  for (int ti = 0; ti < T; ++ti) {
    const double time = (ti + 1) * params.dt;
    drive.setZero();
    for (std::size_t k = 0; k < used.size(); ++k) {
      const Modality m = used[k];
      ConvState& st = conv[k];
      const auto& path = weights.pathway(m);
      const int N = st.geo.conv_neurons();
      st.cur.setZero();
      for (int b = 0; b < B; ++b) {
        scatter_conv(st.geo, path.conv, input_of(*inputs[b], m).steps[ti], st.cur.row(b).data());
      }
      std::vector<std::uint8_t> code;
      if (trace) code.resize(static_cast<std::size_t>(B) * N);
      float* v = st.v.data();
      float* s = st.s.data();
      float* cur = st.cur.data();
      for (std::ptrdiff_t e = 0; e < static_cast<std::ptrdiff_t>(B) * N; ++e) {
        const float u = kernel::feedforward(v[e], 0.0f, s[e], cur[e], c.a, c.g, c.rest);
        v[e] = u;
        cur[e] = u;  // keep the pre-reset potential for the trace
        const std::uint8_t k8 = fire(v[e], s[e], st.last[static_cast<std::size_t>(e)], time, c);
        if (trace) code[static_cast<std::size_t>(e)] = k8;
        counts[m == Modality::visual ? 0 : 1] += (k8 & kCrossed) ? 1 : 0;
      }
      for (int b = 0; b < B; ++b) pool_spikes(st.geo, st.s.row(b).data(), st.pooled.row(b).data());
      drive.noalias() += st.pooled * path.ff.transpose();
      if (trace) {
        ConvTrace& ct = m == Modality::visual ? *trace->visual : *trace->auditory;
        ct.u.push_back(st.cur);
        ct.code.push_back(std::move(code));
        ct.pooled.push_back(st.pooled);
        ct.mean_pooled += st.pooled;
        for (int b = 0; b < B; ++b) {
          for (const auto& [idx, val] : input_of(*inputs[b], m).steps[ti]) ct.mean_input(b, idx) += val;
        }
      }
    }

    rec.noalias() = s_prev * w_rec.transpose();
    std::vector<std::uint8_t> cf, cr;
    Matrix uf_m, ur_m;
    if (trace) {
      cf.resize(static_cast<std::size_t>(B) * H);
      cr.resize(cf.size());
      uf_m.resize(B, H);
      ur_m.resize(B, H);
    }
    for (std::ptrdiff_t e = 0; e < static_cast<std::ptrdiff_t>(B) * H; ++e) {
      const float sp = s_prev.data()[e];
      float uf = kernel::feedforward(v_f.data()[e], v_r.data()[e], sp, drive.data()[e], c.a, c.g,
                                     c.rest);
      float ur = kernel::recurrent(v_r.data()[e], rec.data()[e], c.a);
      if (!std::isfinite(uf) || !std::isfinite(ur)) {
        throw NumericFault("network: non-finite hidden potential at sample " +
                           std::to_string(e / H) + " neuron " + std::to_string(e % H) +
                           " t=" + std::to_string(ti + 1));
      }
      if (trace) {
        uf_m.data()[e] = uf;
        ur_m.data()[e] = ur;
      }
      const auto k_f = fire(uf, s_f.data()[e], last_f[static_cast<std::size_t>(e)], time, c);
      const auto k_r = fire(ur, s_r.data()[e], last_r[static_cast<std::size_t>(e)], time, c);
      v_f.data()[e] = uf;
      v_r.data()[e] = ur;
      if (trace) {
        cf[static_cast<std::size_t>(e)] = k_f;
        cr[static_cast<std::size_t>(e)] = k_r;
      }
      const float S = kernel::spike_or(s_f.data()[e], s_r.data()[e]);
      s_now.data()[e] = S;
      counts[2] += S > 0.0f ? 1 : 0;
    }
    spike_sum += s_now;
    if (trace) {
      trace->hidden.drive.push_back(drive);
      trace->hidden.u_f.push_back(std::move(uf_m));
      trace->hidden.u_r.push_back(std::move(ur_m));
      trace->hidden.code_f.push_back(std::move(cf));
      trace->hidden.code_r.push_back(std::move(cr));
      trace->hidden.spikes.push_back(s_now);
    }
    std::swap(s_prev, s_now);
  }

  BatchOutput out;
  out.logits = spike_sum * weights.readout.transpose();
  out.hidden_rates = spike_sum / static_cast<float>(T);
  out.spike_counts = counts;
  if (!out.logits.allFinite()) throw NumericFault("network: non-finite readout");
  if (trace) {
    const float invT = 1.0f / static_cast<float>(T);
    for (auto* ct : {trace->visual ? &*trace->visual : nullptr,
                     trace->auditory ? &*trace->auditory : nullptr}) {
      if (!ct) continue;
      ct->mean_input *= invT;
      ct->mean_pooled *= invT;
    }
    trace->spike_sum = spike_sum;
    trace->logits = out.logits;
  }
  return out;
}

ForwardRecord forward(const NetworkInput& input, const NetworkWeights& weights,
                      const MotifMask& mask, const NetworkConfig& cfg, const LifParams& params) {
  const NetworkInput* one[] = {&input};
  const BatchOutput out = run_batch(one, weights, mask, cfg, params);
  ForwardRecord r;
  r.logits = out.logits.row(0).transpose();
  r.hidden_rates = out.hidden_rates.row(0).transpose();
  r.spike_counts = out.spike_counts;
  return r;
}

Vector extract_features(const NetworkInput& input, const NetworkWeights& weights,
                        const MotifMask& mask, const NetworkConfig& cfg, const LifParams& params) {
  coverage::mark("extract_features");
  return forward(input, weights, mask, cfg, params).hidden_rates;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'M', 'R', 'S', 'N', 'N', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw ParseError(std::string("checkpoint: truncated reading ") + what);
  }
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

}  // namespace

std::string config_to_json(const NetworkConfig& cfg) {
  nlohmann::ordered_json j;
  j["conv_kernel"] = cfg.conv_kernel;
  j["conv_channels"] = cfg.conv_channels;
  j["pool"] = cfg.pool;
  j["hidden_size"] = cfg.hidden_size;
  j["output_size"] = cfg.output_size;
  j["timesteps"] = cfg.timesteps;
  j["mode"] = std::string(to_string(cfg.mode));
  j["visual_height"] = cfg.visual_height;
  j["visual_width"] = cfg.visual_width;
  j["auditory_height"] = cfg.auditory_height;
  j["auditory_width"] = cfg.auditory_width;
  j["auditory_input"] = cfg.auditory_input == AuditoryInput::bernoulli ? "bernoulli" : "current";
  return j.dump(2);
}

NetworkConfig config_from_json(const std::string& text) {
  NetworkConfig cfg;
  try {
    const auto j = nlohmann::json::parse(text);
    cfg.conv_kernel = j.value("conv_kernel", cfg.conv_kernel);
    cfg.conv_channels = j.value("conv_channels", cfg.conv_channels);
    cfg.pool = j.value("pool", cfg.pool);
    cfg.hidden_size = j.value("hidden_size", cfg.hidden_size);
    cfg.output_size = j.value("output_size", cfg.output_size);
    cfg.timesteps = j.value("timesteps", cfg.timesteps);
    cfg.mode = modality_mode_from_string(j.value("mode", std::string("visual")));
    cfg.visual_height = j.value("visual_height", cfg.visual_height);
    cfg.visual_width = j.value("visual_width", cfg.visual_width);
    cfg.auditory_height = j.value("auditory_height", cfg.auditory_height);
    cfg.auditory_width = j.value("auditory_width", cfg.auditory_width);
    const auto ai = j.value("auditory_input", std::string("bernoulli"));
    if (ai != "bernoulli" && ai != "current") throw ConfigError("bad auditory_input '" + ai + "'");
    cfg.auditory_input = ai == "bernoulli" ? AuditoryInput::bernoulli : AuditoryInput::current;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("network config json: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

void save_checkpoint(const std::filesystem::path& path, const NetworkWeights& weights,
                     const NetworkConfig& cfg, const std::string& config_checksum) {
  static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes LE host");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof kMagic);
  put_u32(os, kVersion);
  const auto tensors = weights.named();
  put_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, 2);
    put_u32(os, static_cast<std::uint32_t>(m->rows()));
    put_u32(os, static_cast<std::uint32_t>(m->cols()));
    os.write(reinterpret_cast<const char*>(m->data()),
             static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(m->size())));
  }
  if (!os) throw ConfigError("failed writing checkpoint " + path.string());
  auto side = nlohmann::ordered_json::parse(config_to_json(cfg));
  if (!config_checksum.empty()) side["config_sha256"] = config_checksum;
  std::ofstream js(path.string() + ".json");
  js << side.dump(2) << '\n';
  if (!js) throw ConfigError("failed writing checkpoint sidecar " + path.string() + ".json");
}

std::pair<NetworkWeights, NetworkConfig> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw ParseError("checkpoint: bad magic in " + path.string());
  }
  if (const auto v = get_u32(is, "version"); v != kVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(v));
  }
  const auto count = get_u32(is, "tensor count");
  NetworkWeights w;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto len = get_u32(is, "name length");
    if (len > 256) throw ParseError("checkpoint: implausible tensor name length");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw ParseError("checkpoint: truncated tensor name");
    const auto ndim = get_u32(is, "ndim");
    if (ndim != 2) throw ParseError("checkpoint: tensor " + name + " is not 2-D");
    const auto rows = get_u32(is, "rows");
    const auto cols = get_u32(is, "cols");
    Matrix m(rows, cols);
    if (!is.read(reinterpret_cast<char*>(m.data()),
                 static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(m.size())))) {
      throw ParseError("checkpoint: truncated data for " + name);
    }
    if (name == "visual.conv" || name == "visual.ff") {
      if (!w.visual) w.visual = Pathway{};
      (name == "visual.conv" ? w.visual->conv : w.visual->ff) = std::move(m);
    } else if (name == "auditory.conv" || name == "auditory.ff") {
      if (!w.auditory) w.auditory = Pathway{};
      (name == "auditory.conv" ? w.auditory->conv : w.auditory->ff) = std::move(m);
    } else if (name == "recurrent") {
      w.recurrent = std::move(m);
    } else if (name == "readout") {
      w.readout = std::move(m);
    } else {
      throw ParseError("checkpoint: unknown tensor " + name);
    }
  }
  std::ifstream js(path.string() + ".json");
  if (!js) throw ConfigError("checkpoint: missing config sidecar " + path.string() + ".json");
  const std::string text((std::istreambuf_iterator<char>(js)), std::istreambuf_iterator<char>());
  return {std::move(w), config_from_json(text)};
}

}  // namespace mrsnn
