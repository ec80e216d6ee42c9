#include "mrsnn/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mrsnn/coverage.hpp"
#include "mrsnn/rng.hpp"

namespace mrsnn {

std::string_view to_string(Modality m) {
  return m == Modality::visual ? "visual" : "auditory";
}

Modality modality_from_string(std::string_view s) {
  if (s == "visual") return Modality::visual;
  if (s == "auditory") return Modality::auditory;
  throw ConfigError("unknown modality '" + std::string(s) + "'");
}

SpikeTrain bernoulli_encode(std::span<const float> values, std::size_t timesteps,
                            std::uint64_t seed) {
  coverage::mark("bernoulli_encode");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0f && values[i] <= 1.0f)) {
      throw DomainError("bernoulli_encode: value " + std::to_string(values[i]) + " at index " +
                        std::to_string(i) + " outside [0,1]");
    }
  }
  SpikeTrain out(timesteps, values.size());
  Rng rng(seed);
  for (std::size_t t = 0; t < timesteps; ++t) {
    auto* row = out.row(t);
    for (std::size_t i = 0; i < values.size(); ++i) {
      row[i] = uniform01(rng) < static_cast<double>(values[i]) ? 1 : 0;
    }
  }
  return out;
}

NoiseResult inject_noise_with_mask(std::span<const float> values, double level,
                                   std::uint64_t seed) {
  coverage::mark("inject_noise");
  if (!(level >= 0.0 && level <= 1.0)) {
    throw DomainError("inject_noise: level must lie in [0,1]");
  }
  NoiseResult r;
  r.values.assign(values.begin(), values.end());
  r.replaced.assign(values.size(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < values.size(); ++i) {
    // Both draws are taken unconditionally so the stream position does not
    // depend on the data.
    const double coin = uniform01(rng);
    const double fresh = uniform01(rng);
    if (coin < level) {
      r.values[i] = static_cast<float>(fresh);
      r.replaced[i] = 1;
    }
  }
  return r;
}

std::vector<float> inject_noise(std::span<const float> values, double level, std::uint64_t seed) {
  return inject_noise_with_mask(values, level, seed).values;
}

void MfccConfig::validate() const {
  if (!(hop_ms > 0.0 && hop_ms <= frame_ms)) throw ConfigError("MfccConfig: need 0 < hop <= frame");
  if (n_coefficients <= 0 || n_coefficients > n_mel_filters) {
    throw ConfigError("MfccConfig: need 0 < n_coefficients <= n_mel_filters");
  }
  if (n_frames <= 0) throw ConfigError("MfccConfig: n_frames must be positive");
}

void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw DomainError("fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_edges(double sample_rate, int n_filters) {
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(n_filters) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(n_filters + 1));
  }
  return edges;
}

}  // namespace

std::vector<double> mel_center_frequencies(double sample_rate, int n_filters) {
  auto e = mel_edges(sample_rate, n_filters);
  return {e.begin() + 1, e.end() - 1};
}

Eigen::MatrixXd mel_filterbank(int nfft, double sample_rate, int n_filters) {
  const auto edges = mel_edges(sample_rate, n_filters);
  const int bins = nfft / 2 + 1;
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_filters, bins);
  for (int m = 0; m < n_filters; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = sample_rate * k / nfft;
      if (f > lo && f < mid) {
        fb(m, k) = (f - lo) / (mid - lo);
      } else if (f >= mid && f < hi) {
        fb(m, k) = (hi - f) / (hi - mid);
      }
    }
  }
  return fb;
}

std::vector<double> mel_energies(std::span<const double> frame, int nfft, double sample_rate,
                                 int n_filters) {
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(nfft));
  for (std::size_t i = 0; i < frame.size() && i < buf.size(); ++i) buf[i] = frame[i];
  fft(buf);
  const int bins = nfft / 2 + 1;
  Eigen::VectorXd power(bins);
  for (int k = 0; k < bins; ++k) power[k] = std::norm(buf[static_cast<std::size_t>(k)]);
  const Eigen::VectorXd e = mel_filterbank(nfft, sample_rate, n_filters) * power;
  return {e.data(), e.data() + e.size()};
}

FrameGeometry frame_geometry(double sample_rate, const MfccConfig& cfg) {
  FrameGeometry g;
  g.frame_len = static_cast<int>(std::lround(cfg.frame_ms * sample_rate / 1000.0));
  g.hop = static_cast<int>(std::lround(cfg.hop_ms * sample_rate / 1000.0));
  g.nfft = 1;
  while (g.nfft < g.frame_len) g.nfft <<= 1;
  return g;
}

namespace {

// Orthonormal DCT-II, keeping the first n_keep coefficients.
Eigen::VectorXd dct2(const Eigen::VectorXd& x, int n_keep) {
  const auto m = static_cast<double>(x.size());
  Eigen::VectorXd c(n_keep);
  for (int k = 0; k < n_keep; ++k) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      acc += x[i] * std::cos(std::numbers::pi * k * (static_cast<double>(i) + 0.5) / m);
    }
    c[k] = acc * (k == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m));
  }
  return c;
}

}  // namespace

Eigen::MatrixXd mfcc_raw(std::span<const float> waveform, double sample_rate,
                         const MfccConfig& cfg) {
  cfg.validate();
  if (!(sample_rate > 0.0)) throw DomainError("mfcc: sample_rate must be positive");
  const auto geo = frame_geometry(sample_rate, cfg);
  if (geo.frame_len <= 0 || geo.hop <= 0) throw DomainError("mfcc: frame shorter than a sample");
  if (waveform.size() < static_cast<std::size_t>(geo.frame_len)) {
    throw DomainError("mfcc: waveform shorter than one frame");
  }

  std::vector<double> emph(waveform.size());
  emph[0] = waveform[0];
  for (std::size_t i = 1; i < waveform.size(); ++i) {
    emph[i] = static_cast<double>(waveform[i]) - cfg.pre_emphasis * waveform[i - 1];
  }

  std::vector<double> window(static_cast<std::size_t>(geo.frame_len));
  for (int n = 0; n < geo.frame_len; ++n) {
    window[n] = geo.frame_len == 1
                    ? 1.0
                    : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (geo.frame_len - 1));
  }

  const auto fb = mel_filterbank(geo.nfft, sample_rate, cfg.n_mel_filters);
  const int frames = 1 + static_cast<int>((waveform.size() - geo.frame_len) / geo.hop);
  Eigen::MatrixXd out(frames, cfg.n_coefficients);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(geo.nfft));
  Eigen::VectorXd power(geo.nfft / 2 + 1);
  for (int f = 0; f < frames; ++f) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    const std::size_t start = static_cast<std::size_t>(f) * geo.hop;
    for (int n = 0; n < geo.frame_len; ++n) buf[n] = emph[start + n] * window[n];
    fft(buf);
    for (Eigen::Index k = 0; k < power.size(); ++k) power[k] = std::norm(buf[k]);
    Eigen::VectorXd loge = fb * power;
    for (Eigen::Index m = 0; m < loge.size(); ++m) {
      loge[m] = std::log(std::max(loge[m], kLogEnergyFloor));
    }
    out.row(f) = dct2(loge, cfg.n_coefficients).transpose();
  }
  return out;
}

Eigen::MatrixXd mfcc(std::span<const float> waveform, double sample_rate, const MfccConfig& cfg) {
  coverage::mark("mfcc");
  const Eigen::MatrixXd raw = mfcc_raw(waveform, sample_rate, cfg);
  const Eigen::VectorXd silence =
      dct2(Eigen::VectorXd::Constant(cfg.n_mel_filters, std::log(kLogEnergyFloor)),
           cfg.n_coefficients);
  Eigen::MatrixXd feat(cfg.n_frames, cfg.n_coefficients);
  for (int f = 0; f < cfg.n_frames; ++f) {
    if (f < raw.rows()) {
      feat.row(f) = raw.row(f);
    } else {
      feat.row(f) = silence.transpose();
    }
  }
  const double lo = feat.minCoeff();
  const double hi = feat.maxCoeff();
  if (hi - lo <= 0.0) return Eigen::MatrixXd::Zero(feat.rows(), feat.cols());
  return (feat.array() - lo) / (hi - lo);
}

}  // namespace mrsnn
