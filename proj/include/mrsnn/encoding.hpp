#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mrsnn/common.hpp"
#include "mrsnn/lif.hpp"

namespace mrsnn {

enum class Modality { visual, auditory };

std::string_view to_string(Modality m);
Modality modality_from_string(std::string_view s);

struct EncodedSample {
  SpikeTrain spikes;
  int label = 0;
  Modality modality = Modality::visual;
};

// Rate coding: entry (t, i) fires with independent probability values[i].
// Throws DomainError for a value outside [0,1].
SpikeTrain bernoulli_encode(std::span<const float> values, std::size_t timesteps,
                            std::uint64_t seed);

struct NoiseResult {
  std::vector<float> values;
  std::vector<std::uint8_t> replaced;  // 1 where the element was redrawn
};

// Each element is replaced, with probability `level`, by a U[0,1] draw.
NoiseResult inject_noise_with_mask(std::span<const float> values, double level,
                                   std::uint64_t seed);
std::vector<float> inject_noise(std::span<const float> values, double level, std::uint64_t seed);

struct MfccConfig {
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  int n_mel_filters = 26;
  int n_coefficients = 13;
  double pre_emphasis = 0.97;
  int n_frames = 28;  // fixed output length (pad/truncate)

  void validate() const;
};

// Floor applied to mel energies before the log; silent input maps to
// log(kLogEnergyFloor) in every band.
inline constexpr double kLogEnergyFloor = 1e-10;

// In-place iterative radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& data);

// Triangular filters on the mel scale spanning [0, sample_rate/2],
// evaluated at the continuous frequency of each FFT bin. Rows: filters,
// cols: nfft/2 + 1 bins.
Eigen::MatrixXd mel_filterbank(int nfft, double sample_rate, int n_filters);
std::vector<double> mel_center_frequencies(double sample_rate, int n_filters);
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Mel energies of one (already windowed) frame zero-padded to nfft.
std::vector<double> mel_energies(std::span<const double> frame, int nfft, double sample_rate,
                                 int n_filters);

// Frame geometry shared by mfcc_raw and callers that need to reason about
// hop alignment.
struct FrameGeometry {
  int frame_len = 0;
  int hop = 0;
  int nfft = 0;
};
FrameGeometry frame_geometry(double sample_rate, const MfccConfig& cfg);

// Unpadded, unnormalized cepstra: [frames x n_coefficients].
Eigen::MatrixXd mfcc_raw(std::span<const float> waveform, double sample_rate,
                         const MfccConfig& cfg);

// Features fed to the encoder: mfcc_raw padded with silence rows or
// truncated to cfg.n_frames, then min-max normalized to [0,1] per utterance.
Eigen::MatrixXd mfcc(std::span<const float> waveform, double sample_rate, const MfccConfig& cfg);

}  // namespace mrsnn
