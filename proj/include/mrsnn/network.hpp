#pragma once

// Four-stage spiking network: encoded input -> 5x5 convolutional LIF layer
// (2x2 average pooled) per modality -> recurrent hidden LIF layer gated by a
// motif mask -> non-spiking readout that accumulates weighted hidden spikes.
//
// The engine processes a minibatch timestep by timestep. Every potential is
// float; all reductions run in a fixed order so results are bit-stable.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mrsnn/common.hpp"
#include "mrsnn/encoding.hpp"
#include "mrsnn/lif.hpp"
#include "mrsnn/mask.hpp"
#include "mrsnn/rng.hpp"

namespace mrsnn {

enum class ModalityMode { visual, auditory, multi };
std::string_view to_string(ModalityMode m);
ModalityMode modality_mode_from_string(std::string_view s);

// How auditory features enter the conv layer.
enum class AuditoryInput { bernoulli, current };

struct NetworkConfig {
  int conv_kernel = 5;
  int conv_channels = 16;
  int pool = 2;
  int hidden_size = 200;
  int output_size = kNumClasses;
  int timesteps = 28;
  ModalityMode mode = ModalityMode::visual;
  int visual_height = 28;
  int visual_width = 28;
  int auditory_height = 28;  // MFCC frames
  int auditory_width = 13;   // MFCC coefficients
  AuditoryInput auditory_input = AuditoryInput::bernoulli;

  void validate() const;
  bool uses(Modality m) const;
};

struct ConvGeometry {
  int in_h = 0, in_w = 0, kernel = 0, channels = 0, pool = 0;
  int out_h() const { return in_h - kernel + 1; }
  int out_w() const { return in_w - kernel + 1; }
  int pool_h() const { return out_h() / pool; }
  int pool_w() const { return out_w() / pool; }
  int inputs() const { return in_h * in_w; }
  int conv_neurons() const { return out_h() * out_w() * channels; }
  int pooled() const { return pool_h() * pool_w() * channels; }
};

ConvGeometry geometry(const NetworkConfig& cfg, Modality m);

// Per-modality front end. conv: [kernel*kernel x channels] (tap-major);
// ff: [hidden x pooled] with pooled features laid out (y, x, channel).
struct Pathway {
  Matrix conv;
  Matrix ff;
};

struct NetworkWeights {
  std::optional<Pathway> visual;
  std::optional<Pathway> auditory;
  Matrix recurrent;  // [hidden x hidden], row = postsynaptic
  Matrix readout;    // [classes x hidden]

  Pathway& pathway(Modality m) { return m == Modality::visual ? *visual : *auditory; }
  const Pathway& pathway(Modality m) const {
    return m == Modality::visual ? *visual : *auditory;
  }

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for every tensor.
  static NetworkWeights initialize(const NetworkConfig& cfg, std::uint64_t seed);
  // Same shapes, all zero.
  static NetworkWeights zeros_like(const NetworkWeights& w);

  // Named view in a fixed order; names are "visual.conv", "visual.ff",
  // "auditory.conv", "auditory.ff", "recurrent", "readout".
  std::vector<std::pair<std::string, const Matrix*>> named() const;
  std::vector<std::pair<std::string, Matrix*>> named_mut();

  bool operator==(const NetworkWeights& o) const;
};

// Input activity of one sample for one modality: T rows of (index, value)
// pairs for the nonzero entries.
struct SparseInput {
  std::vector<std::vector<std::pair<int, float>>> steps;
};

SparseInput to_sparse(const SpikeTrain& spikes);
// Analog drive: the same feature vector injected at every timestep.
SparseInput constant_input(std::span<const float> values, int timesteps);

// One network input: the modalities present for this sample.
struct NetworkInput {
  std::optional<SparseInput> visual;
  std::optional<SparseInput> auditory;
};

struct ForwardRecord {
  Vector logits;        // accumulated readout drive
  Vector hidden_rates;  // mean hidden spike rate over T
  std::vector<std::int64_t> spike_counts;  // [conv visual, conv auditory, hidden]
  int predicted() const;
};

// Argmax with ties resolved toward the lowest class index.
int argmax_lowest(std::span<const float> v);

// Per-timestep record of a batch kept for reverse-time gradient computation.
struct ConvTrace {
  std::vector<Matrix> u;                      // pre-reset potential, [B x neurons] per t
  std::vector<std::vector<std::uint8_t>> code;  // bit0 flag, bit1 crossed, bit2 held
  std::vector<Matrix> pooled;                 // [B x pooled] per t
  Matrix mean_input;                          // [B x inputs], mean over T
  Matrix mean_pooled;                         // [B x pooled], mean over T
};

struct HiddenTrace {
  std::vector<Matrix> drive;  // feedforward current W_f x, [B x H] per t
  std::vector<Matrix> u_f;    // pre-reset feedforward potential
  std::vector<Matrix> u_r;    // pre-reset recurrent potential
  std::vector<std::vector<std::uint8_t>> code_f;
  std::vector<std::vector<std::uint8_t>> code_r;
  std::vector<Matrix> spikes;  // combined S_t, [B x H]
};

struct BatchTrace {
  int batch = 0;
  int timesteps = 0;
  std::vector<const NetworkInput*> inputs;
  std::optional<ConvTrace> visual;
  std::optional<ConvTrace> auditory;
  HiddenTrace hidden;
  Matrix spike_sum;  // [B x H], sum over T of S_t
  Matrix logits;     // [B x classes]
};

struct BatchOutput {
  Matrix logits;        // [B x classes]
  Matrix hidden_rates;  // [B x H]
  std::vector<std::int64_t> spike_counts;
};

// Runs T timesteps over a minibatch. When `trace` is non-null it receives
// everything reverse-time gradient code needs.
BatchOutput run_batch(std::span<const NetworkInput* const> inputs, const NetworkWeights& weights,
                      const MotifMask& mask, const NetworkConfig& cfg, const LifParams& params,
                      BatchTrace* trace = nullptr);

ForwardRecord forward(const NetworkInput& input, const NetworkWeights& weights,
                      const MotifMask& mask, const NetworkConfig& cfg, const LifParams& params);
Vector extract_features(const NetworkInput& input, const NetworkWeights& weights,
                        const MotifMask& mask, const NetworkConfig& cfg, const LifParams& params);

// Checkpoint container: magic "MRSNNCKP", u32 version, u32 tensor count,
// then per tensor: u32 name length, name bytes, u32 ndim, u32 dims[ndim],
// little-endian float32 data (row-major). Sidecar "<path>.json" holds the
// NetworkConfig (plus the run's config checksum when given).
void save_checkpoint(const std::filesystem::path& path, const NetworkWeights& weights,
                     const NetworkConfig& cfg, const std::string& config_checksum = {});
std::pair<NetworkWeights, NetworkConfig> load_checkpoint(const std::filesystem::path& path);

std::string config_to_json(const NetworkConfig& cfg);
NetworkConfig config_from_json(const std::string& text);

}  // namespace mrsnn
