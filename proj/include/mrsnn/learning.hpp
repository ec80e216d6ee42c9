#pragma once

// Two training rules over the spiking network:
//
//  * pseudo_bp: reverse-time gradient of the readout cross-entropy through
//    every spiking layer, with the spike nonlinearity's derivative replaced
//    by a boxcar of width 2 * v_win around v_th.
//  * reward: the readout learns from its own local error; hidden layers
//    receive Grad_R = B_rand R - h directly, where R is the one-hot target
//    and B_rand a fixed random projection. The recurrent matrix additionally
//    gets the in-layer reverse-time gradient of 0.5 * |h - B_rand R|^2.
//
// Recurrent updates are always gated by the motif mask; a zero mask entry
// leaves its weight bit-identical.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrsnn/common.hpp"
#include "mrsnn/lif.hpp"
#include "mrsnn/mask.hpp"
#include "mrsnn/network.hpp"

namespace mrsnn {

enum class LearningMode { pseudo_bp, reward };
std::string_view to_string(LearningMode m);
LearningMode learning_mode_from_string(std::string_view s);

Vector surrogate_grad(const Vector& v, const LifParams& params);

struct RewardLearningState {
  Matrix b_rand;  // [hidden x classes], fixed after construction
  double eta_f = 1e-4;
  double eta_r = 1e-4;

  // b_rand ~ U[0, 1]: one target rate pattern per class, inside the range
  // the hidden rates h can actually reach.
  static RewardLearningState initialize(int hidden, int classes, std::uint64_t seed,
                                        double eta_f = 1e-4, double eta_r = 1e-4);
  // FNV-1a over the raw float bytes of b_rand.
  std::uint64_t checksum() const;
};

Vector reward_gradient(const Vector& hidden_rates, int label, const RewardLearningState& rl);

// Mean softmax cross-entropy and its gradient w.r.t. the logits.
struct CrossEntropy {
  double loss = 0.0;
  Matrix d_logits;
  int correct = 0;
};
CrossEntropy cross_entropy(const Matrix& logits, std::span<const int> labels);

struct BpttOptions {
  // Extra dL/dS_t added at every timestep (hidden layer), e.g. a rate loss.
  std::optional<Matrix> d_spikes_each_step;
  // When false only the recurrent and readout gradients are produced.
  bool input_layers = true;
};

// Reverse-time gradients of the loss whose readout gradient is `d_logits`.
// Resets and the (1 - S) leak gate are treated as constants.
NetworkWeights bptt_gradients(const BatchTrace& trace, const Matrix& d_logits,
                              const NetworkWeights& weights, const MotifMask& mask,
                              const NetworkConfig& cfg, const LifParams& params,
                              const BpttOptions& opts = {});

struct GradientBundle {
  Matrix grad_r;                    // Grad_R per sample, [B x hidden]
  std::optional<NetworkWeights> bptt;  // Grad_{t+1} part, when computed
  NetworkWeights grad;              // descent direction per tensor (dL/dW)
};

// Reward-rule gradients for one traced batch.
GradientBundle reward_gradients(const BatchTrace& trace, std::span<const int> labels,
                                const CrossEntropy& readout_error, const NetworkWeights& weights,
                                const MotifMask& mask, const RewardLearningState& rl,
                                const NetworkConfig& cfg, const LifParams& params);

enum class OptimizerKind { sgd, adam };

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr_feedforward, double lr_recurrent)
      : kind_(kind), lr_f_(lr_feedforward), lr_r_(lr_recurrent) {}

  // W -= lr * step(grad). Recurrent entries whose mask is zero are skipped
  // outright; the gradients themselves already carry the mask factor.
  void apply(NetworkWeights& weights, const NetworkWeights& grad, const MotifMask& mask);

  OptimizerKind kind() const { return kind_; }

 private:
  struct Moments {
    Matrix m, v;
  };
  OptimizerKind kind_;
  double lr_f_, lr_r_;
  std::int64_t steps_ = 0;
  std::map<std::string, Moments> moments_;
};

void apply_updates(NetworkWeights& weights, const GradientBundle& bundle, const MotifMask& mask,
                   Optimizer& optimizer);

// One training or evaluation example; feature vectors are in [0,1] and a
// modality is absent when its vector is empty.
struct Example {
  std::vector<float> visual;
  std::vector<float> auditory;
  int label = 0;
};

NetworkInput make_input(const Example& ex, const NetworkConfig& cfg, std::uint64_t seed,
                        double noise_level = 0.0);

struct TrainConfig {
  LearningMode mode = LearningMode::pseudo_bp;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double lr = 1e-4;  // pseudo_bp; reward uses the RewardLearningState rates
  int batch_size = 64;
};

struct EpochMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

// One shuffled pass of minibatch training. Deterministic in (seed, epoch).
EpochMetrics train_epoch(std::span<const Example> data, NetworkWeights& weights,
                         const MotifMask& mask, const NetworkConfig& cfg, const LifParams& params,
                         const TrainConfig& tc, Optimizer& optimizer,
                         const RewardLearningState* rl, int epoch, std::uint64_t seed);

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
  std::vector<int> predictions;
  Matrix features;  // hidden rates, [N x hidden]
};

Evaluation evaluate(std::span<const Example> data, const NetworkWeights& weights,
                    const MotifMask& mask, const NetworkConfig& cfg, const LifParams& params,
                    std::uint64_t seed, double noise_level = 0.0, int batch_size = 128);

}  // namespace mrsnn
