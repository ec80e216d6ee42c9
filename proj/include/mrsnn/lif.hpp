#pragma once

// Discrete-time leaky integrate-and-fire dynamics with the membrane potential
// split into a feedforward stream (v_f) and a recurrent stream (v_r).
//
// Per timestep t (forward Euler, a = dt / C):
//
//   v_f <- v_f + a * ( -g * (v_f + v_r - v_rest) * (1 - S) + W_f x )
//   v_r <- v_r + a * (W_r . M) S_prev
//
// then each stream fires independently when it reaches v_th, resets to
// v_reset, and holds its flag for tau_ref. S = clip(s_f + s_r, 0, 1).

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "mrsnn/common.hpp"

namespace mrsnn {

struct LifParams {
  double capacitance = 1.0;       // uF/cm^2
  double leak_conductance = 0.2;  // nS
  double v_rest = 0.0;            // mV
  double v_reset = 0.0;           // mV
  double v_th = 0.5;              // mV
  double tau_ref = 1.0;           // ms
  double dt = 1.0;                // ms
  double v_win = 0.5;             // mV, surrogate window half-width

  // Throws ConfigError when an invariant is violated.
  void validate() const;
  double euler_factor() const { return dt / capacitance; }
};

inline constexpr double kNeverSpiked = -std::numeric_limits<double>::infinity();

struct LayerState {
  Vector v_f;
  Vector v_r;
  Vector s_f;  // {0,1}
  Vector s_r;  // {0,1}
  std::vector<double> last_spike_f;
  std::vector<double> last_spike_r;

  static LayerState at_rest(std::size_t n, const LifParams& p);
  std::size_t size() const { return static_cast<std::size_t>(v_f.size()); }
  // clip(s_f + s_r, 0, 1)
  Vector combined_spikes() const;
};

// Binary [T x N] spike raster, row-major by timestep.
class SpikeTrain {
 public:
  SpikeTrain() = default;
  SpikeTrain(std::size_t timesteps, std::size_t neurons)
      : t_(timesteps), n_(neurons), bits_(timesteps * neurons, 0) {}

  std::size_t timesteps() const { return t_; }
  std::size_t neurons() const { return n_; }
  std::uint8_t at(std::size_t t, std::size_t i) const { return bits_[t * n_ + i]; }
  void set(std::size_t t, std::size_t i, bool v) { bits_[t * n_ + i] = v ? 1 : 0; }
  const std::uint8_t* row(std::size_t t) const { return bits_.data() + t * n_; }
  std::uint8_t* row(std::size_t t) { return bits_.data() + t * n_; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  std::size_t count() const;

  bool operator==(const SpikeTrain&) const = default;

 private:
  std::size_t t_ = 0;
  std::size_t n_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Scalar kernels shared by the single-layer operations below and the batched
// network engine. Keeping one definition keeps both paths bit-identical.
namespace kernel {

inline float feedforward(float v_f, float v_r, float spike_prev, float current, float a, float g,
                         float v_rest) {
  return v_f + a * (-g * (v_f + v_r - v_rest) * (1.0f - spike_prev) + current);
}

inline float recurrent(float v_r, float drive, float a) { return v_r + a * drive; }

inline bool crosses(float v, float v_th) { return v >= v_th; }

inline bool refractory(double t, double last_spike, double tau_ref) {
  return (t - last_spike) < tau_ref;
}

inline float surrogate(float v, float v_th, float v_win) {
  const float d = v - v_th;
  return (d < v_win && -d < v_win) ? 1.0f : 0.0f;
}

inline float spike_or(float a, float b) { return (a + b) > 0.0f ? 1.0f : 0.0f; }

}  // namespace kernel

// One Euler step of the feedforward potential. `presynaptic` is the fan-in
// activity X; the drive is weights_f * X. No firing decision is taken.
LayerState step_feedforward(const LayerState& state, const Vector& presynaptic,
                            const Matrix& weights_f, const LifParams& params);

// One Euler step of the recurrent potential driven by the previous
// timestep's combined spike flags through the masked recurrent weights.
LayerState step_recurrent(const LayerState& state, const Vector& prev_spikes,
                          const Matrix& weights_r, const Matrix& mask, const LifParams& params);

struct FireResult {
  LayerState state;
  Vector spikes;  // combined flags
};

FireResult fire_and_reset(const LayerState& state, double t, const LifParams& params);

}  // namespace mrsnn
