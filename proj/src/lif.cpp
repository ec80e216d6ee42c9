#include "mrsnn/lif.hpp"

#include <cmath>
#include <string>

#include "mrsnn/coverage.hpp"

namespace mrsnn {

void LifParams::validate() const {
  if (!(dt > 0.0)) throw ConfigError("LifParams: dt must be > 0");
  if (!(tau_ref >= 0.0)) throw ConfigError("LifParams: tau_ref must be >= 0");
  if (!(v_win > 0.0)) throw ConfigError("LifParams: v_win must be > 0");
  if (!(v_th > v_reset)) throw ConfigError("LifParams: v_th must exceed v_reset");
  if (!(capacitance > 0.0)) throw ConfigError("LifParams: capacitance must be > 0");
}

LayerState LayerState::at_rest(std::size_t n, const LifParams& p) {
  LayerState s;
  const auto rest = static_cast<float>(p.v_rest);
  s.v_f = Vector::Constant(static_cast<Eigen::Index>(n), rest);
  s.v_r = Vector::Zero(static_cast<Eigen::Index>(n));
  s.s_f = Vector::Zero(static_cast<Eigen::Index>(n));
  s.s_r = Vector::Zero(static_cast<Eigen::Index>(n));
  s.last_spike_f.assign(n, kNeverSpiked);
  s.last_spike_r.assign(n, kNeverSpiked);
  return s;
}

Vector LayerState::combined_spikes() const {
  Vector out(s_f.size());
  for (Eigen::Index i = 0; i < s_f.size(); ++i) out[i] = kernel::spike_or(s_f[i], s_r[i]);
  return out;
}

std::size_t SpikeTrain::count() const {
  std::size_t c = 0;
  for (auto b : bits_) c += b;
  return c;
}

LayerState step_feedforward(const LayerState& state, const Vector& presynaptic,
                            const Matrix& weights_f, const LifParams& params) {
  coverage::mark("step_feedforward");
  const auto n = static_cast<Eigen::Index>(state.size());
  if (weights_f.rows() != n || weights_f.cols() != presynaptic.size()) {
    throw ConfigError("step_feedforward: weights_f is " + std::to_string(weights_f.rows()) + "x" +
                      std::to_string(weights_f.cols()) + ", expected " + std::to_string(n) + "x" +
                      std::to_string(presynaptic.size()));
  }
  const Vector current = weights_f * presynaptic;
  const auto a = static_cast<float>(params.euler_factor());
  const auto g = static_cast<float>(params.leak_conductance);
  const auto rest = static_cast<float>(params.v_rest);

  LayerState next = state;
  for (Eigen::Index i = 0; i < n; ++i) {
    const float s = kernel::spike_or(state.s_f[i], state.s_r[i]);
    next.v_f[i] = kernel::feedforward(state.v_f[i], state.v_r[i], s, current[i], a, g, rest);
    if (!std::isfinite(next.v_f[i])) {
      throw NumericFault("step_feedforward: non-finite potential at neuron " + std::to_string(i));
    }
  }
  return next;
}

LayerState step_recurrent(const LayerState& state, const Vector& prev_spikes,
                          const Matrix& weights_r, const Matrix& mask, const LifParams& params) {
  coverage::mark("step_recurrent");
  const auto n = static_cast<Eigen::Index>(state.size());
  if (weights_r.rows() != n || weights_r.cols() != n || mask.rows() != n || mask.cols() != n ||
      prev_spikes.size() != n) {
    throw ConfigError("step_recurrent: weight/mask/spike shapes do not match layer size " +
                      std::to_string(n));
  }
  const Vector drive = weights_r.cwiseProduct(mask) * prev_spikes;
  const auto a = static_cast<float>(params.euler_factor());
  LayerState next = state;
  for (Eigen::Index i = 0; i < n; ++i) next.v_r[i] = kernel::recurrent(state.v_r[i], drive[i], a);
  return next;
}

namespace {

void fire_stream(Vector& v, Vector& flag, std::vector<double>& last, double t,
                 const LifParams& p) {
  const auto th = static_cast<float>(p.v_th);
  const auto reset = static_cast<float>(p.v_reset);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const bool held = kernel::refractory(t, last[k], p.tau_ref);
    if (kernel::crosses(v[i], th)) {
      v[i] = reset;
      // A crossing inside the refractory window resets but is not a new spike.
      if (!held) last[k] = t;
      flag[i] = 1.0f;
    } else {
      flag[i] = held ? 1.0f : 0.0f;
    }
  }
}

}  // namespace

FireResult fire_and_reset(const LayerState& state, double t, const LifParams& params) {
  coverage::mark("fire_and_reset");
  FireResult r{state, {}};
  fire_stream(r.state.v_f, r.state.s_f, r.state.last_spike_f, t, params);
  fire_stream(r.state.v_r, r.state.s_r, r.state.last_spike_r, t, params);
  r.spikes = r.state.combined_spikes();
  return r;
}

}  // namespace mrsnn
