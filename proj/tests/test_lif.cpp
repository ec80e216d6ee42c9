#include <cmath>
#include <vector>

#include "doctest.h"
#include "mrsnn/lif.hpp"
#include "mrsnn/rng.hpp"

using namespace mrsnn;

namespace {

Matrix ones(int r, int c) { return Matrix::Ones(r, c); }

Vector scalar(float x) {
  Vector v(1);
  v << x;
  return v;
}

// Drives a single neuron with constant current for up to `steps` steps and
// returns the pre-reset v_f trace and the first step at which it fired (or -1).
std::pair<std::vector<float>, int> drive_constant(float current, int steps, const LifParams& p) {
  auto st = LayerState::at_rest(1, p);
  std::vector<float> trace;
  int first = -1;
  for (int t = 1; t <= steps; ++t) {
    st = step_feedforward(st, scalar(current), ones(1, 1), p);
    trace.push_back(st.v_f[0]);
    auto fr = fire_and_reset(st, t, p);
    if (first < 0 && fr.spikes[0] > 0) first = t;
    st = fr.state;
  }
  return {trace, first};
}

}  // namespace

TEST_CASE("zero input at rest stays at rest") {
  LifParams p;
  auto st = LayerState::at_rest(4, p);
  auto next = step_feedforward(st, Vector::Zero(3), Matrix::Zero(4, 3), p);
  CHECK(next.v_f == st.v_f);
  auto fr = fire_and_reset(next, 1, p);
  CHECK(fr.spikes.sum() == 0.0f);
}

TEST_CASE("constant drive follows forward Euler until first crossing") {
  LifParams p;
  const auto [trace, first] = drive_constant(0.15f, 10, p);
  // Independent oracle in double precision.
  double v = 0.0;
  int oracle_first = -1;
  for (int t = 1; t <= 10 && oracle_first < 0; ++t) {
    v = v + (p.dt / p.capacitance) * (-p.leak_conductance * (v - p.v_rest) + 0.15);
    CHECK(trace[static_cast<std::size_t>(t - 1)] == doctest::Approx(v).epsilon(1e-6));
    if (v >= p.v_th) oracle_first = t;
  }
  CHECK(first == 5);
  CHECK(first == oracle_first);
  CHECK(trace[4] == doctest::Approx(0.50424).epsilon(1e-6));
}

TEST_CASE("subthreshold drive approaches its fixed point without firing") {
  LifParams p;
  // v* = I / g = 0.5 is reached only in the limit.
  const auto [trace, first] = drive_constant(0.1f, 28, p);
  CHECK(first == -1);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] > trace[i - 1]);
  CHECK(trace.back() < 0.5f);
}

TEST_CASE("threshold is inclusive") {
  LifParams p;
  auto st = LayerState::at_rest(2, p);
  st.v_f << 0.5f, 0.49f;
  auto fr = fire_and_reset(st, 3, p);
  CHECK(fr.state.s_f[0] == 1.0f);
  CHECK(fr.state.v_f[0] == 0.0f);
  CHECK(fr.state.s_f[1] == 0.0f);
  CHECK(fr.state.v_f[1] == 0.49f);
  CHECK(fr.spikes[0] == 1.0f);
  CHECK(fr.spikes[1] == 0.0f);
}

TEST_CASE("refractory flag release") {
  LifParams p;
  auto st = LayerState::at_rest(1, p);
  st.v_f << 0.7f;
  auto fr = fire_and_reset(st, 5, p);
  CHECK(fr.spikes[0] == 1.0f);
  auto next = fire_and_reset(fr.state, 6, p);
  CHECK(next.spikes[0] == 0.0f);

  LifParams held = p;
  held.tau_ref = 2.0;
  fr = fire_and_reset(st, 5, held);
  next = fire_and_reset(fr.state, 6, held);
  CHECK(next.spikes[0] == 1.0f);
  next = fire_and_reset(next.state, 7, held);
  CHECK(next.spikes[0] == 0.0f);
}

TEST_CASE("recurrent drive passes only unmasked connections") {
  LifParams p;
  auto st = LayerState::at_rest(3, p);
  Matrix w(3, 3);
  w << 0, 0.3f, 0.2f, 0.4f, 0, 0.6f, 0.1f, 0.7f, 0;
  Matrix m(3, 3);
  m << 0, 1, 0, 1, 0, 1, 0, 1, 0;
  Vector s(3);
  s << 0, 1, 1;
  auto next = step_recurrent(st, s, w, m, p);
  CHECK(next.v_r[0] == doctest::Approx(0.3));
  CHECK(next.v_r[1] == doctest::Approx(0.6));
  CHECK(next.v_r[2] == doctest::Approx(0.7));
  // Masked-out entries contribute nothing whatever their weight.
  Matrix w2 = w;
  w2(0, 2) = 100.0f;
  w2(2, 1) = 0.7f;
  CHECK(step_recurrent(st, s, w2, m, p).v_r == next.v_r);
}

TEST_CASE("combined spike is the OR of the two streams") {
  LifParams p;
  auto st = LayerState::at_rest(4, p);
  st.v_f << 0.6f, 0.6f, 0.0f, 0.0f;
  st.v_r << 0.6f, 0.0f, 0.6f, 0.0f;
  auto fr = fire_and_reset(st, 1, p);
  CHECK(fr.spikes[0] == 1.0f);
  CHECK(fr.spikes[1] == 1.0f);
  CHECK(fr.spikes[2] == 1.0f);
  CHECK(fr.spikes[3] == 0.0f);
  CHECK(fr.state.v_r[0] == 0.0f);
  CHECK(fr.state.v_r[2] == 0.0f);
}

TEST_CASE("leak is switched off in the step after a spike") {
  LifParams p;
  auto st = LayerState::at_rest(1, p);
  st.v_f << 0.3f;
  st.s_r << 1.0f;
  auto next = step_feedforward(st, scalar(0.0f), ones(1, 1), p);
  CHECK(next.v_f[0] == 0.3f);
  st.s_r << 0.0f;
  next = step_feedforward(st, scalar(0.0f), ones(1, 1), p);
  CHECK(next.v_f[0] == doctest::Approx(0.24));
}

TEST_CASE("property: without input the potential decays monotonically toward rest") {
  LifParams p;
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto st = LayerState::at_rest(1, p);
    st.v_f << static_cast<float>(uniform(rng, -1.0, 0.49));
    for (int t = 0; t < 28; ++t) {
      auto next = step_feedforward(st, scalar(0.0f), ones(1, 1), p);
      CHECK(std::abs(next.v_f[0] - p.v_rest) <= std::abs(st.v_f[0] - p.v_rest));
      st = next;
    }
  }
}

TEST_CASE("property: post-reset potentials stay below threshold and refractory spacing holds") {
  LifParams p;
  p.tau_ref = 3.0;
  Rng rng(11);
  const int n = 6;
  Matrix wf(n, 4);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 4; ++j) wf(i, j) = static_cast<float>(uniform(rng, 0.0, 0.6));
  auto st = LayerState::at_rest(n, p);
  std::vector<double> last(n, kNeverSpiked);
  for (int t = 1; t <= 200; ++t) {
    Vector x(4);
    for (int j = 0; j < 4; ++j) x[j] = uniform01(rng) < 0.5 ? 1.0f : 0.0f;
    st = step_feedforward(st, x, wf, p);
    auto fr = fire_and_reset(st, t, p);
    for (int i = 0; i < n; ++i) {
      CHECK(fr.state.v_f[i] < p.v_th);
      if (fr.state.last_spike_f[static_cast<std::size_t>(i)] == t) {
        CHECK(t - last[static_cast<std::size_t>(i)] >= p.tau_ref);
        last[static_cast<std::size_t>(i)] = t;
      }
    }
    st = fr.state;
  }
}

TEST_CASE("determinism: identical inputs give identical rasters") {
  LifParams p;
  auto run = [&] {
    Rng rng(3);
    Matrix wf = Matrix::Constant(5, 5, 0.2f);
    auto st = LayerState::at_rest(5, p);
    SpikeTrain out(28, 5);
    for (int t = 0; t < 28; ++t) {
      Vector x(5);
      for (int j = 0; j < 5; ++j) x[j] = uniform01(rng) < 0.6 ? 1.0f : 0.0f;
      st = step_feedforward(st, x, wf, p);
      auto fr = fire_and_reset(st, t, p);
      for (int i = 0; i < 5; ++i) out.set(static_cast<std::size_t>(t), static_cast<std::size_t>(i), fr.spikes[i] > 0);
      st = fr.state;
    }
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("errors") {
  LifParams p;
  auto st = LayerState::at_rest(3, p);
  CHECK_THROWS_AS(step_feedforward(st, Vector::Zero(2), Matrix::Zero(3, 3), p), ConfigError);
  CHECK_THROWS_AS(step_recurrent(st, Vector::Zero(3), Matrix::Zero(3, 2), Matrix::Zero(3, 3), p),
                  ConfigError);
  CHECK_THROWS_WITH_AS(step_feedforward(st, scalar(std::nanf("")),
                                        Matrix::Ones(3, 1), p),
                       doctest::Contains("neuron 0"), NumericFault);

  LifParams bad;
  bad.dt = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = LifParams{};
  bad.v_th = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_NOTHROW(LifParams{}.validate());
}
