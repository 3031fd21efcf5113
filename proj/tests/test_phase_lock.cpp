// Copyright 2026 The hdcpf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch_amalgamated.hpp>

#include <complex>
#include <numbers>
#include <random>

#include "hdcpf/phase_lock.hpp"

using namespace hdcpf;
using Catch::Approx;
constexpr double pi = std::numbers::pi;

TEST_CASE("intensity closed form", "[lock]") {
  LockParams p;
  p.theta = 0.0;
  CHECK(intensity(0.0, 0.0, p) == Approx(1.0));
  CHECK(intensity(1.3e-4, 0.0, p) == Approx(1.0));
  CHECK(std::abs(intensity(0.7e-4, pi, p)) < 1e-15);

  // oracle: fields as written, with the polarizer's j removed by a -pi/2
  // shift of zeta. The literal normalization peaks at 1/2; the closed form is
  // scaled so constructive interference of unit fields gives 1.
  std::mt19937_64 eng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    LockParams q;
    q.theta = 3 * u(eng);
    q.E0H = 0.5 + u(eng);
    q.E0V = 0.5 + u(eng);
    const double t = 1e-3 * u(eng), zeta = 2 * pi * u(eng);
    using c = std::complex<double>;
    const c carrier = std::exp(c(0, q.omega * t));
    const c eh = q.E0H / std::sqrt(2.0) * carrier * std::exp(c(0, q.theta * std::sin(q.Omega * t)));
    const c ev = q.E0V / std::sqrt(2.0) * carrier * std::exp(c(0, zeta - pi / 2));
    const c eout = (eh + c(0, 1) * ev) / std::sqrt(2.0);
    const double direct = 0.5 * std::norm(eout);
    CHECK(std::abs(intensity(t, zeta, q) - 2.0 * direct) < 1e-12);
  }
}

TEST_CASE("first harmonic follows Jacobi-Anger", "[lock]") {
  LockParams p;
  const int per = 256, periods = 16;
  auto s = sample_trace(pi / 2, p, periods, per);
  // single-bin DFT at Omega
  std::complex<double> acc = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k)
    acc += s[k] * std::exp(std::complex<double>(0, -2 * pi * static_cast<double>(k) * periods / s.size()));
  const double amp = 2.0 * std::abs(acc) / static_cast<double>(s.size());
  CHECK(amp == Approx(0.5 * 2 * std::cyl_bessel_j(1.0, 0.2)).epsilon(1e-10));
}

TEST_CASE("demodulated error", "[lock]") {
  LockParams p;
  const double G = calibrate_gain(p);
  CHECK(G == Approx(-0.5 * std::cyl_bessel_j(1.0, 0.2)).epsilon(1e-6));
  for (double tau : {0.0, 0.4, pi / 2, 2.0}) {
    for (double zeta = -pi / 2; zeta <= pi / 2 + 1e-9; zeta += pi / 12) {
      LockParams q = p;
      q.tau = tau;
      auto s = sample_trace(zeta, q, 200);
      const double e = demodulate_error(s, q);
      const double want = G * std::sin(zeta) * std::sin(tau);
      INFO("tau=" << tau << " zeta=" << zeta);
      CHECK(std::abs(e - want) <= 0.01 * std::abs(G));
      if (zeta == 0.0 || tau == 0.0) CHECK(std::abs(e) < 1e-6 * std::abs(G));
      // odd in zeta and in tau
      auto sm = sample_trace(-zeta, q, 200);
      CHECK(demodulate_error(sm, q) == Approx(-e).margin(1e-9));
      LockParams r = q;
      r.tau = -tau;
      CHECK(demodulate_error(s, r) == Approx(-e).margin(1e-9));
    }
  }
}

TEST_CASE("demodulation needs ten periods", "[lock]") {
  LockParams p;
  auto s = sample_trace(0.3, p, 9);
  REQUIRE_THROWS_AS(demodulate_error(s, p), InsufficientTrace);
  s = sample_trace(0.3, p, 10);
  REQUIRE_NOTHROW(demodulate_error(s, p));
}

TEST_CASE("parameter validation", "[lock]") {
  LockParams p;
  p.lpf_cutoff = 2e4;
  REQUIRE_THROWS_AS(p.validate(), InvalidParameter);
  p = {};
  p.dt = 2e-5;
  REQUIRE_THROWS_AS(p.validate(), InvalidParameter);
  PidGains g;
  g.out_min = 1;
  g.out_max = 0;
  REQUIRE_THROWS_AS(g.validate(), InvalidParameter);
}

TEST_CASE("pid update", "[lock]") {
  PidGains g{2.0, 0.0, 0.0, -10, 10};
  PidState s;
  CHECK(pid_update(s, g, 0.0, 1e-3) == 0.0);
  CHECK(pid_update(s, g, 0.3, 1e-3) == Approx(0.6));
  // anti-windup: integral stops growing at the limit
  PidGains gi{0.0, 100.0, 0.0, -1, 1};
  PidState si;
  for (int i = 0; i < 10000; ++i) pid_update(si, gi, 1.0, 1e-3);
  CHECK(si.integral == Approx(0.01).margin(1e-3));
  // and recovers at once when the error reverses
  CHECK(pid_update(si, gi, -1.0, 1e-3) < 1.0);
  REQUIRE_THROWS_AS(pid_update(si, gi, 1.0, 0.0), InvalidParameter);
}

TEST_CASE("lock to any phase", "[lock]") {
  LockParams p;
  const double G = calibrate_gain(p);
  for (double set : {-1.0, -0.3, 0.0, 0.5, 1.2}) {
    // servo error setpoint - demod/G changes sign across zeta = set
    auto err = [&](double zeta) {
      return std::sin(set) - demodulate_error(sample_trace(zeta, p, 100), p) / G;
    };
    CHECK(err(set - 0.02) > 0);
    CHECK(err(set + 0.02) < 0);
    CHECK(std::abs(err(set)) < 1e-4);
    // and the loop holds it
    DriftModel d;
    LockRun run;
    run.duration = 0.5;
    run.setpoint = set;
    run.settle = 0.2;
    auto tr = simulate_lock(p, d, default_gains(), run);
    CHECK(tr.rms_closed < 0.02);
    CHECK_FALSE(tr.diverged);
  }
}

TEST_CASE("zero drift and zero gains leave the phase alone", "[lock]") {
  LockParams p;
  LockRun run;
  run.duration = 0.05;
  run.zeta0 = 0.37;
  run.setpoint = 0.37;
  run.record_every = 1;
  auto tr = simulate_lock(p, {}, PidGains{}, run);
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    CHECK(tr.zeta_closed[i] == 0.37);
    CHECK(tr.zeta_open[i] == 0.37);
  }
}

TEST_CASE("step disturbance settles", "[lock]") {
  LockParams p;
  DriftModel d;
  d.kind = DriftKind::Step;
  d.amplitude = 0.2;
  d.step_time = 0.05;
  LockRun run;
  run.duration = 0.2;
  run.record_every = 1;
  auto tr = simulate_lock(p, d, default_gains(), run);
  // time constant of the default loop is a few ms; allow 30 ms to 5%
  for (std::size_t i = 0; i < tr.t.size(); ++i)
    if (tr.t[i] > 0.08) CHECK(std::abs(tr.zeta_closed[i]) < 0.01);
}

TEST_CASE("sinusoidal drift is rejected as the linear loop predicts", "[lock]") {
  LockParams p;
  const auto g = default_gains();
  for (double f : {1.0, 5.0, 20.0}) {
    DriftModel d;
    d.kind = DriftKind::Sinusoidal;
    d.amplitude = 0.05;
    d.period = 1.0 / f;
    LockRun run;
    run.duration = 1.0 + 10.0 / f;
    run.settle = 1.0;
    run.record_every = 10;
    auto tr = simulate_lock(p, d, g, run);
    // amplitude at f only, so the modulation ripple does not count
    std::complex<double> ao = 0.0, ac = 0.0;
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
      if (tr.t[i] < run.settle) continue;
      const auto ph = std::exp(std::complex<double>(0, -2 * pi * f * tr.t[i]));
      ao += tr.zeta_open[i] * ph;
      ac += tr.zeta_closed[i] * ph;
    }
    const double measured = std::abs(ac) / std::abs(ao);
    INFO("f=" << f << " measured=" << measured << " predicted=" << rejection_ratio(p, g, f));
    CHECK(measured == Approx(rejection_ratio(p, g, f)).epsilon(0.1));
  }
}

TEST_CASE("random-walk drift: locked vs free running", "[lock]") {
  LockParams p;
  DriftModel d;
  d.kind = DriftKind::RandomWalk;
  d.sigma = 0.3;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    LockRun run;
    run.duration = 5.0;
    run.seed = seed;
    auto tr = simulate_lock(p, d, default_gains(), run);
    CHECK(tr.rms_closed <= 0.05);
    CHECK(tr.rms_closed < tr.rms_open);
    CHECK_FALSE(tr.diverged);
  }
}

TEST_CASE("unstable gains raise the divergence flag", "[lock]") {
  LockParams p;
  DriftModel d;
  d.kind = DriftKind::RandomWalk;
  d.sigma = 0.3;
  LockRun run;
  run.duration = 0.5;
  PidGains bad{-5.0, -2000.0, 0.0, -1e6, 1e6};
  auto tr = simulate_lock(p, d, bad, run);
  CHECK(tr.diverged);
}

TEST_CASE("trace csv", "[lock]") {
  LockTrace empty;
  CHECK(lock_trace_csv(empty) == "t,zeta_open,zeta_closed,error,actuation\n");
}
