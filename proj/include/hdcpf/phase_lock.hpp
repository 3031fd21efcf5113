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

#pragma once

// Active phase lock of the HD splitter interferometer: a phase-modulated
// locking beam, mixer + low-pass demodulation and a PID servo on the PZT.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hdcpf/errors.hpp"
#include "hdcpf/rng.hpp"

namespace hdcpf {

struct LockParams {
  double theta = 0.2;                        // modulation depth, rad
  double Omega = 2 * std::numbers::pi * 1e4;  // modulation, rad/s
  double omega = 2 * std::numbers::pi * 3.5e14;  // carrier; cancels in I
  double tau = std::numbers::pi / 2;         // mixer phase
  double E0H = 1.0, E0V = 1.0;
  double lpf_cutoff = 200.0;                 // Hz
  double dt = 5e-6;                          // s
  double detector_noise = 0.0;               // additive, intensity units

  double f_mod() const { return Omega / (2 * std::numbers::pi); }

  void validate() const {
    if (!(theta >= 0.0)) throw InvalidParameter("modulation depth must be >= 0");
    if (!(Omega > 0.0)) throw InvalidParameter("modulation frequency must be > 0");
    if (!(lpf_cutoff > 0.0 && lpf_cutoff < f_mod()))
      throw InvalidParameter("low-pass cutoff must lie in (0, f_mod)");
    if (!(dt > 0.0 && dt < 1.0 / (10.0 * f_mod())))
      throw InvalidParameter("dt must be positive and below a tenth of the modulation period");
    if (!(detector_noise >= 0.0)) throw InvalidParameter("detector noise must be >= 0");
  }
};

enum class DriftKind { None, RandomWalk, Sinusoidal, Step };

struct DriftModel {
  DriftKind kind = DriftKind::None;
  double sigma = 0.0;      // rad/sqrt(s), random walk
  double amplitude = 0.0;  // rad, sinusoid or step
  double period = 1.0;     // s, sinusoid
  double step_time = 0.0;  // s

  void validate() const {
    if (!(sigma >= 0.0 && amplitude >= 0.0)) throw InvalidParameter("drift magnitudes must be >= 0");
    if (kind == DriftKind::Sinusoidal && !(period > 0.0))
      throw InvalidParameter("drift period must be > 0");
  }
};

struct PidGains {
  double kp = 0.0, ki = 0.0, kd = 0.0;
  double out_min = -10.0, out_max = 10.0;  // rad

  void validate() const {
    for (double g : {kp, ki, kd, out_min, out_max})
      if (!std::isfinite(g)) throw InvalidParameter("PID gains must be finite");
    if (!(out_min <= out_max)) throw InvalidParameter("PID output limits out of order");
  }
};

/// Tuned for the default LockParams (loop crossover near 60 Hz).
inline PidGains default_gains() { return {0.5, 400.0, 0.0, -10.0, 10.0}; }

/// I = |E_out|^2 / 2 with E_out = (E_H + j E_V)/sqrt2 after the pi/4 polarizer.
/// The j is absorbed into the lock point, leaving
/// I = (E0H^2 + E0V^2 + 2 E0H E0V cos(theta sin(Omega t) - zeta)) / 4.
inline double intensity(double t, double zeta, const LockParams& p) {
  return 0.25 * (p.E0H * p.E0H + p.E0V * p.E0V +
                 2.0 * p.E0H * p.E0V * std::cos(p.theta * std::sin(p.Omega * t) - zeta));
}

/// Sampled intensity trace with samples_per_period samples per modulation
/// period; dt in the returned params is set to match.
inline std::vector<double> sample_trace(double zeta, LockParams& p, int periods,
                                        int samples_per_period = 200) {
  p.dt = 1.0 / (p.f_mod() * samples_per_period);
  std::vector<double> out(static_cast<std::size_t>(periods) * samples_per_period);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = intensity(static_cast<double>(k) * p.dt, zeta, p);
  return out;
}

/// AC-couple over whole periods, mix with cos(Omega t + tau), single-pole
/// low-pass, then average the last period to drop the ripple.
inline double demodulate_error(const std::vector<double>& samples, const LockParams& p) {
  p.validate();
  const double per = 1.0 / (p.f_mod() * p.dt);  // samples per period
  const double periods = static_cast<double>(samples.size()) / per;
  if (periods < 10.0 - 1e-9)
    throw InsufficientTrace("trace spans " + std::to_string(periods) + " periods, need >= 10");
  const auto whole = static_cast<std::size_t>(std::floor(periods + 1e-9) * per + 0.5);
  double mean = 0.0;
  for (std::size_t k = 0; k < whole; ++k) mean += samples[k];
  mean /= static_cast<double>(whole);

  const double a = 1.0 - std::exp(-2 * std::numbers::pi * p.lpf_cutoff * p.dt);
  const auto last = static_cast<std::size_t>(std::llround(per));
  double y = 0.0, tail = 0.0;
  for (std::size_t k = 0; k < whole; ++k) {
    const double t = static_cast<double>(k) * p.dt;
    y += a * ((samples[k] - mean) * std::cos(p.Omega * t + p.tau) - y);
    if (k + last >= whole) tail += y;
  }
  return tail / static_cast<double>(last);
}

/// Small-signal error: -E0H E0V J1(theta) sin(zeta) sin(tau) / 2.
inline double expected_error(double zeta, const LockParams& p) {
  return -0.5 * p.E0H * p.E0V * std::cyl_bessel_j(1.0, p.theta) * std::sin(zeta) * std::sin(p.tau);
}

/// Gain G with error = G sin(zeta) sin(tau), measured at zeta = tau = pi/2.
inline double calibrate_gain(LockParams p, int periods = 200) {
  p.tau = std::numbers::pi / 2;
  return demodulate_error(sample_trace(std::numbers::pi / 2, p, periods), p);
}

// ------------------------------------------------------------------- servo

struct PidState {
  double integral = 0.0;
  double prev_error = 0.0;
  bool primed = false;
};

/// Returns the actuation; the integral is frozen while the output saturates
/// in the direction of the error.
inline double pid_update(PidState& s, const PidGains& g, double error, double dt) {
  if (!(dt > 0.0)) throw InvalidParameter("dt must be > 0");
  const double deriv = s.primed ? (error - s.prev_error) / dt : 0.0;
  const double trial = s.integral + error * dt;
  double u = g.kp * error + g.ki * trial + g.kd * deriv;
  if (u > g.out_max || u < g.out_min) {
    const bool worsening = (u > g.out_max && error > 0) || (u < g.out_min && error < 0);
    if (!worsening) s.integral = trial;
    u = std::clamp(u, g.out_min, g.out_max);
  } else {
    s.integral = trial;
  }
  s.prev_error = error;
  s.primed = true;
  return u;
}

/// Streaming version of demodulate_error: high-pass for the AC coupling,
/// mixer, single-pole low-pass.
class Demodulator {
 public:
  explicit Demodulator(const LockParams& p)
      : p_(p),
        a_lp_(1.0 - std::exp(-2 * std::numbers::pi * p.lpf_cutoff * p.dt)),
        a_hp_(1.0 - std::exp(-2 * std::numbers::pi * p.lpf_cutoff / 2 * p.dt)) {}

  double step(double sample, double t) {
    if (!primed_) {
      dc_ = sample;
      primed_ = true;
    }
    dc_ += a_hp_ * (sample - dc_);
    y_ += a_lp_ * ((sample - dc_) * std::cos(p_.Omega * t + p_.tau) - y_);
    return y_;
  }

 private:
  LockParams p_;
  double a_lp_, a_hp_;
  double dc_ = 0.0, y_ = 0.0;
  bool primed_ = false;
};

struct LockTrace {
  std::vector<double> t, zeta_open, zeta_closed, error, actuation;  // decimated
  double rms_open = 0.0, rms_closed = 0.0;
  double gain = 0.0;
  bool diverged = false;
};

struct LockRun {
  double duration = 20.0;   // s
  double setpoint = 0.0;    // rad
  double zeta0 = 0.0;       // initial interferometer phase
  double settle = 0.0;      // s excluded from the RMS
  std::uint64_t seed = 1;
  std::size_t record_every = 1000;
};

/// Co-simulates the free-running (open) and servoed (closed) phase. The servo
/// error is setpoint - demod/G, so the zero crossing sits at zeta = setpoint
/// for any DC offset G sin(setpoint).
inline LockTrace simulate_lock(const LockParams& p, const DriftModel& drift, const PidGains& g,
                               const LockRun& run) {
  p.validate();
  drift.validate();
  g.validate();
  if (!(run.duration > 0.0)) throw InvalidParameter("duration must be > 0");
  LockTrace tr;
  tr.gain = calibrate_gain(p);
  auto eng = keyed_engine(run.seed, "lock-drift");
  std::normal_distribution<double> gauss(0.0, 1.0);
  const bool noisy = p.detector_noise > 0.0;

  const auto steps = static_cast<std::size_t>(std::llround(run.duration / p.dt));
  const double target = std::sin(run.setpoint);
  Demodulator demod(p);
  PidState pid;
  double walk = 0.0, u = 0.0, so = 0.0, sc = 0.0;
  std::size_t counted = 0;
  const std::size_t every = std::max<std::size_t>(run.record_every, 1);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * p.dt;
    double d = 0.0;
    switch (drift.kind) {
      case DriftKind::None: break;
      case DriftKind::RandomWalk:
        if (k > 0) walk += drift.sigma * std::sqrt(p.dt) * gauss(eng);
        d = walk;
        break;
      case DriftKind::Sinusoidal: d = drift.amplitude * std::sin(2 * std::numbers::pi * t / drift.period); break;
      case DriftKind::Step: d = t >= drift.step_time ? drift.amplitude : 0.0; break;
    }
    const double open = run.zeta0 + d;
    const double closed = open + u;
    double sample = intensity(t, closed, p);
    if (noisy) sample += p.detector_noise * gauss(eng);
    const double err = target - demod.step(sample, t) / tr.gain;
    u = pid_update(pid, g, err, p.dt);

    if (!std::isfinite(closed) || std::abs(closed - run.setpoint) > std::numbers::pi) tr.diverged = true;
    if (t >= run.settle) {
      so += (open - run.setpoint) * (open - run.setpoint);
      sc += (closed - run.setpoint) * (closed - run.setpoint);
      ++counted;
    }
    if (k % every == 0) {
      tr.t.push_back(t);
      tr.zeta_open.push_back(open);
      tr.zeta_closed.push_back(closed);
      tr.error.push_back(err);
      tr.actuation.push_back(u);
    }
  }
  if (counted > 0) {
    tr.rms_open = std::sqrt(so / static_cast<double>(counted));
    tr.rms_closed = std::sqrt(sc / static_cast<double>(counted));
  }
  return tr;
}

/// Linearized sensitivity |1 / (1 + C(jw) H(jw))| of the loop at f Hz, with
/// C the PID and H the low-pass. Ignores sampling and the high-pass.
inline double rejection_ratio(const LockParams& p, const PidGains& g, double f) {
  using c = std::complex<double>;
  const double w = 2 * std::numbers::pi * f;
  const c s(0.0, w);
  const c C = g.kp + g.ki / s + g.kd * s;
  const double wc = 2 * std::numbers::pi * p.lpf_cutoff;
  const c H = wc / (s + wc);
  return std::abs(1.0 / (1.0 + C * H));
}

inline std::string lock_trace_csv(const LockTrace& tr) {
  std::ostringstream os;
  os.precision(12);
  os << "t,zeta_open,zeta_closed,error,actuation\n";
  for (std::size_t i = 0; i < tr.t.size(); ++i)
    os << tr.t[i] << ',' << tr.zeta_open[i] << ',' << tr.zeta_closed[i] << ',' << tr.error[i] << ','
       << tr.actuation[i] << '\n';
  return os.str();
}

}  // namespace hdcpf
