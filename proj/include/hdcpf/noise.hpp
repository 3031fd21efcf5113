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

// Monte Carlo pure-state noise for the d=4 pipeline.
//
// A NoiseSpec is turned into a fixed list of weighted realizations drawn from
// a keyed stream, so that every consumer (outcome averages, process
// fidelity, shot sampling) sees exactly the same noisy channel.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hdcpf/errors.hpp"
#include "hdcpf/mode_space.hpp"
#include "hdcpf/rng.hpp"

namespace hdcpf {

struct NoiseSpec {
  double phase_jitter = 0.0;  // sigma of the Gaussian arm phase, rad
  double dephasing = 0.0;     // probability of random OAM phases per shot
  double loss = 0.0;          // per-photon loss probability
  double visibility = 1.0;    // probability that photon 3 stays indistinguishable
  std::uint64_t seed = 0;
  int realizations = 64;      // channel samples for the continuous knobs

  bool is_zero() const {
    return phase_jitter == 0.0 && dephasing == 0.0 && loss == 0.0 && visibility == 1.0;
  }

  /// Only loss present: the conditional channel is still the ideal one.
  bool coherent() const { return phase_jitter == 0.0 && dephasing == 0.0 && visibility == 1.0; }

  void validate() const {
    auto prob = [](double p, const char* what) {
      if (!(p >= 0.0 && p <= 1.0))
        throw InvalidParameter(std::string(what) + " must lie in [0, 1]");
    };
    if (!(phase_jitter >= 0.0) || !std::isfinite(phase_jitter))
      throw InvalidParameter("phase jitter must be a finite non-negative number");
    prob(dephasing, "dephasing");
    prob(loss, "loss");
    prob(visibility, "visibility");
    if (realizations < 1) throw InvalidParameter("need at least one noise realization");
  }

  /// Probability that all four photons survive.
  double survival() const { return std::pow(1.0 - loss, 4); }

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

/// One draw of the noisy apparatus.
struct NoiseRealization {
  double weight = 1.0;
  std::array<double, 2> zeta{0.0, 0.0};  // arm phase of splitter 1 and 2
  bool dephased = false;
  std::array<double, 4> phase1{};  // OAM phases of photon 1, per level
  std::array<double, 4> phase4{};
  bool distinguishable = false;    // photon 3 misses the Bell-state interference
};

inline std::vector<NoiseRealization> sample_realizations(const NoiseSpec& spec) {
  spec.validate();
  if (spec.coherent()) return {NoiseRealization{}};
  auto eng = keyed_engine(spec.seed, "noise-realizations");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<NoiseRealization> out(static_cast<std::size_t>(spec.realizations));
  for (auto& r : out) {
    r.weight = 1.0 / spec.realizations;
    for (auto& z : r.zeta) z = spec.phase_jitter * gauss(eng);
    r.dephased = uni(eng) < spec.dephasing;
    for (int k = 0; k < 4; ++k) {
      const double a = 2 * kPi * uni(eng), b = 2 * kPi * uni(eng);
      if (r.dephased) {
        r.phase1[k] = a;
        r.phase4[k] = b;
      }
    }
    r.distinguishable = uni(eng) >= spec.visibility;
  }
  return out;
}

}  // namespace hdcpf
