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

// Fidelity estimation for the d=4 gate: classical fidelities in the ZX and
// XZ product bases, Hofmann bounds, the true process fidelity of the
// simulated channel, stabilizer fidelity of the entangled output, and the
// tabular/JSON emitters.

#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <array>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hdcpf/errors.hpp"
#include "hdcpf/fock.hpp"
#include "hdcpf/noise.hpp"
#include "hdcpf/oam_gate.hpp"
#include "hdcpf/qudit.hpp"

namespace hdcpf {

inline const std::set<BellOutcome>& resolvable_outcomes() {
  static const std::set<BellOutcome> s{BellOutcome::PhiPlus, BellOutcome::PhiMinus};
  return s;
}

// ----------------------------------------------------------------- bases

struct LabelledKet {
  std::string label;  // e.g. "-2", "-1+1", "-2-0"
  Eigen::VectorXcd v;
};

/// Single-photon Z basis: |-2>, |-1>, |0>, |+1>.
inline std::vector<LabelledKet> z_basis() {
  std::vector<LabelledKet> b;
  for (int k = 0; k < kD4; ++k) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(kD4);
    v(k) = 1.0;
    b.push_back({format_oam(level_to_oam(k)), v});
  }
  return b;
}

/// Single-photon X basis in display order: (-2+0), (-2-0), (-1+1), (-1-1).
inline std::vector<LabelledKet> x_basis() {
  const double r = 1 / std::sqrt(2.0);
  auto ket = [&](int a, int b, double s) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(kD4);
    v(a) = r;
    v(b) = s * r;
    return v;
  };
  return {{"-2+0", ket(0, 2, 1)}, {"-2-0", ket(0, 2, -1)}, {"-1+1", ket(1, 3, 1)},
          {"-1-1", ket(1, 3, -1)}};
}

struct BasisEntry {
  std::string label1, label4;
  Eigen::VectorXcd v1, v4;
  QuditState input() const { return QuditState::product(v1, v4); }
  std::string label() const { return label1 + "|" + label4; }
};

/// Product-state table. For ZX and XZ the two measurement bases are the same
/// as the preparation bases; the photon-1 index is the major one.
struct BasisTable {
  std::string name;
  std::vector<BasisEntry> entries;
  std::vector<LabelledKet> basis1, basis4;  // measurement bases (empty for TableA3)
};

inline BasisTable zx_table() {
  BasisTable t{"ZX", {}, z_basis(), x_basis()};
  for (const auto& a : t.basis1)
    for (const auto& b : t.basis4) t.entries.push_back({a.label, b.label, a.v, b.v});
  return t;
}

inline BasisTable xz_table() {
  BasisTable t{"XZ", {}, x_basis(), z_basis()};
  for (const auto& a : t.basis1)
    for (const auto& b : t.basis4) t.entries.push_back({a.label, b.label, a.v, b.v});
  return t;
}

/// The seven superposition inputs of Table A3 (photon 1, photon 4).
inline BasisTable table_a3() {
  const double r = 1 / std::sqrt(2.0);
  auto ket = [&](int a, int b) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(kD4);
    v(oam_to_level(a)) = r;
    v(oam_to_level(b)) = r;
    return v;
  };
  auto e = [&](const char* l1, int a1, int b1, const char* l4, int a4, int b4) {
    return BasisEntry{l1, l4, ket(a1, b1), ket(a4, b4)};
  };
  return {"TableA3",
          {e("-2+0", -2, 0, "0+1", 0, 1), e("-2+0", -2, 0, "-1+0", -1, 0),
           e("-2+0", -2, 0, "-2+0", -2, 0), e("-2+0", -2, 0, "-1+1", -1, 1),
           e("-1+1", -1, 1, "-1+0", -1, 0), e("-1+1", -1, 1, "-2+0", -2, 0),
           e("-1+1", -1, 1, "-1+1", -1, 1)},
          {},
          {}};
}

inline BasisTable basis_table(std::string_view name) {
  if (name == "ZX") return zx_table();
  if (name == "XZ") return xz_table();
  if (name == "TableA3") return table_a3();
  throw InvalidParameter("unknown basis table '" + std::string(name) + "'");
}

/// Probability of each joint outcome (photon-1 index major) for rho.
inline Eigen::VectorXd outcome_probabilities(const Eigen::MatrixXcd& rho, const BasisTable& t) {
  const std::size_t n1 = t.basis1.size(), n4 = t.basis4.size();
  Eigen::VectorXd p(static_cast<Eigen::Index>(n1 * n4));
  for (std::size_t a = 0; a < n1; ++a)
    for (std::size_t b = 0; b < n4; ++b) {
      const Eigen::VectorXcd f = QuditState::product(t.basis1[a].v, t.basis4[b].v).amps();
      p(static_cast<Eigen::Index>(a * n4 + b)) = std::max(0.0, (f.adjoint() * rho * f)(0, 0).real());
    }
  return p;
}

/// Index of the outcome the ideal gate produces for each table row.
inline std::vector<int> expected_outcomes(const BasisTable& t) {
  std::vector<int> out;
  const auto U = cpf_oracle(kD4);
  for (const auto& e : t.entries) {
    const Eigen::VectorXcd o = U * e.input().amps();
    const Eigen::VectorXd p = outcome_probabilities(o * o.adjoint(), t);
    Eigen::Index k = 0;
    p.maxCoeff(&k);
    if (std::abs(p(k) - 1.0) > 1e-12) throw BasisIncomplete("ideal output is not a basis outcome");
    out.push_back(static_cast<int>(k));
  }
  return out;
}

// --------------------------------------------------------------- fidelity

struct Bounds {
  double lower = 0.0, upper = 0.0;
};

/// F in [F_ZX + F_XZ - 1, min(F_ZX, F_XZ)], lower clamped at 0.
inline Bounds hofmann_bounds(double f_zx, double f_xz) {
  auto check = [](double f) {
    if (!(f >= 0.0 && f <= 1.0)) throw InvalidParameter("fidelity must lie in [0, 1]");
  };
  check(f_zx);
  check(f_xz);
  return {std::max(0.0, f_zx + f_xz - 1.0), std::min(f_zx, f_xz)};
}

struct BasisRun {
  std::string basis;
  double fidelity = 0.0;
  Eigen::MatrixXd probabilities;  // rows: inputs, columns: outcomes (conditional on heralding)
  std::vector<std::vector<std::uint64_t>> counts;  // shot mode only
  std::vector<double> heralding;  // per input
  std::vector<int> expected;
};

struct FidelityReport {
  BasisRun zx, xz;
  double f_zx = 0.0, f_xz = 0.0;
  Bounds bounds;
  std::uint64_t shots = 0;  // 0 = analytic
};

/// Runs one basis through the pipeline. shots == 0 gives exact values.
inline BasisRun run_basis(const CpfD4Pipeline& pipe, const BasisTable& t, std::uint64_t shots,
                          const NoiseSpec& noise, const NoisyChannel* realized = nullptr) {
  if (t.basis1.empty()) throw InvalidParameter("basis '" + t.name + "' has no measurement basis");
  BasisRun r;
  r.basis = t.name;
  r.expected = expected_outcomes(t);
  const auto n = static_cast<Eigen::Index>(t.entries.size());
  r.probabilities = Eigen::MatrixXd::Zero(n, n);
  double sum = 0.0;
  const NoisyChannel own = realized ? NoisyChannel{} : pipe.realize(noise);
  const NoisyChannel& ch = realized ? *realized : own;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto res = pipe.evaluate(ch, t.entries[static_cast<std::size_t>(i)].input(), resolvable_outcomes());
    r.heralding.push_back(res.probability);
    const Eigen::VectorXd p = outcome_probabilities(res.rho, t);
    r.probabilities.row(i) = p.transpose() / p.sum();
    const int want = r.expected[static_cast<std::size_t>(i)];
    if (shots == 0) {
      sum += r.probabilities(i, want);
      continue;
    }
    Distribution dist;
    for (Eigen::Index k = 0; k < n; ++k) dist[std::to_string(100 + k)] = r.probabilities(i, k);
    const auto c = sample_counts(dist, shots, noise.seed, stream_id(t.name) + static_cast<std::uint64_t>(i));
    std::vector<std::uint64_t> row(static_cast<std::size_t>(n), 0);
    for (const auto& [k, v] : c) row[static_cast<std::size_t>(std::stoi(k) - 100)] = v;
    sum += static_cast<double>(row[static_cast<std::size_t>(want)]) / static_cast<double>(shots);
    r.counts.push_back(std::move(row));
  }
  r.fidelity = sum / static_cast<double>(n);
  return r;
}

inline FidelityReport run_fidelity_experiment(std::uint64_t shots, const NoiseSpec& noise,
                                              const CpfD4Pipeline& pipe = default_pipeline()) {
  FidelityReport rep;
  rep.shots = shots;
  const auto ch = pipe.realize(noise);
  rep.zx = run_basis(pipe, zx_table(), shots, noise, &ch);
  rep.xz = run_basis(pipe, xz_table(), shots, noise, &ch);
  rep.f_zx = std::clamp(rep.zx.fidelity, 0.0, 1.0);
  rep.f_xz = std::clamp(rep.xz.fidelity, 0.0, 1.0);
  rep.bounds = hofmann_bounds(rep.f_zx, rep.f_xz);
  return rep;
}

/// Process fidelity of the heralded, corrected channel with the CPF unitary:
/// sum_k |Tr(U^+ A_k)|^2 / (D^2 p) averaged over noise realizations, where p
/// is the success probability for the maximally mixed input.
inline double process_fidelity(const NoisyChannel& ch,
                               const std::set<BellOutcome>& accepted = resolvable_outcomes()) {
  const auto U = cpf_oracle(kD4);
  const double D = kD4 * kD4;
  double num = 0.0, succ = 0.0;
  for (const auto& [w, maps] : ch.parts)
    for (const auto& h : maps) {
      if (!h.outcome || !accepted.count(*h.outcome)) continue;
      const Eigen::MatrixXcd A = correction_unitary(*h.outcome, kD4) * h.A;
      num += w * std::norm((U.adjoint() * A).trace());
      succ += w * A.squaredNorm() / D;
    }
  if (succ <= 0.0) throw EmptyPostSelection("channel never heralds");
  return num / (D * D * succ);
}

inline double process_fidelity(const NoiseSpec& noise, const CpfD4Pipeline& pipe = default_pipeline()) {
  return process_fidelity(pipe.realize(noise));
}

// The pairwise X basis above is not unbiased with Z in d = 4: a phase between
// the {-2,0} and {-1,+1} blocks is invisible to both tables. The Fourier basis
// is, so it gives bounds that hold for every channel.

/// f_k = sum_j i^{jk} |j> / 2 over the four levels.
inline std::vector<Eigen::VectorXcd> fourier_basis() {
  std::vector<Eigen::VectorXcd> out;
  for (int k = 0; k < kD4; ++k) {
    Eigen::VectorXcd f(kD4);
    for (int j = 0; j < kD4; ++j) f(j) = std::pow(cplx(0.0, 1.0), j * k) / 2.0;
    out.push_back(f);
  }
  return out;
}

/// Mean probability of the ideal output U|in> over Z x F (z_first) or F x Z.
inline double unbiased_fidelity(const CpfD4Pipeline& pipe, const NoisyChannel& ch, bool z_first) {
  const auto U = cpf_oracle(kD4);
  const auto f = fourier_basis();
  double sum = 0.0;
  for (int a = 0; a < kD4; ++a)
    for (int b = 0; b < kD4; ++b) {
      Eigen::VectorXcd z = Eigen::VectorXcd::Zero(kD4);
      z(a) = 1.0;
      const Eigen::VectorXcd& x = f[static_cast<std::size_t>(b)];
      Eigen::VectorXcd in(kD4 * kD4);
      for (int i = 0; i < kD4; ++i)
        for (int j = 0; j < kD4; ++j) in(i * kD4 + j) = z_first ? z(i) * x(j) : x(i) * z(j);
      const auto res = pipe.evaluate(ch, QuditState(kD4, in), resolvable_outcomes());
      const Eigen::VectorXcd out = U * in;
      sum += (out.adjoint() * res.rho * out)(0, 0).real();
    }
  return sum / (kD4 * kD4);
}

struct ContainmentCheck {
  double process = 0.0;
  Bounds table;      // ZX/XZ tables
  Bounds unbiased;   // Z x Fourier
};

inline ContainmentCheck containment_check(const NoiseSpec& noise,
                                          const CpfD4Pipeline& pipe = default_pipeline()) {
  const auto ch = pipe.realize(noise);
  ContainmentCheck c;
  c.process = process_fidelity(ch);
  const double zx = run_basis(pipe, zx_table(), 0, noise, &ch).fidelity;
  const double xz = run_basis(pipe, xz_table(), 0, noise, &ch).fidelity;
  c.table = hofmann_bounds(std::clamp(zx, 0.0, 1.0), std::clamp(xz, 0.0, 1.0));
  c.unbiased = hofmann_bounds(std::clamp(unbiased_fidelity(pipe, ch, true), 0.0, 1.0),
                              std::clamp(unbiased_fidelity(pipe, ch, false), 0.0, 1.0));
  return c;
}

// ------------------------------------------------------------- stabilizers

/// F = (1 + <ZX> + <XZ> + <YY>)/4 for the target
/// (|-1,-1> + |-1,+1> + |+1,-1> - |+1,+1>)/2.
inline double stabilizer_fidelity(double e1, double e2, double e3) {
  for (double e : {e1, e2, e3})
    if (!(e >= -1.0 - 1e-12 && e <= 1.0 + 1e-12))
      throw InvalidParameter("expectation values must lie in [-1, 1]");
  return (1.0 + e1 + e2 + e3) / 4.0;
}

/// The two-qubit block of rho on span{|-1>, |+1>} x span{|-1>, |+1>}, with
/// |-1> as qubit state 0.
inline Eigen::Matrix4cd qubit_block(const Eigen::MatrixXcd& rho) {
  const int lv[2] = {oam_to_level(-1), oam_to_level(1)};
  Eigen::Matrix4cd b;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      b(i, j) = rho(lv[i / 2] * kD4 + lv[i % 2], lv[j / 2] * kD4 + lv[j % 2]);
  return b;
}

inline std::array<double, 3> stabilizer_expectations(const Eigen::Matrix4cd& rho) {
  Eigen::Matrix2cd X, Y, Z;
  X << 0, 1, 1, 0;
  Y << 0, -kI, kI, 0;
  Z << 1, 0, 0, -1;
  auto k2 = [](const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
    Eigen::Matrix4cd m;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) m.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return m;
  };
  return {(rho * k2(Z, X)).trace().real(), (rho * k2(X, Z)).trace().real(),
          (rho * k2(Y, Y)).trace().real()};
}

inline Eigen::Vector4cd entangled_target() {
  Eigen::Vector4cd v;
  v << 0.5, 0.5, 0.5, -0.5;
  return v;
}

struct SuiteEntry {
  int index = 0;  // 1-based Table A3 row
  std::string label;
  double fidelity = 0.0;
  std::optional<std::array<double, 3>> expectations;  // state 7 only
  double heralding = 0.0;
};

/// Table A3: states 1-6 scored against the (unchanged) product output,
/// state 7 through its stabilizers.
inline std::vector<SuiteEntry> superposition_suite(std::uint64_t shots, const NoiseSpec& noise,
                                                   const CpfD4Pipeline& pipe = default_pipeline()) {
  const auto t = table_a3();
  const auto U = cpf_oracle(kD4);
  std::vector<SuiteEntry> out;
  auto eng = keyed_engine(noise.seed, "superposition-suite");
  const auto ch = pipe.realize(noise);
  for (std::size_t i = 0; i < t.entries.size(); ++i) {
    const auto& e = t.entries[i];
    const auto res = pipe.evaluate(ch, e.input(), resolvable_outcomes());
    SuiteEntry s;
    s.index = static_cast<int>(i) + 1;
    s.label = e.label();
    s.heralding = res.probability;
    if (i + 1 < t.entries.size()) {
      const Eigen::VectorXcd want = U * e.input().amps();
      const double f = std::clamp((want.adjoint() * res.rho * want)(0, 0).real(), 0.0, 1.0);
      if (shots == 0) {
        s.fidelity = f;
      } else {
        std::binomial_distribution<std::uint64_t> bin(shots, f);
        s.fidelity = static_cast<double>(bin(eng)) / static_cast<double>(shots);
      }
    } else {
      auto ex = stabilizer_expectations(qubit_block(res.rho));
      if (shots > 0)
        for (auto& x : ex) {
          std::binomial_distribution<std::uint64_t> bin(shots, std::clamp((1 + x) / 2, 0.0, 1.0));
          x = 2.0 * static_cast<double>(bin(eng)) / static_cast<double>(shots) - 1.0;
        }
      for (auto& x : ex) x = std::clamp(x, -1.0, 1.0);
      s.expectations = ex;
      s.fidelity = stabilizer_fidelity(ex[0], ex[1], ex[2]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ------------------------------------------------------ noise diagnostics

/// Fraction of trials where all four photons survive and the gate heralds.
/// Loss is drawn photon by photon, independently of the analytic scaling.
inline double sample_heralding(const QuditState& psi, std::uint64_t trials, const NoiseSpec& noise,
                               const CpfD4Pipeline& pipe = default_pipeline()) {
  NoiseSpec lossless = noise;
  lossless.loss = 0.0;
  const double ph = pipe.run(psi, resolvable_outcomes(), lossless).probability;
  auto eng = keyed_engine(noise.seed, "loss-trials");
  std::bernoulli_distribution herald(ph), keep(1.0 - noise.loss);
  std::uint64_t ok = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    bool all = true;
    for (int k = 0; k < 4; ++k) all = keep(eng) && all;
    if (herald(eng) && all) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(trials);
}

/// Phase-sensitive coincidence probability of the locking observable (a
/// balanced Mach-Zehnder fringe behind a polarizer), averaged over jitter.
inline double locking_coincidence(const NoiseSpec& noise, double setpoint = 0.0) {
  double p = 0.0;
  for (const auto& r : sample_realizations(noise)) p += r.weight * 0.5 * (1.0 + std::cos(setpoint + r.zeta[0]));
  return p;
}

/// Bisects the dephasing probability so that the analytic F_ZX hits target.
inline double calibrate_dephasing(double target, NoiseSpec base = {},
                                  const CpfD4Pipeline& pipe = default_pipeline(), int iterations = 30) {
  if (!(target > 0.0 && target <= 1.0)) throw InvalidParameter("target fidelity must lie in (0, 1]");
  double lo = 0.0, hi = 1.0;
  auto f = [&](double p) {
    NoiseSpec n = base;
    n.dephasing = p;
    return run_basis(pipe, zx_table(), 0, n).fidelity;
  };
  if (f(hi) > target) return hi;
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// --------------------------------------------------------------- emission

/// Fixed 12-significant-digit formatting used in every emitted file.
inline std::string fmt12(double v) {
  if (v == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Rounds through the 12-digit text form so JSON output is bit-stable.
inline double round12(double v) { return std::stod(fmt12(v)); }

/// One row per input x outcome.
inline std::string basis_run_csv(const BasisRun& r, const BasisTable& t) {
  std::ostringstream os;
  os << "basis,input,outcome,probability,count,expected\n";
  const auto n = t.entries.size();
  for (std::size_t i = 0; i < n && static_cast<Eigen::Index>(i) < r.probabilities.rows(); ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const auto& o = t.basis1[k / t.basis4.size()].label + "|" + t.basis4[k % t.basis4.size()].label;
      os << r.basis << "," << t.entries[i].label() << "," << o << ","
         << fmt12(r.probabilities(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))) << ","
         << (r.counts.empty() ? 0 : r.counts[i][k]) << "," << (r.expected[i] == static_cast<int>(k))
         << "\n";
    }
  return os.str();
}

/// The 16 x 16 matrix alone, rows = inputs, in table order.
inline std::string matrix_csv(const Eigen::MatrixXd& m, const BasisTable& t) {
  std::ostringstream os;
  os << "input";
  for (const auto& e : t.entries) os << "," << e.label();
  os << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << t.entries[static_cast<std::size_t>(i)].label();
    for (Eigen::Index k = 0; k < m.cols(); ++k) os << "," << fmt12(m(i, k));
    os << "\n";
  }
  return os.str();
}

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(round12(m(i, k)));
    j.push_back(row);
  }
  return j;
}

inline nlohmann::json to_json(const FidelityReport& r) {
  nlohmann::json j;
  j["F_ZX"] = round12(r.f_zx);
  j["F_XZ"] = round12(r.f_xz);
  j["bounds"] = {{"lower", round12(r.bounds.lower)}, {"upper", round12(r.bounds.upper)}};
  j["shots"] = r.shots;
  j["mode"] = r.shots == 0 ? "analytic" : "shots";
  j["ZX"] = matrix_json(r.zx.probabilities);
  j["XZ"] = matrix_json(r.xz.probabilities);
  return j;
}

inline nlohmann::json to_json(const std::vector<SuiteEntry>& s) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : s) {
    nlohmann::json x{{"index", e.index}, {"input", e.label}, {"fidelity", round12(e.fidelity)},
                     {"heralding", round12(e.heralding)}};
    if (e.expectations)
      x["stabilizers"] = {round12((*e.expectations)[0]), round12((*e.expectations)[1]),
                          round12((*e.expectations)[2])};
    j.push_back(x);
  }
  return j;
}

}  // namespace hdcpf
