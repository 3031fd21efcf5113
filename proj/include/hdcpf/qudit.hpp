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

// Abstract arbitrary-d CPF protocol with labelled photons.

#pragma once

#include <array>
#include <map>
#include <string>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hdcpf/mode_space.hpp"

namespace hdcpf {

using QuditOperator = Eigen::MatrixXcd;

enum class BellOutcome { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

inline constexpr std::array<BellOutcome, 4> kAllBell{BellOutcome::PhiPlus, BellOutcome::PhiMinus,
                                                     BellOutcome::PsiPlus, BellOutcome::PsiMinus};

inline const char* to_string(BellOutcome b) {
  switch (b) {
    case BellOutcome::PhiPlus: return "PhiPlus";
    case BellOutcome::PhiMinus: return "PhiMinus";
    case BellOutcome::PsiPlus: return "PsiPlus";
    case BellOutcome::PsiMinus: return "PsiMinus";
  }
  return "?";
}

inline BellOutcome bell_from_string(std::string_view s) {
  for (auto b : kAllBell)
    if (s == to_string(b)) return b;
  throw InvalidParameter("unknown Bell outcome '" + std::string(s) + "'");
}

/// Joint state of qudits 1 and 4, amplitude c_{m,n} at index m*d + n.
class QuditState {
 public:
  QuditState() = default;
  QuditState(int d, Eigen::VectorXcd amps) : d_(d), amps_(std::move(amps)) {
    if (d_ < 2) throw InvalidDimension("d = " + std::to_string(d_));
    if (amps_.size() != d_ * d_) throw InvalidParameter("amplitude vector must have d^2 entries");
  }

  static QuditState basis(int d, int m, int n) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(d * d);
    v(m * d + n) = 1.0;
    return QuditState(d, v);
  }

  static QuditState product(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
    if (a.size() != b.size()) throw InvalidDimension("factors differ in dimension");
    const int d = static_cast<int>(a.size());
    Eigen::VectorXcd v(d * d);
    for (int m = 0; m < d; ++m)
      for (int n = 0; n < d; ++n) v(m * d + n) = a(m) * b(n);
    return QuditState(d, v);
  }

  int dim() const { return d_; }
  const Eigen::VectorXcd& amps() const { return amps_; }
  cplx amp(int m, int n) const { return amps_(m * d_ + n); }
  double norm2() const { return amps_.squaredNorm(); }
  bool is_normalized(double tol = 1e-12) const { return std::abs(norm2() - 1.0) <= tol; }

  QuditState normalized() const {
    const double n = amps_.norm();
    if (n == 0.0) throw EmptyPostSelection("zero qudit state");
    return QuditState(d_, amps_ / n);
  }

  /// |<this|other>|^2 for normalized states.
  double fidelity(const QuditState& o) const {
    if (o.d_ != d_) throw InvalidDimension("fidelity across dimensions");
    return std::norm(amps_.dot(o.amps_)) / (norm2() * o.norm2());
  }

  /// [[m, n, re, im], ...] over nonzero amplitudes, row-major.
  nlohmann::json to_json(double threshold = 0.0) const {
    nlohmann::json j = nlohmann::json::array();
    for (int m = 0; m < d_; ++m)
      for (int n = 0; n < d_; ++n) {
        const cplx a = amp(m, n);
        if (std::abs(a) > threshold || (threshold == 0.0 && a != 0.0))
          j.push_back({m, n, a.real(), a.imag()});
      }
    return j;
  }

  static QuditState from_json(int d, const nlohmann::json& j) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(d * d);
    for (const auto& e : j) {
      const int m = e.at(0).get<int>(), n = e.at(1).get<int>();
      if (m < 0 || n < 0 || m >= d || n >= d) throw InvalidParameter("qudit index out of range");
      v(m * d + n) += cplx(e.at(2).get<double>(), e.at(3).get<double>());
    }
    return QuditState(d, v);
  }

 private:
  int d_ = 0;
  Eigen::VectorXcd amps_;
};

inline void require_dimension(int d) {
  if (d < 2) throw InvalidDimension("d = " + std::to_string(d) + " (need d >= 2)");
}

/// I - 2 |d-1,d-1><d-1,d-1|
inline QuditOperator cpf_oracle(int d) {
  require_dimension(d);
  QuditOperator u = QuditOperator::Identity(d * d, d * d);
  u(d * d - 1, d * d - 1) = -1.0;
  return u;
}

enum class Port { A, B, C, D };

/// Ideal two-port router: |d-1> crosses over, every other level goes straight
/// (A -> C, B -> D).
struct HdRouter {
  int d;

  Port route(Port in, int level) const {
    if (level < 0 || level >= d) throw InvalidParameter("level out of range");
    const bool top = level == d - 1;
    if (in == Port::A) return top ? Port::D : Port::C;
    if (in == Port::B) return top ? Port::C : Port::D;
    throw InvalidParameter("router inputs are A and B");
  }

  /// Unitary on (port, level): input index port*d + k with A=0, B=1; output
  /// index with C=0, D=1.
  QuditOperator matrix() const {
    QuditOperator m = QuditOperator::Zero(2 * d, 2 * d);
    for (int in = 0; in < 2; ++in)
      for (int k = 0; k < d; ++k) {
        const Port o = route(in == 0 ? Port::A : Port::B, k);
        m((o == Port::C ? 0 : 1) * d + k, in * d + k) = 1.0;
      }
    return m;
  }
};

inline HdRouter ideal_hd_bs(int d) {
  require_dimension(d);
  return HdRouter{d};
}

/// Hadamard on span{|p>, |d-1>}, identity elsewhere.
inline QuditOperator subspace_hadamard(int p, int d) {
  require_dimension(d);
  if (p < 0 || p >= d - 1)
    throw InvalidSubspace("p = " + std::to_string(p) + " must satisfy 0 <= p < d-1");
  const double r = 1 / std::sqrt(2.0);
  QuditOperator h = QuditOperator::Identity(d, d);
  h(p, p) = r;
  h(p, d - 1) = r;
  h(d - 1, p) = r;
  h(d - 1, d - 1) = -r;
  return h;
}

/// I - 2|d-1><d-1| on one qudit.
inline QuditOperator flip_top(int d) {
  QuditOperator u = QuditOperator::Identity(d, d);
  u(d - 1, d - 1) = -1.0;
  return u;
}

inline QuditOperator kron(const QuditOperator& a, const QuditOperator& b) {
  QuditOperator out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Correction on qudits 1 (major index) and 4.
inline QuditOperator correction_unitary(BellOutcome o, int d) {
  require_dimension(d);
  const QuditOperator I = QuditOperator::Identity(d, d);
  const QuditOperator U = flip_top(d);
  switch (o) {
    case BellOutcome::PhiPlus: return kron(I, I);
    case BellOutcome::PhiMinus: return kron(U, I);
    case BellOutcome::PsiPlus: return kron(I, U);
    case BellOutcome::PsiMinus: return kron(U, U);
  }
  return kron(I, I);
}

struct ProtocolBranch {
  QuditState state;          // corrected, normalized heralded state
  double probability = 0.0;  // joint probability of post-selection and outcome
};

struct ProtocolResult {
  std::map<BellOutcome, ProtocolBranch> branches;
  std::array<double, 2> splitter_probability{};  // marginal per HD beam splitter
  double post_selection_probability = 0.0;       // both splitters

  double accepted_probability(std::initializer_list<BellOutcome> accepted) const {
    double p = 0.0;
    for (auto b : accepted) p += branches.at(b).probability;
    return p;
  }
};

/// Runs the labelled-photon protocol: auxiliaries (|p> + |d-1>)/sqrt2 at the
/// B ports, two ideal routers, one photon per output port, Hadamard on photon
/// 3, Bell projection of photons 2 and 3, and the matching correction.
inline ProtocolResult run_protocol(const QuditState& psi, int p) {
  const int d = psi.dim();
  require_dimension(d);
  if (p < 0 || p >= d - 1)
    throw InvalidSubspace("auxiliary index p = " + std::to_string(p) + " out of range");
  if (!psi.is_normalized(1e-12))
    throw NotNormalized("input norm^2 = " + std::to_string(psi.norm2()));
  const auto bs = ideal_hd_bs(d);
  const int top = d - 1;
  const double half = 0.5;  // both auxiliary amplitudes
  const std::array<int, 2> aux{p, top};

  // amplitude tensor over (c1, d1, d2, c2) levels after relabelling by port
  const int D = d;
  std::vector<cplx> T(static_cast<std::size_t>(D * D * D * D), 0.0);
  auto at = [&](int c1, int d1, int d2, int c2) -> cplx& {
    return T[static_cast<std::size_t>(((c1 * D + d1) * D + d2) * D + c2)];
  };
  ProtocolResult res;
  double ok1 = 0.0, ok2 = 0.0, ok = 0.0;
  for (int m = 0; m < d; ++m)
    for (int n = 0; n < d; ++n) {
      const cplx c = psi.amp(m, n);
      if (c == 0.0) continue;
      for (int a2 : aux)
        for (int a3 : aux) {
          const cplx amp = c * half;
          const Port o1 = bs.route(Port::A, m), o2 = bs.route(Port::B, a2);
          const Port o4 = bs.route(Port::A, n), o3 = bs.route(Port::B, a3);
          const bool s1 = o1 != o2, s2 = o4 != o3;
          // each splitter sees its own pair; mass per splitter is marginal
          if (s1) ok1 += std::norm(amp);
          if (s2) ok2 += std::norm(amp);
          if (!(s1 && s2)) continue;
          ok += std::norm(amp);
          const int c1 = o1 == Port::C ? m : a2, d1 = o1 == Port::C ? a2 : m;
          const int c2 = o4 == Port::C ? n : a3, d2 = o4 == Port::C ? a3 : n;
          at(c1, d1, d2, c2) += amp;
        }
    }
  res.splitter_probability = {ok1, ok2};
  res.post_selection_probability = ok;

  const QuditOperator H = subspace_hadamard(p, d);
  // Hadamard on photon 3 (index d2)
  std::vector<cplx> T3(T.size(), 0.0);
  for (int c1 = 0; c1 < D; ++c1)
    for (int d1 = 0; d1 < D; ++d1)
      for (int d2 = 0; d2 < D; ++d2)
        for (int c2 = 0; c2 < D; ++c2) {
          const cplx v = at(c1, d1, d2, c2);
          if (v == 0.0) continue;
          for (int k = 0; k < D; ++k)
            if (H(k, d2) != 0.0)
              T3[static_cast<std::size_t>(((c1 * D + d1) * D + k) * D + c2)] += H(k, d2) * v;
        }

  const double r = 1 / std::sqrt(2.0);
  auto bell_amp = [&](BellOutcome b, int x2, int x3) -> double {
    const bool pp = x2 == p && x3 == p, tt = x2 == top && x3 == top;
    const bool pt = x2 == p && x3 == top, tp = x2 == top && x3 == p;
    switch (b) {
      case BellOutcome::PhiPlus: return pp || tt ? r : 0.0;
      case BellOutcome::PhiMinus: return pp ? r : (tt ? -r : 0.0);
      case BellOutcome::PsiPlus: return pt || tp ? r : 0.0;
      case BellOutcome::PsiMinus: return pt ? r : (tp ? -r : 0.0);
    }
    return 0.0;
  };
  for (auto b : kAllBell) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(d * d);
    for (int c1 = 0; c1 < D; ++c1)
      for (int c2 = 0; c2 < D; ++c2)
        for (int x2 : aux)
          for (int x3 : aux)
            v(c1 * d + c2) +=
                bell_amp(b, x2, x3) * T3[static_cast<std::size_t>(((c1 * D + x2) * D + x3) * D + c2)];
    const double prob = v.squaredNorm();
    ProtocolBranch br;
    br.probability = prob;
    if (prob > 0.0) br.state = QuditState(d, correction_unitary(b, d) * v).normalized();
    res.branches[b] = br;
  }
  return res;
}

/// Fidelity of a heralded state to the oracle output, after global-phase
/// alignment (the modulus of the overlap is phase-free).
inline double oracle_fidelity(const QuditState& psi, const QuditState& out) {
  const QuditState ideal(psi.dim(), cpf_oracle(psi.dim()) * psi.amps());
  return ideal.fidelity(out);
}

}  // namespace hdcpf
