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

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hdcpf/errors.hpp"

namespace hdcpf {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

/// Amplitudes with modulus below this are dropped after every transform.
inline constexpr double kDefaultPrune = 1e-12;

enum class Pol : int { H = 0, V = 1 };

inline char pol_char(Pol p) { return p == Pol::H ? 'H' : 'V'; }

/// One optical mode: path label, linear polarization, OAM azimuthal index.
struct Mode {
  std::string path;
  Pol pol = Pol::H;
  int oam = 0;

  friend bool operator==(const Mode&, const Mode&) = default;
};

inline std::string format_oam(int l) {
  if (l > 0) return "+" + std::to_string(l);
  return std::to_string(l);
}

/// "path:pol:l", e.g. "C:H:+1".
inline std::string to_string(const Mode& m) {
  return m.path + ":" + pol_char(m.pol) + ":" + format_oam(m.oam);
}

/// Truncated mode space: paths x {H, V} x [-L, L] with a dense index.
class ModeSpace {
 public:
  ModeSpace(std::vector<std::string> paths, int truncation)
      : paths_(std::move(paths)), L_(truncation) {
    if (L_ < 0) throw InvalidParameter("truncation bound must be non-negative");
    for (std::size_t i = 0; i < paths_.size(); ++i) {
      if (paths_[i].empty()) throw InvalidParameter("empty path label");
      for (std::size_t j = 0; j < i; ++j)
        if (paths_[j] == paths_[i])
          throw InvalidParameter("duplicate path label '" + paths_[i] + "'");
    }
  }

  const std::vector<std::string>& paths() const { return paths_; }
  int truncation() const { return L_; }
  std::size_t ladder() const { return static_cast<std::size_t>(2 * L_ + 1); }
  std::size_t size() const { return paths_.size() * 2 * ladder(); }

  bool has_path(std::string_view p) const {
    return std::find(paths_.begin(), paths_.end(), p) != paths_.end();
  }

  std::size_t path_index(std::string_view p) const {
    auto it = std::find(paths_.begin(), paths_.end(), p);
    if (it == paths_.end())
      throw SpaceMismatch("unknown path '" + std::string(p) + "'");
    return static_cast<std::size_t>(it - paths_.begin());
  }

  bool in_window(int l) const { return l >= -L_ && l <= L_; }

  std::size_t index(std::size_t path_idx, Pol pol, int l) const {
    if (!in_window(l))
      throw TruncationOverflow("OAM index " + std::to_string(l) +
                               " outside [-" + std::to_string(L_) + ", " +
                               std::to_string(L_) + "]");
    return (path_idx * 2 + static_cast<std::size_t>(pol)) * ladder() +
           static_cast<std::size_t>(l + L_);
  }

  std::size_t index(const Mode& m) const {
    return index(path_index(m.path), m.pol, m.oam);
  }

  Mode mode(std::size_t idx) const {
    const std::size_t per_pol = ladder();
    const std::size_t l = idx % per_pol;
    const std::size_t pp = idx / per_pol;
    return Mode{paths_[pp / 2], static_cast<Pol>(pp % 2),
                static_cast<int>(l) - L_};
  }

  friend bool operator==(const ModeSpace& a, const ModeSpace& b) {
    return a.L_ == b.L_ && a.paths_ == b.paths_;
  }

 private:
  std::vector<std::string> paths_;
  int L_;
};

using SpacePtr = std::shared_ptr<const ModeSpace>;

inline SpacePtr make_space(std::vector<std::string> paths, int truncation) {
  return std::make_shared<const ModeSpace>(std::move(paths), truncation);
}

inline void require_same(const SpacePtr& a, const SpacePtr& b) {
  if (a == b) return;
  if (!a || !b || !(*a == *b))
    throw SpaceMismatch("operands live on different mode spaces");
}

/// Column-sparse complex square matrix. Column j lists (row, value) pairs
/// sorted by row.
class SparseOp {
 public:
  using Entry = std::pair<std::size_t, cplx>;
  using Column = std::vector<Entry>;

  SparseOp() = default;
  explicit SparseOp(std::size_t n) : cols_(n) {}

  static SparseOp identity(std::size_t n) {
    SparseOp m(n);
    for (std::size_t j = 0; j < n; ++j) m.cols_[j].push_back({j, 1.0});
    return m;
  }

  std::size_t dim() const { return cols_.size(); }
  const Column& col(std::size_t j) const { return cols_[j]; }

  void set_column(std::size_t j, Column c) {
    std::sort(c.begin(), c.end(),
              [](const Entry& a, const Entry& b) { return a.first < b.first; });
    Column merged;
    for (auto& e : c) {
      if (!merged.empty() && merged.back().first == e.first)
        merged.back().second += e.second;
      else
        merged.push_back(e);
    }
    std::erase_if(merged, [](const Entry& e) { return std::abs(e.second) == 0.0; });
    cols_[j] = std::move(merged);
  }

  cplx at(std::size_t r, std::size_t c) const {
    for (const auto& [row, v] : cols_[c])
      if (row == r) return v;
    return 0.0;
  }

  /// this * rhs (rhs applied first).
  SparseOp operator*(const SparseOp& rhs) const {
    if (rhs.dim() != dim()) throw SpaceMismatch("operator dimension mismatch");
    SparseOp out(dim());
    for (std::size_t j = 0; j < dim(); ++j) {
      Column acc;
      for (const auto& [k, b] : rhs.cols_[j])
        for (const auto& [i, a] : cols_[k]) acc.push_back({i, a * b});
      out.set_column(j, std::move(acc));
    }
    return out;
  }

  SparseOp adjoint() const {
    SparseOp out(dim());
    std::vector<Column> rows(dim());
    for (std::size_t j = 0; j < dim(); ++j)
      for (const auto& [i, v] : cols_[j]) rows[i].push_back({j, std::conj(v)});
    for (std::size_t i = 0; i < dim(); ++i) out.set_column(i, std::move(rows[i]));
    return out;
  }

  std::vector<cplx> apply(std::span<const cplx> v) const {
    std::vector<cplx> out(dim(), 0.0);
    for (std::size_t j = 0; j < dim(); ++j) {
      if (v[j] == 0.0) continue;
      for (const auto& [i, a] : cols_[j]) out[i] += a * v[j];
    }
    return out;
  }

  /// max |(A - B)_ij| over all entries.
  static double max_abs_diff(const SparseOp& a, const SparseOp& b) {
    double worst = 0.0;
    for (std::size_t j = 0; j < a.dim(); ++j) {
      Column diff = a.cols_[j];
      for (const auto& [i, v] : b.cols_[j]) diff.push_back({i, -v});
      std::sort(diff.begin(), diff.end(),
                [](const Entry& x, const Entry& y) { return x.first < y.first; });
      std::size_t k = 0;
      while (k < diff.size()) {
        cplx s = 0.0;
        std::size_t r = diff[k].first;
        while (k < diff.size() && diff[k].first == r) s += diff[k++].second;
        worst = std::max(worst, std::abs(s));
      }
    }
    return worst;
  }

 private:
  std::vector<Column> cols_;
};

/// Unnormalized amplitude vector over a mode space.
class SinglePhotonState {
 public:
  SinglePhotonState() = default;
  explicit SinglePhotonState(SpacePtr space)
      : space_(std::move(space)), amps_(space_->size(), 0.0) {}
  SinglePhotonState(SpacePtr space, std::vector<cplx> amps)
      : space_(std::move(space)), amps_(std::move(amps)) {
    if (amps_.size() != space_->size())
      throw SpaceMismatch("amplitude vector does not match mode space size");
  }

  static SinglePhotonState basis(SpacePtr space, const Mode& m) {
    SinglePhotonState s(space);
    s.amps_[space->index(m)] = 1.0;
    return s;
  }

  const SpacePtr& space() const { return space_; }
  std::span<const cplx> amps() const { return amps_; }
  cplx amp(const Mode& m) const { return amps_[space_->index(m)]; }
  cplx amp(std::size_t i) const { return amps_[i]; }

  SinglePhotonState& add(const Mode& m, cplx a) {
    amps_[space_->index(m)] += a;
    return *this;
  }

  double norm2() const {
    double n = 0.0;
    for (auto a : amps_) n += std::norm(a);
    return n;
  }

  /// Post-selection probability carried by a projected state.
  double probability() const { return norm2(); }

  SinglePhotonState normalized() const {
    const double n = std::sqrt(norm2());
    if (n == 0.0) throw EmptyPostSelection("cannot normalize the zero state");
    SinglePhotonState out(*this);
    for (auto& a : out.amps_) a /= n;
    return out;
  }

  SinglePhotonState scaled(cplx f) const {
    SinglePhotonState out(*this);
    for (auto& a : out.amps_) a *= f;
    return out;
  }

  cplx inner(const SinglePhotonState& other) const {
    require_same(space_, other.space_);
    cplx s = 0.0;
    for (std::size_t i = 0; i < amps_.size(); ++i)
      s += std::conj(amps_[i]) * other.amps_[i];
    return s;
  }

  void prune(double threshold = kDefaultPrune) {
    for (auto& a : amps_)
      if (std::abs(a) < threshold) a = 0.0;
  }

  /// One line per nonzero amplitude: "path:pol:l re im".
  std::string to_text(double threshold = kDefaultPrune) const {
    std::ostringstream os;
    char buf[96];
    for (std::size_t i = 0; i < amps_.size(); ++i) {
      if (std::abs(amps_[i]) < threshold) continue;
      std::snprintf(buf, sizeof buf, " %.12g %.12g", amps_[i].real(), amps_[i].imag());
      os << to_string(space_->mode(i)) << buf << '\n';
    }
    return os.str();
  }

 private:
  SpacePtr space_;
  std::vector<cplx> amps_;
};

enum class TransformKind { Unitary, Isometry, Projector };

inline const char* to_string(TransformKind k) {
  switch (k) {
    case TransformKind::Unitary: return "unitary";
    case TransformKind::Isometry: return "isometry";
    case TransformKind::Projector: return "projector";
  }
  return "?";
}

/// Single-photon linear map on a mode space.
///
/// Elements that shift the OAM ladder (SPP, QP) cannot map the edge of the
/// truncation window anywhere; those columns are marked out of domain and
/// any amplitude landing on them raises TruncationOverflow on application.
/// Unitarity is therefore checked on the domain columns only.
class ModeTransform {
 public:
  ModeTransform() = default;
  ModeTransform(SpacePtr space, SparseOp matrix, TransformKind kind,
                std::string provenance, std::vector<bool> domain = {})
      : space_(std::move(space)),
        matrix_(std::move(matrix)),
        kind_(kind),
        provenance_(std::move(provenance)),
        domain_(std::move(domain)) {
    if (matrix_.dim() != space_->size())
      throw SpaceMismatch("matrix does not match mode space size");
    if (domain_.empty()) domain_.assign(space_->size(), true);
  }

  static ModeTransform identity(SpacePtr space) {
    const auto n = space->size();
    return ModeTransform(std::move(space), SparseOp::identity(n),
                         TransformKind::Unitary, "I");
  }

  const SpacePtr& space() const { return space_; }
  const SparseOp& matrix() const { return matrix_; }
  TransformKind kind() const { return kind_; }
  const std::string& provenance() const { return provenance_; }
  bool in_domain(std::size_t col) const { return domain_[col]; }
  const std::vector<bool>& domain() const { return domain_; }

  cplx at(const Mode& out, const Mode& in) const {
    return matrix_.at(space_->index(out), space_->index(in));
  }

  /// max |(M^dagger M - I)_ij| over domain columns.
  double isometry_defect() const {
    double worst = 0.0;
    const auto n = matrix_.dim();
    std::vector<cplx> dense(n);
    for (std::size_t j = 0; j < n; ++j) {
      if (!domain_[j]) continue;
      std::fill(dense.begin(), dense.end(), cplx{});
      for (const auto& [r, v] : matrix_.col(j)) dense[r] = v;
      for (std::size_t k = 0; k < n; ++k) {
        if (!domain_[k]) continue;
        cplx s = 0.0;
        for (const auto& [r, v] : matrix_.col(k)) s += std::conj(dense[r]) * v;
        if (k == j) s -= 1.0;
        worst = std::max(worst, std::abs(s));
      }
    }
    return worst;
  }

  /// max |(M M^dagger - I)_ij|; only meaningful when every column is in domain.
  double coisometry_defect() const {
    ModeTransform adj(space_, matrix_.adjoint(), kind_, provenance_);
    return adj.isometry_defect();
  }

  /// max of |M^2 - M| and |M - M^dagger|.
  double projector_defect() const {
    return std::max(SparseOp::max_abs_diff(matrix_ * matrix_, matrix_),
                    SparseOp::max_abs_diff(matrix_, matrix_.adjoint()));
  }

  bool fully_in_domain() const {
    return std::all_of(domain_.begin(), domain_.end(), [](bool b) { return b; });
  }

  /// Verifies the algebraic property implied by kind().
  void self_check(double tol = 1e-10) const {
    double defect = 0.0;
    switch (kind_) {
      case TransformKind::Unitary:
        defect = isometry_defect();
        if (fully_in_domain()) defect = std::max(defect, coisometry_defect());
        break;
      case TransformKind::Isometry:
        defect = isometry_defect();
        break;
      case TransformKind::Projector:
        defect = projector_defect();
        break;
    }
    if (defect > tol)
      throw ConventionError(provenance_ + " is not " + to_string(kind_) +
                            " (defect " + std::to_string(defect) + ")");
  }

 private:
  SpacePtr space_;
  SparseOp matrix_;
  TransformKind kind_ = TransformKind::Unitary;
  std::string provenance_;
  std::vector<bool> domain_;
};

namespace detail {
inline int kind_rank(TransformKind k) {
  switch (k) {
    case TransformKind::Unitary: return 0;
    case TransformKind::Isometry: return 1;
    case TransformKind::Projector: return 2;
  }
  return 2;
}
}  // namespace detail

/// Product of transforms in application order: sequence[0] acts first.
inline ModeTransform compose_transforms(std::span<const ModeTransform> sequence) {
  if (sequence.empty()) throw InvalidParameter("cannot compose an empty sequence");
  SpacePtr space = sequence.front().space();
  SparseOp acc = sequence.front().matrix();
  std::vector<bool> domain = sequence.front().domain();
  TransformKind kind = sequence.front().kind();
  std::string prov = sequence.front().provenance();
  for (std::size_t s = 1; s < sequence.size(); ++s) {
    const auto& t = sequence[s];
    require_same(space, t.space());
    for (std::size_t j = 0; j < acc.dim(); ++j) {
      if (!domain[j]) continue;
      for (const auto& [r, v] : acc.col(j))
        if (!t.in_domain(r)) {
          domain[j] = false;
          break;
        }
    }
    acc = t.matrix() * acc;
    if (detail::kind_rank(t.kind()) > detail::kind_rank(kind)) kind = t.kind();
    prov += " ; " + t.provenance();
  }
  return ModeTransform(space, std::move(acc), kind, std::move(prov), std::move(domain));
}

inline ModeTransform compose_transforms(std::initializer_list<ModeTransform> seq) {
  return compose_transforms(std::span<const ModeTransform>(seq.begin(), seq.size()));
}

inline SinglePhotonState apply_to_single_photon(const ModeTransform& t,
                                                const SinglePhotonState& s,
                                                double prune = kDefaultPrune) {
  require_same(t.space(), s.space());
  for (std::size_t j = 0; j < s.amps().size(); ++j)
    if (std::abs(s.amp(j)) >= prune && !t.in_domain(j))
      throw TruncationOverflow(t.provenance() + " shifts " +
                               to_string(t.space()->mode(j)) +
                               " outside the truncation window");
  SinglePhotonState out(t.space(), t.matrix().apply(s.amps()));
  out.prune(prune);
  return out;
}

/// Multiplies by conj(phase) of the largest-magnitude overlap component so
/// that the candidate is comparable with a reference ray.
inline cplx alignment_phase(std::span<const cplx> reference,
                            std::span<const cplx> candidate) {
  std::size_t best = 0;
  double mag = -1.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double m = std::abs(std::conj(reference[i]) * candidate[i]);
    if (m > mag) {
      mag = m;
      best = i;
    }
  }
  const cplx ov = std::conj(reference[best]) * candidate[best];
  if (std::abs(ov) == 0.0) return 1.0;
  return std::conj(ov / std::abs(ov));
}

/// |<a|b>| / (|a| |b|)
inline double ray_overlap(std::span<const cplx> a, std::span<const cplx> b) {
  cplx s = 0.0;
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += std::conj(a[i]) * b[i];
    na += std::norm(a[i]);
    nb += std::norm(b[i]);
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::abs(s) / std::sqrt(na * nb);
}

}  // namespace hdcpf
