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

// Multi-photon bosonic states in the occupation-number representation.
//
// A configuration is the sorted multiset of occupied mode indices. Stored
// amplitudes are coefficients in the orthonormal Fock basis; a monomial of
// creation operators a_{m1}^+ ... a_{mn}^+ |0> equals sqrt(prod k!) times the
// corresponding basis vector, k running over mode multiplicities.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hdcpf/mode_space.hpp"
#include "hdcpf/rng.hpp"

namespace hdcpf {

using Config = std::vector<std::uint32_t>;

/// Coefficients of products of creation operators, keyed by sorted config.
using Monomials = std::map<Config, cplx>;

namespace detail {

inline double factorial_weight(const Config& c) {
  // prod over distinct modes of k!
  double w = 1.0;
  std::size_t i = 0;
  while (i < c.size()) {
    std::size_t j = i;
    while (j < c.size() && c[j] == c[i]) ++j;
    for (std::size_t k = 2; k <= j - i; ++k) w *= double(k);
    i = j;
  }
  return w;
}

inline Config merged(const Config& a, const Config& b) {
  Config out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace detail

inline Monomials linear_monomials(const SinglePhotonState& s) {
  Monomials m;
  for (std::size_t i = 0; i < s.amps().size(); ++i)
    if (s.amp(i) != 0.0) m[Config{static_cast<std::uint32_t>(i)}] += s.amp(i);
  return m;
}

inline Monomials multiply(const Monomials& a, const Monomials& b) {
  Monomials out;
  for (const auto& [ca, va] : a)
    for (const auto& [cb, vb] : b) out[detail::merged(ca, cb)] += va * vb;
  return out;
}

/// A normalized-or-not n-photon state with sparse orthonormal coefficients.
class MultiPhotonState {
 public:
  MultiPhotonState() = default;
  explicit MultiPhotonState(SpacePtr space) : space_(std::move(space)) {}

  /// Vacuum-applied creation polynomial, converted to basis coefficients.
  static MultiPhotonState from_monomials(SpacePtr space, const Monomials& poly,
                                         bool normalize = true) {
    MultiPhotonState s(std::move(space));
    std::optional<std::size_t> n;
    for (const auto& [c, v] : poly) {
      if (v == 0.0) continue;
      if (n && *n != c.size()) throw InvalidParameter("mixed photon numbers in polynomial");
      n = c.size();
      for (auto m : c)
        if (m >= s.space_->size()) throw SpaceMismatch("mode index outside the mode space");
      s.terms_[c] += v * std::sqrt(detail::factorial_weight(c));
    }
    s.n_ = n.value_or(0);
    s.prune(0.0);
    if (normalize) s = s.normalized();
    return s;
  }

  const SpacePtr& space() const { return space_; }
  std::size_t photons() const { return n_; }
  const std::map<Config, cplx>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }

  cplx amp(const Config& c) const {
    auto it = terms_.find(c);
    return it == terms_.end() ? cplx(0.0) : it->second;
  }
  cplx amp(const std::vector<Mode>& modes) const { return amp(config_of(modes)); }

  Config config_of(const std::vector<Mode>& modes) const {
    Config c;
    for (const auto& m : modes) c.push_back(static_cast<std::uint32_t>(space_->index(m)));
    std::sort(c.begin(), c.end());
    return c;
  }

  void add(const Config& c, cplx v) {
    if (terms_.empty()) n_ = c.size();
    else if (c.size() != n_) throw InvalidParameter("photon number mismatch");
    terms_[c] += v;
  }

  double norm2() const {
    double s = 0.0;
    for (const auto& [c, v] : terms_) s += std::norm(v);
    return s;
  }

  MultiPhotonState normalized() const {
    const double n = std::sqrt(norm2());
    if (n == 0.0) throw EmptyPostSelection("cannot normalize the zero state");
    return scaled(1.0 / n);
  }

  MultiPhotonState scaled(cplx f) const {
    MultiPhotonState out(*this);
    for (auto& [c, v] : out.terms_) v *= f;
    return out;
  }

  MultiPhotonState& operator+=(const MultiPhotonState& o) {
    require_same(space_, o.space_);
    for (const auto& [c, v] : o.terms_) add(c, v);
    return *this;
  }

  cplx inner(const MultiPhotonState& o) const {
    require_same(space_, o.space_);
    cplx s = 0.0;
    for (const auto& [c, v] : terms_) s += std::conj(v) * o.amp(c);
    return s;
  }

  void prune(double threshold = kDefaultPrune) {
    std::erase_if(terms_, [&](const auto& kv) { return std::abs(kv.second) <= threshold; });
  }

  /// Photons per path label.
  std::map<std::string, int> path_counts(const Config& c) const {
    std::map<std::string, int> out;
    for (auto m : c) ++out[space_->mode(m).path];
    return out;
  }

  /// "path:pol:l[,path:pol:l...] re im" per term, in config order.
  std::string to_text(double threshold = kDefaultPrune) const {
    std::string out;
    char buf[96];
    for (const auto& [c, v] : terms_) {
      if (std::abs(v) < threshold) continue;
      for (std::size_t i = 0; i < c.size(); ++i) {
        if (i) out += ',';
        out += to_string(space_->mode(c[i]));
      }
      std::snprintf(buf, sizeof buf, " %.12g %.12g\n", v.real(), v.imag());
      out += buf;
    }
    return out;
  }

  friend bool operator==(const MultiPhotonState& a, const MultiPhotonState& b) {
    return a.n_ == b.n_ && a.terms_ == b.terms_;
  }

 private:
  SpacePtr space_;
  std::size_t n_ = 0;
  std::map<Config, cplx> terms_;
};

/// Symmetrized product of single photons, normalized.
inline MultiPhotonState inject_product(std::span<const SinglePhotonState> photons) {
  if (photons.empty()) throw InvalidParameter("no photons to inject");
  SpacePtr space = photons.front().space();
  Monomials poly{{Config{}, 1.0}};
  for (const auto& p : photons) {
    require_same(space, p.space());
    poly = multiply(poly, linear_monomials(p));
  }
  return MultiPhotonState::from_monomials(space, poly);
}

inline MultiPhotonState inject_product(std::initializer_list<SinglePhotonState> photons) {
  return inject_product(std::span<const SinglePhotonState>(photons.begin(), photons.size()));
}

/// Linear-optical evolution: every a_j^+ is replaced by sum_k M_kj a_k^+.
inline MultiPhotonState apply_transform(const ModeTransform& t, const MultiPhotonState& s,
                                        double prune = kDefaultPrune) {
  require_same(t.space(), s.space());
  const SparseOp& M = t.matrix();
  MultiPhotonState out(s.space());
  // Expand one photon at a time over all terms, merging after each step.
  // Key: (sorted outputs so far, inputs still to place).
  using Partial = std::pair<Config, Config>;
  std::map<Partial, cplx> level;
  for (const auto& [c, amp] : s.terms()) {
    for (auto m : c)
      if (!t.in_domain(m))
        throw TruncationOverflow(t.provenance() + " shifts " + to_string(s.space()->mode(m)) +
                                 " outside the truncation window");
    level[{Config{}, c}] += amp / std::sqrt(detail::factorial_weight(c));
  }
  for (bool more = true; more;) {
    more = false;
    std::map<Partial, cplx> next;
    for (const auto& [key, v] : level) {
      const auto& [done, rest] = key;
      if (rest.empty()) {
        next[key] += v;
        continue;
      }
      more = true;
      const Config tail(rest.begin() + 1, rest.end());
      for (const auto& [row, m] : M.col(rest.front())) {
        Config o = done;
        o.insert(std::upper_bound(o.begin(), o.end(), static_cast<std::uint32_t>(row)),
                 static_cast<std::uint32_t>(row));
        next[{std::move(o), tail}] += v * m;
      }
    }
    level = std::move(next);
  }
  std::map<Config, cplx> acc;
  for (const auto& [key, v] : level) acc[key.first] += v;
  for (auto& [o, v] : acc) {
    const cplx a = v * std::sqrt(detail::factorial_weight(o));
    if (std::abs(a) > prune) out.add(o, a);
  }
  if (out.size() == 0 && s.size() > 0) {
    // keep the photon number even for an annihilated state
    MultiPhotonState z(s.space());
    return z;
  }
  return out;
}

/// Required photon counts per detector. A detector may watch several paths
/// (an alias), e.g. the interfering and the distinguishable copy of a port.
struct DetectionPattern {
  std::map<std::string, int> required;
  std::map<std::string, std::vector<std::string>> aliases;

  std::vector<std::string> paths_of(const std::string& detector) const {
    auto it = aliases.find(detector);
    if (it != aliases.end()) return it->second;
    return {detector};
  }
};

struct PostSelection {
  MultiPhotonState state;  // normalized surviving state
  double probability = 0;  // surviving mass relative to the input norm
  double discarded = 0;
};

inline bool matches(const MultiPhotonState& s, const Config& c, const DetectionPattern& p) {
  const auto counts = s.path_counts(c);
  for (const auto& [det, need] : p.required) {
    int have = 0;
    for (const auto& path : p.paths_of(det)) {
      auto it = counts.find(path);
      if (it != counts.end()) have += it->second;
    }
    if (have != need) return false;
  }
  return true;
}

/// Unnormalized projection onto the pattern.
inline MultiPhotonState project(const MultiPhotonState& s, const DetectionPattern& p) {
  int total = 0;
  for (const auto& [det, need] : p.required) {
    if (need < 0) throw InvalidParameter("negative photon count for " + det);
    total += need;
    for (const auto& path : p.paths_of(det)) s.space()->path_index(path);
  }
  MultiPhotonState out(s.space());
  if (static_cast<std::size_t>(total) > s.photons() && s.size() > 0) return out;
  for (const auto& [c, v] : s.terms())
    if (matches(s, c, p)) out.add(c, v);
  return out;
}

inline PostSelection post_select(const MultiPhotonState& s, const DetectionPattern& p) {
  const double total = s.norm2();
  MultiPhotonState kept = project(s, p);
  const double m = kept.norm2();
  if (total == 0.0 || m <= 1e-30)
    throw EmptyPostSelection("no amplitude survives the detection pattern");
  PostSelection r;
  r.probability = m / total;
  r.discarded = (total - m) / total;
  r.state = kept.normalized();
  return r;
}

enum class Analyzer { HV, DA, RL };

inline const char* to_string(Analyzer a) {
  switch (a) {
    case Analyzer::HV: return "HV";
    case Analyzer::DA: return "DA";
    case Analyzer::RL: return "RL";
  }
  return "?";
}

inline Analyzer analyzer_from_string(std::string_view s) {
  if (s == "HV") return Analyzer::HV;
  if (s == "DA") return Analyzer::DA;
  if (s == "RL") return Analyzer::RL;
  throw InvalidParameter("unknown analyzer '" + std::string(s) + "'");
}

/// Labels of the two analyzer outcomes, first maps to H after rotation.
inline std::pair<char, char> analyzer_labels(Analyzer a) {
  switch (a) {
    case Analyzer::HV: return {'H', 'V'};
    case Analyzer::DA: return {'D', 'A'};
    case Analyzer::RL: return {'R', 'L'};
  }
  return {'H', 'V'};
}

/// Unitary taking the analyzer basis onto (H, V) on one path.
inline ModeTransform analyzer_rotation(const SpacePtr& space, const std::string& path, Analyzer a) {
  const double r = 1 / std::sqrt(2.0);
  // rows are the conjugated basis vectors
  cplx m[2][2];
  switch (a) {
    case Analyzer::HV: m[0][0] = 1; m[0][1] = 0; m[1][0] = 0; m[1][1] = 1; break;
    case Analyzer::DA: m[0][0] = r; m[0][1] = r; m[1][0] = r; m[1][1] = -r; break;
    case Analyzer::RL:
      m[0][0] = r; m[0][1] = -kI * r; m[1][0] = r; m[1][1] = kI * r; break;
  }
  const std::size_t p = space->path_index(path);
  const int L = space->truncation();
  SparseOp op = SparseOp::identity(space->size());
  for (int l = -L; l <= L; ++l)
    for (int in = 0; in < 2; ++in)
      op.set_column(space->index(p, Pol(in), l),
                    {{space->index(p, Pol::H, l), m[0][in]}, {space->index(p, Pol::V, l), m[1][in]}});
  return ModeTransform(space, std::move(op), TransformKind::Unitary,
                       std::string("analyzer ") + to_string(a) + "@" + path);
}

/// An orthonormal basis of states living on a subset of paths, measured
/// jointly (e.g. a Bell basis of two photons).
struct JointBasis {
  std::vector<std::string> paths;
  std::vector<std::pair<std::string, MultiPhotonState>> states;
};

/// Readout description: a local analyzer per path, plus optional joint
/// factors. OAM is always resolved.
struct Resolution {
  std::map<std::string, Analyzer> local;
  std::vector<JointBasis> joint;
};

using Distribution = std::map<std::string, double>;

/// Exact outcome probabilities of a normalized state. Outcome labels list the
/// locally resolved photons as "path:label:l" joined by ',', joint outcomes
/// first as "name" entries separated by '|'.
inline Distribution outcome_distribution(const MultiPhotonState& s, const Resolution& r,
                                         double tol = 1e-10) {
  const auto& space = s.space();
  // which path is handled by whom
  std::map<std::string, int> owner;  // -1 local, k joint factor
  for (const auto& [p, a] : r.local) {
    space->path_index(p);
    owner[p] = -1;
  }
  for (std::size_t k = 0; k < r.joint.size(); ++k)
    for (const auto& p : r.joint[k].paths) {
      space->path_index(p);
      if (owner.count(p)) throw InvalidParameter("path '" + p + "' resolved twice");
      owner[p] = static_cast<int>(k);
    }
  for (const auto& [c, v] : s.terms())
    for (auto m : c)
      if (!owner.count(space->mode(m).path))
        throw BasisIncomplete("occupied path '" + space->mode(m).path + "' has no analyzer");

  // rotate local analyzers onto H/V
  MultiPhotonState rot = s;
  for (const auto& [p, a] : r.local)
    if (a != Analyzer::HV) rot = apply_transform(analyzer_rotation(space, p, a), rot, 0.0);

  auto local_label = [&](const Config& c) {
    std::string out;
    for (auto m : c) {
      const Mode md = space->mode(m);
      const auto lab = analyzer_labels(r.local.at(md.path));
      if (!out.empty()) out += ',';
      out += md.path + ":" + (md.pol == Pol::H ? lab.first : lab.second) + ":" + format_oam(md.oam);
    }
    return out;
  };

  Distribution dist;
  if (r.joint.empty()) {
    for (const auto& [c, v] : rot.terms()) dist[local_label(c)] += std::norm(v);
  } else {
    // group by the local part; the joint parts form sub-states per group
    std::map<Config, std::vector<std::map<Config, cplx>>> groups;
    for (const auto& [c, v] : rot.terms()) {
      Config loc;
      std::vector<Config> parts(r.joint.size());
      for (auto m : c) {
        const int o = owner.at(space->mode(m).path);
        if (o < 0) loc.push_back(m);
        else parts[o].push_back(m);
      }
      auto& g = groups[loc];
      if (g.empty()) g.resize(1);
      // product over joint factors, enumerated as one flattened key
      Config key;
      for (std::size_t k = 0; k < parts.size(); ++k) {
        key.insert(key.end(), parts[k].begin(), parts[k].end());
        key.push_back(UINT32_MAX);  // separator
      }
      g[0][key] += v;
    }
    for (const auto& [loc, g] : groups) {
      const std::string ll = local_label(loc);
      // enumerate all combinations of joint outcomes
      std::vector<std::size_t> pick(r.joint.size(), 0);
      while (true) {
        cplx a = 0.0;
        for (const auto& [key, v] : g[0]) {
          // split key back into parts
          cplx w = 1.0;
          std::size_t k = 0;
          Config part;
          for (auto m : key) {
            if (m == UINT32_MAX) {
              w *= std::conj(r.joint[k].states[pick[k]].second.amp(part));
              part.clear();
              ++k;
            } else {
              part.push_back(m);
            }
          }
          a += w * v;
        }
        std::string label;
        for (std::size_t k = 0; k < pick.size(); ++k) {
          if (k) label += '|';
          label += r.joint[k].states[pick[k]].first;
        }
        if (!ll.empty()) label += ',' + ll;
        dist[label] += std::norm(a);
        std::size_t k = 0;
        while (k < pick.size() && ++pick[k] == r.joint[k].states.size()) pick[k++] = 0;
        if (k == pick.size()) break;
      }
    }
  }
  double total = 0.0;
  for (const auto& [k, p] : dist) total += p;
  const double n = s.norm2();
  if (total < n * (1 - tol))
    throw BasisIncomplete("resolution captures only " + std::to_string(total / n) +
                          " of the probability");
  for (auto& [k, p] : dist) p /= n;
  return dist;
}

using Counts = std::map<std::string, std::uint64_t>;

/// Multinomial draw via conditional binomials over the sorted outcomes.
inline Counts sample_counts(const Distribution& dist, std::uint64_t shots, std::uint64_t seed,
                            std::uint64_t experiment_id = 0) {
  Counts out;
  for (const auto& [k, p] : dist) out[k] = 0;
  if (shots == 0 || dist.empty()) return out;
  auto eng = keyed_engine(seed, experiment_id);
  double rest = 0.0;
  for (const auto& [k, p] : dist) rest += std::max(0.0, p);
  std::uint64_t left = shots;
  std::size_t i = 0;
  for (const auto& [k, p] : dist) {
    const double q = std::max(0.0, p);
    if (++i == dist.size() || left == 0) {
      out[k] = left;
      left = 0;
      break;
    }
    const double frac = rest > 0 ? std::clamp(q / rest, 0.0, 1.0) : 0.0;
    std::binomial_distribution<std::uint64_t> b(left, frac);
    const auto draw = b(eng);
    out[k] = draw;
    left -= draw;
    rest -= q;
  }
  return out;
}

}  // namespace hdcpf
