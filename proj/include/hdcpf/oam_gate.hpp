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

// The d=4 OAM realization: O_k-CNOTs, the OAM high-dimensional beam
// splitter, state preparation, the Hadamard + Bell-state stage and the
// four-photon pipeline built from them.
//
// Qudit encoding: l = -2, -1, 0, +1 -> 0, 1, 2, 3. The auxiliary subspace is
// p = 1 (l = -1) and top = 3 (l = +1).

#pragma once

#include <Eigen/Dense>

#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hdcpf/elements.hpp"
#include "hdcpf/errors.hpp"
#include "hdcpf/fock.hpp"
#include "hdcpf/mode_space.hpp"
#include "hdcpf/noise.hpp"
#include "hdcpf/qudit.hpp"

namespace hdcpf {

inline constexpr int kD4 = 4;
inline constexpr int kD4Truncation = 4;
inline constexpr int kAuxP = 1;

inline int level_to_oam(int level) { return level - 2; }
inline int oam_to_level(int l) { return l + 2; }
inline bool in_alphabet(int l) { return l >= -2 && l <= 1; }

// ---------------------------------------------------------------- O_k-CNOT

struct OkCnot {
  int k = 1;
  ModeTransform transform;
};

inline OkCnot build_ok_cnot(int k, SpacePtr space = nullptr, const Conventions& conv = {}) {
  if (k != 1 && k != 2) throw InvalidParameter("O_k-CNOT order must be 1 or 2");
  if (!space) space = make_space({"A"}, kD4Truncation);
  const auto& path = space->paths().front();
  return {k, element_transform(el::okcnot(k, path), space, conv)};
}

// ------------------------------------------------------- HD beam splitter

/// Path names of one OAM beam splitter. F is the unused second input of
/// PBS1, E the unused second output of PBS3.
struct HdPaths {
  std::string A, B, P1, P2, C, D, E, F;
  std::vector<std::string> all() const { return {A, B, P1, P2, C, D, E, F}; }
};

inline HdPaths hd_paths(const std::string& suffix = "") {
  if (suffix.empty()) return {"A", "B", "P1", "P2", "C", "D", "E", "F"};
  const auto& s = suffix;
  return {"A" + s, "B" + s, "P1_" + s, "P2_" + s, "C" + s, "D" + s, "E" + s, "F" + s};
}

/// A labelled group of elements; transcripts are compared after each step.
struct ChainStep {
  std::string label;
  std::vector<Element> elements;
};

inline Element plate(const std::string& path) {
  return {"PP", {{"phase", std::string("plate")}}, path};
}

struct HdOptions {
  std::string suffix;
  bool simplified_d_arm = false;  // port D feeds the Bell-state stage directly
  bool skip_b_prep = false;       // auxiliary prepared in front of port B instead
};

inline std::vector<ChainStep> hd_steps(const HdPaths& p, const HdOptions& opt = {}) {
  std::vector<ChainStep> s;
  if (!opt.skip_b_prep)
    s.push_back({"B-prep",
                 {el::okcnot(2, p.B), el::hwp(kPi / 4, p.B), el::dp(0.0, p.B), plate(p.B)}});
  s.push_back({"O1", {el::okcnot(1, p.A)}});
  s.push_back({"PBS1", {el::pbs({p.A, p.F}, {p.P1, p.P2})}});
  s.push_back({"O2", {el::okcnot(2, p.P2)}});
  s.push_back({"PBS2", {el::pbs({p.P2, p.B}, {p.D, p.P2})}});
  s.push_back({"P2-ops", {el::okcnot(2, p.P2), el::mirror(p.P2), plate(p.P2)}});
  s.push_back({"PBS3", {el::pbs({p.P1, p.P2}, {p.C, p.E})}});
  if (opt.simplified_d_arm)
    s.push_back({"final", {el::okcnot(1, p.C), el::mirror(p.D)}});
  else
    s.push_back({"final", {el::okcnot(1, p.C), el::mirror(p.D), el::okcnot(2, p.D),
                           el::hwp(kPi / 4, p.D), el::dp(kPi / 4, p.D)}});
  return s;
}

inline ModeTransform steps_transform(std::span<const ChainStep> steps, const SpacePtr& space,
                                     const Conventions& conv) {
  std::vector<Element> all;
  for (const auto& st : steps) all.insert(all.end(), st.elements.begin(), st.elements.end());
  return chain_transform(all, space, conv);
}

struct HdBeamSplitter {
  HdPaths paths;
  SpacePtr space;
  Conventions conv;
  std::vector<ChainStep> steps;
  ModeTransform transform;

  /// Recomposes the transform after the steps were edited.
  void rebuild() { transform = steps_transform(steps, space, conv); }

  SinglePhotonState apply(const SinglePhotonState& s) const {
    return apply_to_single_photon(transform, s);
  }
};

inline HdBeamSplitter build_hd_beamsplitter(SpacePtr space = nullptr, Conventions conv = {},
                                            HdOptions opt = {}) {
  HdBeamSplitter bs;
  bs.paths = hd_paths(opt.suffix);
  if (!space) space = make_space(bs.paths.all(), kD4Truncation);
  if (space->truncation() < 2)
    throw TruncationOverflow("the OAM beam splitter needs a truncation of at least 2, got " +
                             std::to_string(space->truncation()));
  for (const auto& p : bs.paths.all())
    if (!space->has_path(p)) throw SpaceMismatch("mode space lacks path '" + p + "'");
  bs.space = std::move(space);
  bs.conv = conv;
  bs.steps = hd_steps(bs.paths, opt);
  bs.rebuild();
  return bs;
}

// ------------------------------------------------------------ transcripts

struct GoldenLine {
  std::string symbol;
  Mode mode;
  cplx amp;
};

struct GoldenStep {
  std::string label;
  int line = 0;  // line number of the "step" header
  std::vector<GoldenLine> lines;
};

/// Step-by-step amplitudes. The first step ("input") defines the per-symbol
/// input states; symbols missing from a later step must be unchanged by it.
struct GoldenTranscript {
  std::vector<GoldenStep> steps;
};

inline Mode parse_mode(const std::string& text) {
  const auto a = text.find(':'), b = text.rfind(':');
  if (a == std::string::npos || a == b) throw InvalidParameter("bad mode '" + text + "'");
  const std::string pol = text.substr(a + 1, b - a - 1);
  if (pol != "H" && pol != "V") throw InvalidParameter("bad polarization in '" + text + "'");
  return {text.substr(0, a), pol == "H" ? Pol::H : Pol::V, std::stoi(text.substr(b + 1))};
}

inline GoldenTranscript load_golden(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw InvalidParameter("cannot open transcript fixture " + file);
  GoldenTranscript g;
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream ss(line);
    std::string first;
    if (!(ss >> first)) continue;
    if (first == "step") {
      GoldenStep st;
      st.line = no;
      ss >> st.label;
      g.steps.push_back(std::move(st));
      continue;
    }
    if (g.steps.empty()) throw InvalidParameter(file + ":" + std::to_string(no) + ": line before any step");
    std::string mode;
    double re = 0, im = 0;
    if (!(ss >> mode >> re >> im))
      throw InvalidParameter(file + ":" + std::to_string(no) + ": expected 'symbol mode re im'");
    g.steps.back().lines.push_back({first, parse_mode(mode), {re, im}});
  }
  if (g.steps.empty() || g.steps.front().label != "input")
    throw InvalidParameter(file + ": first step must be 'input'");
  return g;
}

struct TranscriptReport {
  bool ok = true;
  std::size_t steps_checked = 0;
  std::size_t lines_checked = 0;
  std::string first_divergence;  // step label, empty when ok
  std::string detail;
};

inline TranscriptReport transcript_check(std::span<const ChainStep> steps, const SpacePtr& space,
                                         const Conventions& conv, const GoldenTranscript& golden,
                                         double tol = 1e-10) {
  TranscriptReport rep;
  auto fail = [&](const std::string& step, std::string why) {
    rep.ok = false;
    rep.first_divergence = step;
    rep.detail = std::move(why);
    return rep;
  };
  std::map<std::string, SinglePhotonState> cur;
  for (const auto& l : golden.steps.front().lines) {
    auto [it, _] = cur.try_emplace(l.symbol, space);
    it->second.add(l.mode, l.amp);
  }
  std::map<std::string, const GoldenStep*> by_label;
  for (std::size_t i = 1; i < golden.steps.size(); ++i) by_label[golden.steps[i].label] = &golden.steps[i];
  std::set<std::string> seen;

  for (const auto& st : steps) {
    const auto t = chain_transform(st.elements, space, conv);
    std::map<std::string, SinglePhotonState> next;
    for (const auto& [sym, s] : cur) next.emplace(sym, apply_to_single_photon(t, s));
    const GoldenStep* g = by_label.count(st.label) ? by_label[st.label] : nullptr;
    if (g) seen.insert(st.label);
    for (const auto& [sym, s] : next) {
      SinglePhotonState want(space);
      bool listed = false;
      if (g)
        for (const auto& l : g->lines)
          if (l.symbol == sym) {
            want.add(l.mode, l.amp);
            listed = true;
          }
      if (!listed) want = cur.at(sym);
      for (std::size_t i = 0; i < space->size(); ++i) {
        if (std::abs(s.amp(i) - want.amp(i)) > tol) {
          std::ostringstream os;
          os << sym << " at " << to_string(space->mode(i)) << ": got " << s.amp(i) << ", want "
             << want.amp(i);
          if (!listed) os << " (step should leave " << sym << " unchanged)";
          if (g) os << " [fixture line " << g->line << "]";
          return fail(st.label, os.str());
        }
      }
      if (listed) ++rep.lines_checked;
    }
    ++rep.steps_checked;
    cur = std::move(next);
  }
  for (const auto& [label, g] : by_label)
    if (!seen.count(label)) return fail(label, "fixture step '" + label + "' has no matching chain step");
  return rep;
}

inline TranscriptReport transcript_check(const HdBeamSplitter& bs, const GoldenTranscript& golden,
                                         double tol = 1e-10) {
  return transcript_check(bs.steps, bs.space, bs.conv, golden, tol);
}

// ------------------------------------------------------------ preparation

struct PreparationRecipe {
  std::string id;
  int row = 0;                     // Table A1 row, 1-based
  std::vector<Element> elements;   // bound to path "A"; rebound on use
  std::vector<std::pair<int, double>> direct;  // (l, amplitude) for the q=1/4 rows
  std::vector<std::pair<int, double>> target;  // expected state, H polarized
};

inline const std::vector<PreparationRecipe>& table_a1() {
  static const std::vector<PreparationRecipe> rows = [] {
    const double r = 1 / std::sqrt(2.0);
    const double q = kPi / 4;  // q-plate axis offset reproducing the table signs
    auto z = [&](double b) {
      return std::vector<Element>{el::qwp(b, "A"), el::qp(0.5, "A", q), el::qwp(b, "A")};
    };
    auto x = [&](double a1) {
      return std::vector<Element>{el::hwp(a1, "A"), el::qwp(kPi / 4, "A"), el::qp(0.5, "A", q),
                                  el::qwp(kPi / 4, "A"), el::hwp(kPi / 8, "A")};
    };
    auto spp = [](std::vector<Element> v) {
      v.push_back(el::spp(-1, "A"));
      return v;
    };
    std::vector<PreparationRecipe> v;
    v.push_back({"Z:-2", 1, spp(z(-kPi / 4)), {}, {{-2, 1.0}}});
    v.push_back({"Z:-1", 2, z(-kPi / 4), {}, {{-1, 1.0}}});
    v.push_back({"Z:0", 3, spp(z(kPi / 4)), {}, {{0, 1.0}}});
    v.push_back({"Z:+1", 4, z(kPi / 4), {}, {{1, 1.0}}});
    v.push_back({"X:-2+0", 5, spp(x(kPi / 8)), {}, {{-2, r}, {0, r}}});
    v.push_back({"X:-1+1", 6, x(kPi / 8), {}, {{-1, r}, {1, r}}});
    v.push_back({"X:-2-0", 7, spp(x(-kPi / 8)), {}, {{-2, r}, {0, -r}}});
    v.push_back({"X:-1-1", 8, x(-kPi / 8), {}, {{-1, r}, {1, -r}}});
    v.push_back({"S:0+1", 9, {}, {{0, r}, {1, r}}, {{0, r}, {1, r}}});
    v.push_back({"S:-1+0", 10, {}, {{-1, r}, {0, r}}, {{-1, r}, {0, r}}});
    return v;
  }();
  return rows;
}

inline const PreparationRecipe& find_recipe(std::string_view id) {
  for (const auto& r : table_a1())
    if (r.id == id) return r;
  throw UnknownRecipe("no preparation recipe '" + std::string(id) + "'");
}

struct Prepared {
  SinglePhotonState state;  // normalized
  double probability = 1.0; // post-selection success
};

/// Runs the recipe from H|0> on `path`, post-selecting H at the closing PBS.
inline Prepared prepare_input(const PreparationRecipe& r, SpacePtr space = nullptr,
                              const std::string& path = "A", const Conventions& conv = {}) {
  if (!space) space = make_space({path}, kD4Truncation);
  SinglePhotonState s(space);
  if (!r.direct.empty()) {
    for (auto [l, a] : r.direct) s.add({path, Pol::H, l}, a);
    return {s.normalized(), 1.0};
  }
  std::vector<Element> chain = r.elements;
  for (auto& e : chain) e.path = path;
  chain.push_back(el::pol(0.0, path));
  s.add({path, Pol::H, 0}, 1.0);
  auto out = apply_to_single_photon(chain_transform(chain, space, conv), s);
  const double p = out.norm2();
  return {out.normalized(), p};
}

inline Prepared prepare_input(std::string_view id, SpacePtr space = nullptr,
                              const std::string& path = "A", const Conventions& conv = {}) {
  return prepare_input(find_recipe(id), std::move(space), path, conv);
}

inline std::vector<Element> auxiliary_elements(const std::string& path) {
  // the q-plate axis at pi/8 gives the relative sign the beam splitter expects
  return {el::qp(0.5, path, kPi / 8), el::qwp(kPi / 4, path)};
}

/// H|0> -> (V|-1> + H|+1>)/sqrt2 with a q-plate and a quarter-wave plate.
inline SinglePhotonState prepare_auxiliary(SpacePtr space = nullptr, const std::string& path = "B",
                                           const Conventions& conv = {}) {
  if (!space) space = make_space({path}, kD4Truncation);
  SinglePhotonState s(space);
  s.add({path, Pol::H, 0}, 1.0);
  return apply_to_single_photon(chain_transform(auxiliary_elements(path), space, conv), s);
}

/// Four-level amplitude vector of an H-polarized photon on the alphabet.
inline Eigen::VectorXcd encode_photon(const SinglePhotonState& s, double tol = 1e-12) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(kD4);
  std::optional<std::string> path;
  for (std::size_t i = 0; i < s.amps().size(); ++i) {
    if (std::abs(s.amp(i)) <= tol) continue;
    const Mode m = s.space()->mode(i);
    if (m.pol != Pol::H) throw EncodingError("photon carries V polarization at " + to_string(m));
    if (!in_alphabet(m.oam)) throw EncodingError("OAM " + format_oam(m.oam) + " outside {-2..+1}");
    if (path && *path != m.path) throw EncodingError("photon spread over several paths");
    path = m.path;
    v(oam_to_level(m.oam)) += s.amp(i);
  }
  return v;
}

inline SinglePhotonState decode_photon(const Eigen::VectorXcd& v, SpacePtr space,
                                       const std::string& path) {
  if (v.size() != kD4) throw InvalidDimension("expected a four-level vector");
  SinglePhotonState s(std::move(space));
  for (int k = 0; k < kD4; ++k)
    if (v(k) != 0.0) s.add({path, Pol::H, level_to_oam(k)}, v(k));
  return s;
}

// ------------------------------------------------------- Bell-state stage

/// Paths of one Bell-state stage: inputs from the two D ports, outputs to
/// the two analyzers.
struct BsmPaths {
  std::string d1, d2, g1, g2;
};

inline std::vector<Element> bsm_elements(const BsmPaths& p) {
  return {el::qwp(-kPi / 4, p.d1), el::qp(0.5, p.d1), el::qwp(-kPi / 4, p.d1),
          el::qwp(-kPi / 4, p.d2), el::qp(0.5, p.d2), el::qwp(0.0, p.d2),
          el::pbs({p.d1, p.d2}, {p.g1, p.g2})};
}

inline constexpr Analyzer kG1Analyzer = Analyzer::DA;
inline constexpr Analyzer kG2Analyzer = Analyzer::RL;

/// Detector label of a herald config; a trailing 'x' (the distinguishable
/// copy of a path) is dropped so both copies share one detector.
inline std::string herald_label(const SpacePtr& space, const std::vector<Mode>& modes) {
  std::vector<std::pair<std::string, std::string>> parts;
  for (const auto& m : modes) {
    std::string base = m.path;
    if (!base.empty() && base.back() == 'x') base.pop_back();
    const auto lab = analyzer_labels(base == "G1" ? kG1Analyzer : kG2Analyzer);
    parts.push_back({base, base + ":" + (m.pol == Pol::H ? lab.first : lab.second) + ":" +
                               format_oam(m.oam)});
  }
  (void)space;
  std::sort(parts.begin(), parts.end());
  std::string out;
  for (const auto& [_, s] : parts) out += (out.empty() ? "" : ",") + s;
  return out;
}

struct BellDecoder {
  std::map<std::string, std::optional<BellOutcome>> table;

  std::optional<BellOutcome> decode(const std::string& label) const {
    auto it = table.find(label);
    return it == table.end() ? std::nullopt : it->second;
  }
  std::vector<std::string> patterns_of(BellOutcome b) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : table)
      if (v == b) out.push_back(k);
    return out;
  }
};

inline DetectionPattern herald_pattern(bool with_copies) {
  DetectionPattern p;
  p.required = {{"G1", 1}, {"G2", 1}};
  if (with_copies) p.aliases = {{"G1", {"G1", "G1x"}}, {"G2", {"G2", "G2x"}}};
  return p;
}

/// Builds the decoder by sending each logical Bell state through the stage.
/// arrivals[k][0] / [k][1] are how levels p and top of photon k+2 look at its
/// D port; the stage itself performs the Hadamard on photon 3, so the states
/// sent are (1 x H_3)|b>.
inline BellDecoder build_decoder(const ModeTransform& stage,
                                 const std::array<std::array<SinglePhotonState, 2>, 2>& arrivals) {
  const auto& space = stage.space();
  const double r = 1 / std::sqrt(2.0);
  const QuditOperator H2 = subspace_hadamard(0, 2);
  std::map<std::string, std::map<BellOutcome, double>> weight;
  for (auto b : kAllBell) {
    // Bell coefficients over (x2, x3) in {p, top}
    Eigen::Matrix2cd c = Eigen::Matrix2cd::Zero();
    switch (b) {
      case BellOutcome::PhiPlus: c(0, 0) = r; c(1, 1) = r; break;
      case BellOutcome::PhiMinus: c(0, 0) = r; c(1, 1) = -r; break;
      case BellOutcome::PsiPlus: c(0, 1) = r; c(1, 0) = r; break;
      case BellOutcome::PsiMinus: c(0, 1) = r; c(1, 0) = -r; break;
    }
    const Eigen::Matrix2cd w = c * H2.transpose();
    Monomials poly;
    for (int x2 = 0; x2 < 2; ++x2)
      for (int y3 = 0; y3 < 2; ++y3) {
        if (w(x2, y3) == 0.0) continue;
        for (const auto& [cfg, v] : multiply(linear_monomials(arrivals[0][x2]),
                                             linear_monomials(arrivals[1][y3])))
          poly[cfg] += w(x2, y3) * v;
      }
    auto out = apply_transform(stage, MultiPhotonState::from_monomials(space, poly, false));
    auto kept = project(out, herald_pattern(false));
    std::map<std::string, cplx> amp;
    for (const auto& [cfg, v] : kept.terms()) {
      std::vector<Mode> ms;
      for (auto m : cfg) ms.push_back(space->mode(m));
      amp[herald_label(space, ms)] += v;
    }
    for (const auto& [label, a] : amp)
      if (std::norm(a) > 1e-20) weight[label][b] += std::norm(a);
  }
  BellDecoder d;
  for (const auto& [label, by] : weight)
    d.table[label] = by.size() == 1 ? std::optional<BellOutcome>(by.begin()->first) : std::nullopt;
  return d;
}

/// Analyzer rotations on the herald paths that exist in the space.
inline ModeTransform analyzers_transform(const SpacePtr& space) {
  std::vector<ModeTransform> parts{ModeTransform::identity(space)};
  for (const char* p : {"G1", "G1x"})
    if (space->has_path(p)) parts.push_back(analyzer_rotation(space, p, kG1Analyzer));
  for (const char* p : {"G2", "G2x"})
    if (space->has_path(p)) parts.push_back(analyzer_rotation(space, p, kG2Analyzer));
  return compose_transforms(parts);
}

struct BsmStage {
  SpacePtr space;
  std::vector<Element> elements;
  ModeTransform transform;  // elements followed by the analyzer rotations
  BellDecoder decoder;
  std::array<std::array<SinglePhotonState, 2>, 2> arrivals;
};

/// How the auxiliary level p and the top level reach port D of a beam
/// splitter with the shortened D arm, re-expressed on `target` at `dpath`.
inline std::array<SinglePhotonState, 2> d_port_arrivals(const SpacePtr& target,
                                                         const std::string& dpath,
                                                         const Conventions& conv = {}) {
  const auto bs = build_hd_beamsplitter(nullptr, conv, {"", true, false});
  auto arrive = [&](const std::string& port, int l) {
    SinglePhotonState in(bs.space);
    in.add({port, Pol::H, l}, 1.0);
    const auto out = bs.apply(in);
    SinglePhotonState s(target);
    for (std::size_t i = 0; i < out.amps().size(); ++i) {
      if (std::abs(out.amp(i)) <= kDefaultPrune) continue;
      Mode m = bs.space->mode(i);
      if (m.path != "D") continue;
      m.path = dpath;
      s.add(m, out.amp(i));
    }
    return s;
  };
  return {arrive("B", level_to_oam(kAuxP)), arrive("A", level_to_oam(kD4 - 1))};
}

inline BsmStage build_bsm_stage(const Conventions& conv = {}) {
  BsmStage st;
  st.space = make_space({"D1", "D2", "G1", "G2"}, kD4Truncation);
  st.elements = bsm_elements({"D1", "D2", "G1", "G2"});
  st.transform = compose_transforms(
      {chain_transform(st.elements, st.space, conv), analyzers_transform(st.space)});
  st.arrivals = {d_port_arrivals(st.space, "D1", conv), d_port_arrivals(st.space, "D2", conv)};
  st.decoder = build_decoder(st.transform, st.arrivals);
  return st;
}

// ------------------------------------------------------ four-photon pipeline

enum class AuxMode {
  Prestage,  // H(|-1>+|+1>)/sqrt2 enters port B and passes the B-side optics
  Direct,    // the experiment's q-plate preparation replaces the B-side optics
};

/// One herald configuration of the channel: maps the 16 data amplitudes to
/// the (uncorrected) amplitudes left on C1 x C2.
struct HeraldMap {
  std::string pattern;  // detector label, shared by interfering and distinguishable copies
  std::string herald;   // exact herald modes
  std::optional<BellOutcome> outcome;
  Eigen::MatrixXcd A;
};

struct CpfBranch {
  std::string pattern;
  BellOutcome outcome = BellOutcome::PhiPlus;
  double probability = 0.0;  // joint with heralding
  Eigen::MatrixXcd rho;      // corrected, normalized
};

struct CpfResult {
  std::vector<CpfBranch> branches;           // accepted patterns only
  double probability = 0.0;                  // total accepted heralding probability
  Eigen::MatrixXcd rho;                      // corrected, normalized mixture over accepted patterns
  std::map<std::string, double> pattern_probability;  // every one-per-port pattern
  std::map<std::string, std::uint64_t> tallies;        // shot counts, when requested

  /// Dominant eigenvector of rho, i.e. the heralded state when it is pure.
  QuditState state() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
    const Eigen::Index k = rho.rows() - 1;
    return QuditState(kD4, es.eigenvectors().col(k));
  }
  double purity() const { return (rho * rho).trace().real(); }
};

/// A noise spec turned into weighted herald maps; survival is the loss factor.
struct NoisyChannel {
  std::vector<std::pair<double, std::vector<HeraldMap>>> parts;
  double survival = 1.0;
};

inline std::vector<std::string> pipeline_paths() {
  std::vector<std::string> p;
  for (const char* s : {"1", "2"})
    for (const auto& x : hd_paths(s).all()) p.push_back(x);
  for (const char* x : {"D1x", "D2x", "G1", "G2", "G1x", "G2x"}) p.push_back(x);
  return p;
}

/// Element chain of the pipeline in application order: both splitters up to
/// PBS1 (the jittering arm sits after them), the rest of both splitters, the
/// Bell-state stage and its copy. Step labels are "HD<k>/<step>", "BSM" and
/// "BSM-copy". Noise-only elements (arm phase, re-route) are not listed.
inline std::vector<ChainStep> pipeline_steps(AuxMode aux = AuxMode::Prestage) {
  std::vector<ChainStep> pre, mid;
  for (const char* k : {"1", "2"}) {
    bool after = false;
    for (auto st : hd_steps(hd_paths(k), HdOptions{k, true, aux == AuxMode::Direct})) {
      st.label = std::string("HD") + k + "/" + st.label;
      const bool split = st.label.ends_with("/PBS1");
      (after ? mid : pre).push_back(std::move(st));
      if (split) after = true;
    }
  }
  pre.insert(pre.end(), mid.begin(), mid.end());
  pre.push_back({"BSM", bsm_elements({"D1", "D2", "G1", "G2"})});
  pre.push_back({"BSM-copy", bsm_elements({"D1x", "D2x", "G1x", "G2x"})});
  return pre;
}

/// The full Fig. 3a chain on one mode space: two beam splitters with the
/// shortened D arm, the Bell-state stage (plus a copy of it that photon 3
/// takes when it is distinguishable), corrections and decoding.
class CpfD4Pipeline {
 public:
  explicit CpfD4Pipeline(Conventions conv = {}, AuxMode aux = AuxMode::Prestage)
      : conv_(conv), aux_(aux) {
    space_ = make_space(pipeline_paths(), kD4Truncation);
    std::vector<ChainStep> pre, mid, stage;
    for (auto& st : pipeline_steps(aux)) {
      if (st.label.rfind("BSM", 0) == 0) stage.push_back(std::move(st));
      else ((pre.empty() || pre.back().label != "HD2/PBS1") ? pre : mid).push_back(std::move(st));
    }
    t_pre_ = steps_transform(pre, space_, conv_);
    t_mid_ = steps_transform(mid, space_, conv_);
    t_bsm_ = compose_transforms({steps_transform(stage, space_, conv_), analyzers_transform(space_)});
    const Element reroute = el::route("D2x", "D2");
    t_post_ = compose_transforms({t_mid_, t_bsm_});
    t_post_x_ = compose_transforms({t_mid_, element_transform(reroute, space_, conv_), t_bsm_});

    // decoder from the arrival kets of this very chain
    const auto front = compose_transforms({t_pre_, t_mid_});
    auto arrive = [&](const std::string& port, int l, const std::string& d) {
      SinglePhotonState in(space_);
      if (port.front() == 'B' && aux_ == AuxMode::Direct) {
        // the direct preparation already is the post-B-side state
        in = aux_level_direct(port, l);
      } else {
        in.add({port, Pol::H, l}, 1.0);
      }
      auto out = apply_to_single_photon(front, in);
      SinglePhotonState s(space_);
      for (std::size_t i = 0; i < out.amps().size(); ++i)
        if (std::abs(out.amp(i)) > kDefaultPrune && space_->mode(i).path == d) s.add(space_->mode(i), out.amp(i));
      return s;
    };
    arrivals_ = {{{arrive("B1", level_to_oam(kAuxP), "D1"), arrive("A1", level_to_oam(kD4 - 1), "D1")},
                  {arrive("B2", level_to_oam(kAuxP), "D2"), arrive("A2", level_to_oam(kD4 - 1), "D2")}}};
    decoder_ = build_decoder(t_bsm_, arrivals_);
    ideal_ = channel_of(NoiseRealization{});
    NoiseRealization x;
    x.distinguishable = true;
    ideal_x_ = channel_of(x);
  }

  const SpacePtr& space() const { return space_; }
  const Conventions& conventions() const { return conv_; }
  const BellDecoder& decoder() const { return decoder_; }
  const std::array<std::array<SinglePhotonState, 2>, 2>& arrivals() const { return arrivals_; }

  /// Four-photon input: data photons at A1/A2, auxiliaries at B1/B2.
  MultiPhotonState input_state(const QuditState& psi) const {
    if (psi.dim() != kD4) throw InvalidDimension("the OAM pipeline is four-dimensional");
    Monomials data;
    for (int m = 0; m < kD4; ++m)
      for (int n = 0; n < kD4; ++n) {
        const cplx c = psi.amp(m, n);
        if (c == 0.0) continue;
        for (const auto& [cfg, v] : multiply(linear_monomials(data_photon("A1", m)),
                                             linear_monomials(data_photon("A2", n))))
          data[cfg] += c * v;
      }
    const auto poly = multiply(data, multiply(linear_monomials(aux_photon("B1")),
                                              linear_monomials(aux_photon("B2"))));
    return MultiPhotonState::from_monomials(space_, poly);
  }

  /// State right after both beam splitters (before the Bell-state stage).
  MultiPhotonState after_splitters(const QuditState& psi) const {
    return apply_transform(t_mid_, apply_transform(t_pre_, input_state(psi)));
  }

  /// Marginal probability of one photon in each output port, per splitter.
  std::array<double, 2> splitter_success(const QuditState& psi) const {
    const auto s = after_splitters(psi);
    std::array<double, 2> out{};
    for (int k = 0; k < 2; ++k) {
      DetectionPattern p;
      p.required = {{"C" + std::to_string(k + 1), 1}};
      out[k] = project(s, p).norm2() / s.norm2();
    }
    return out;
  }

  /// Herald maps for one noise realization (dephasing applied on the right).
  std::vector<HeraldMap> channel(const NoiseRealization& r) const {
    std::vector<HeraldMap> maps;
    if (r.zeta[0] == 0.0 && r.zeta[1] == 0.0)
      maps = r.distinguishable ? ideal_x_ : ideal_;
    else
      maps = channel_of(r);
    if (r.dephased) {
      Eigen::VectorXcd ph(kD4 * kD4);
      for (int m = 0; m < kD4; ++m)
        for (int n = 0; n < kD4; ++n) ph(m * kD4 + n) = std::exp(kI * (r.phase1[m] + r.phase4[n]));
      for (auto& h : maps) h.A = h.A * ph.asDiagonal();
    }
    return maps;
  }

  /// All realizations of a noise spec, propagated once.
  NoisyChannel realize(const NoiseSpec& noise) const {
    NoisyChannel ch;
    ch.survival = noise.survival();
    for (const auto& r : sample_realizations(noise)) ch.parts.push_back({r.weight, channel(r)});
    return ch;
  }

  /// Heralded, corrected output for a (possibly entangled) data input.
  CpfResult run(const QuditState& psi, const std::set<BellOutcome>& accepted,
                const NoiseSpec& noise = {}) const {
    return evaluate(realize(noise), psi, accepted);
  }

  CpfResult evaluate(const NoisyChannel& ch, const QuditState& psi,
                     const std::set<BellOutcome>& accepted) const {
    if (psi.dim() != kD4) throw InvalidDimension("the OAM pipeline is four-dimensional");
    if (!psi.is_normalized(1e-10)) throw NotNormalized("input norm^2 = " + std::to_string(psi.norm2()));
    CpfResult res;
    res.rho = Eigen::MatrixXcd::Zero(kD4 * kD4, kD4 * kD4);
    std::map<std::string, CpfBranch> br;
    for (const auto& [weight, maps] : ch.parts) {
      const double w = weight * ch.survival;
      for (const auto& h : maps) {
        const Eigen::VectorXcd v = h.A * psi.amps();
        const double p = w * v.squaredNorm();
        res.pattern_probability[h.pattern] += p;
        if (!h.outcome || !accepted.count(*h.outcome) || p == 0.0) continue;
        const Eigen::VectorXcd c = correction_unitary(*h.outcome, kD4) * v;
        auto& b = br[h.pattern];
        if (b.rho.size() == 0) {
          b.pattern = h.pattern;
          b.outcome = *h.outcome;
          b.rho = Eigen::MatrixXcd::Zero(kD4 * kD4, kD4 * kD4);
        }
        const Eigen::MatrixXcd outer = w * (c * c.adjoint());
        b.rho += outer;
        b.probability += p;
        res.rho += outer;
        res.probability += p;
      }
    }
    if (res.probability <= 1e-30) throw EmptyPostSelection("no accepted herald pattern fires");
    res.rho /= res.probability;
    for (auto& [k, b] : br) {
      b.rho /= b.probability;
      res.branches.push_back(std::move(b));
    }
    return res;
  }

  SinglePhotonState data_photon(const std::string& port, int level) const {
    SinglePhotonState s(space_);
    s.add({port, Pol::H, level_to_oam(level)}, 1.0);
    return s;
  }

  SinglePhotonState aux_photon(const std::string& port) const {
    if (aux_ == AuxMode::Direct) return direct_aux(port);
    SinglePhotonState s(space_);
    const double r = 1 / std::sqrt(2.0);
    s.add({port, Pol::H, level_to_oam(kAuxP)}, r).add({port, Pol::H, level_to_oam(kD4 - 1)}, r);
    return s;
  }

 private:
  // q-plate preparation with its global phase fixed by the H|+1> amplitude;
  // the decoder reads level p relative to level top, so the frame matters
  SinglePhotonState direct_aux(const std::string& port) const {
    const auto s = prepare_auxiliary(space_, port, conv_);
    const cplx a = s.amp({port, Pol::H, level_to_oam(kD4 - 1)});
    return s.scaled(std::conj(a) / std::abs(a));
  }

  // component of the direct auxiliary state carrying level p or top
  SinglePhotonState aux_level_direct(const std::string& port, int l) const {
    const auto full = direct_aux(port);
    SinglePhotonState s(space_);
    for (int pol = 0; pol < 2; ++pol) {
      const Mode m{port, Pol(pol), l};
      if (std::abs(full.amp(m)) > kDefaultPrune) s.add(m, full.amp(m) * std::sqrt(2.0));
    }
    return s;
  }

  static MultiPhotonState phase_paths(const MultiPhotonState& s, const std::array<std::size_t, 2>& paths,
                                      const std::array<double, 2>& zeta) {
    if (zeta[0] == 0.0 && zeta[1] == 0.0) return s;
    MultiPhotonState out(s.space());
    const auto& sp = *s.space();
    const std::size_t block = 2 * sp.ladder();
    for (const auto& [c, v] : s.terms()) {
      double phi = 0.0;
      for (auto m : c)
        for (int k = 0; k < 2; ++k)
          if (m / block == paths[k]) phi += zeta[k];
      out.add(c, v * std::exp(kI * phi));
    }
    return out;
  }

  std::vector<HeraldMap> channel_of(const NoiseRealization& r) const {
    const auto& post = r.distinguishable ? t_post_x_ : t_post_;
    const auto pattern = [&] {
      DetectionPattern p = herald_pattern(true);
      p.required["C1"] = 1;
      p.required["C2"] = 1;
      return p;
    }();
    const std::array<std::size_t, 2> arms{space_->path_index("P1_1"), space_->path_index("P1_2")};
    const std::size_t c1 = space_->path_index("C1"), c2 = space_->path_index("C2");
    const auto aux1 = aux_photon("B1"), aux2 = aux_photon("B2");
    std::map<std::string, HeraldMap> maps;
    for (int m = 0; m < kD4; ++m)
      for (int n = 0; n < kD4; ++n) {
        auto s = inject_product({data_photon("A1", m), data_photon("A2", n), aux1, aux2});
        s = apply_transform(t_pre_, s);
        s = phase_paths(s, arms, r.zeta);
        s = apply_transform(post, s);
        const auto kept = project(s, pattern);
        for (const auto& [cfg, v] : kept.terms()) {
          int lc1 = -1, lc2 = -1;
          std::vector<Mode> herald;
          for (auto idx : cfg) {
            const Mode md = space_->mode(idx);
            const std::size_t pi = space_->path_index(md.path);
            if (pi == c1 || pi == c2) {
              if (md.pol != Pol::H || !in_alphabet(md.oam))
                throw EncodingError("output photon at " + to_string(md) + " is outside the qudit encoding");
              (pi == c1 ? lc1 : lc2) = oam_to_level(md.oam);
            } else {
              herald.push_back(md);
            }
          }
          std::string key;
          for (const auto& h : herald) key += (key.empty() ? "" : ",") + to_string(h);
          auto [it, fresh] = maps.try_emplace(key);
          if (fresh) {
            it->second.herald = key;
            it->second.pattern = herald_label(space_, herald);
            it->second.outcome = decoder_.decode(it->second.pattern);
            it->second.A = Eigen::MatrixXcd::Zero(kD4 * kD4, kD4 * kD4);
          }
          it->second.A(lc1 * kD4 + lc2, m * kD4 + n) += v;
        }
      }
    std::vector<HeraldMap> out;
    for (auto& [k, h] : maps) out.push_back(std::move(h));
    return out;
  }

  Conventions conv_;
  AuxMode aux_;
  SpacePtr space_;
  ModeTransform t_pre_, t_mid_, t_bsm_, t_post_, t_post_x_;
  std::array<std::array<SinglePhotonState, 2>, 2> arrivals_;
  BellDecoder decoder_;
  std::vector<HeraldMap> ideal_, ideal_x_;
};

/// Shared default pipeline (built once, immutable afterwards).
inline const CpfD4Pipeline& default_pipeline() {
  static const CpfD4Pipeline p;
  return p;
}

inline CpfResult run_cpf_d4(const QuditState& psi, const std::set<BellOutcome>& accepted,
                            const NoiseSpec& noise = {}) {
  return default_pipeline().run(psi, accepted, noise);
}

inline CpfResult run_cpf_d4(const SinglePhotonState& in1, const SinglePhotonState& in4,
                            const std::set<BellOutcome>& accepted, const NoiseSpec& noise = {}) {
  const auto a = encode_photon(in1), b = encode_photon(in4);
  return run_cpf_d4(QuditState::product(a, b).normalized(), accepted, noise);
}

}  // namespace hdcpf
