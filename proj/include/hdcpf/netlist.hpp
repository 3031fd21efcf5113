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

// Line-oriented experiment description:
//
//   version 1
//   [space]      paths = A, B ...   L = 4
//   [sources]    <id> = <recipe id | aux | ket(H:+1=(re,im), ...)> @ <path>
//   [elements]   "step <label>" lines and element descriptors
//   [detection]  pattern, alias, analyzers, accept, basis
//   [run]        experiment, shots, seed, analytic, noise.*, lock.*, pid.*, drift.*
//
// Parsing is total: every problem becomes a Diagnostic with a 1-based
// line/column, and a Netlist is only returned when there are none.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hdcpf/analysis.hpp"
#include "hdcpf/elements.hpp"
#include "hdcpf/oam_gate.hpp"
#include "hdcpf/phase_lock.hpp"

namespace hdcpf {

struct Diagnostic {
  std::size_t line = 0, column = 0;  // 1-based; 0 = whole file
  std::string message;

  std::string to_string(std::string_view file = "") const {
    std::string s(file);
    if (!s.empty()) s += ':';
    s += std::to_string(line) + ":" + std::to_string(column) + ": " + message;
    return s;
  }
};

struct SourceSpec {
  std::string id;
  std::string recipe;  // Table A1 id, "aux", or empty for a ket
  std::vector<std::pair<Mode, cplx>> ket;
  std::string path;
  std::size_t line = 0;
};

struct StepSpec {
  std::string label;  // empty: elements before the first "step"
  std::vector<Element> elements;
  std::vector<std::size_t> lines;
  std::size_t line = 0;
};

struct DetectionSpec {
  std::vector<std::pair<std::string, int>> pattern;
  std::map<std::string, std::vector<std::string>> aliases;
  std::map<std::string, Analyzer> analyzers;
  std::set<BellOutcome> accept{BellOutcome::PhiPlus, BellOutcome::PhiMinus};
  std::string basis;  // "", ZX, XZ, TableA3
};

struct RunSpec {
  std::string experiment = "circuit";
  std::uint64_t shots = 0;
  std::uint64_t seed = 1;
  bool analytic = true;
  std::string aux = "prestage";
  std::string golden;       // transcript fixture, relative to the netlist
  std::string conventions;  // optional convention file
  NoiseSpec noise;
  LockParams lock;
  PidGains pid = default_gains();
  DriftModel drift;
  LockRun lock_run;
};

struct Netlist {
  int version = 1;
  std::vector<std::string> paths;
  int L = 4;
  std::vector<SourceSpec> sources;
  std::vector<StepSpec> steps;
  DetectionSpec detection;
  RunSpec run;

  std::vector<ChainStep> chain() const {
    std::vector<ChainStep> out;
    for (const auto& s : steps) out.push_back({s.label, s.elements});
    return out;
  }
};

struct NetlistParse {
  std::optional<Netlist> netlist;
  std::vector<Diagnostic> diagnostics;
};

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k{"circuit", "cpf_d4", "fidelity", "suite", "lock", "transcript"};
  return k;
}

namespace netlist_detail {

inline std::string_view trim(std::string_view v, std::size_t* lead = nullptr) {
  std::size_t a = 0;
  while (a < v.size() && std::isspace(static_cast<unsigned char>(v[a]))) ++a;
  std::size_t b = v.size();
  while (b > a && std::isspace(static_cast<unsigned char>(v[b - 1]))) --b;
  if (lead) *lead = a;
  return v.substr(a, b - a);
}

/// Comma-separated items with their 0-based offsets inside `v`.
inline std::vector<std::pair<std::string, std::size_t>> split_list(std::string_view v) {
  std::vector<std::pair<std::string, std::size_t>> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= v.size(); ++i) {
    if (i == v.size() || v[i] == ',') {
      std::size_t lead = 0;
      const auto item = trim(v.substr(start, i - start), &lead);
      out.emplace_back(std::string(item), start + lead);
      start = i + 1;
    }
  }
  return out;
}

inline bool is_ident(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!detail::is_ident_char(c)) return false;
  return true;
}

inline std::optional<std::uint64_t> parse_uint(std::string_view s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<bool> parse_bool(std::string_view s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  return std::nullopt;
}

/// "H:+1" -> (H, 1)
inline std::optional<std::pair<Pol, int>> parse_pol_oam(std::string_view s) {
  if (s.size() < 3 || (s[0] != 'H' && s[0] != 'V') || s[1] != ':') return std::nullopt;
  std::string_view n = s.substr(2);
  if (!n.empty() && n.front() == '+') n.remove_prefix(1);
  int l = 0;
  auto [p, ec] = std::from_chars(n.data(), n.data() + n.size(), l);
  if (ec != std::errc() || p != n.data() + n.size()) return std::nullopt;
  return std::make_pair(s[0] == 'H' ? Pol::H : Pol::V, l);
}

/// number | (re,im)
inline std::optional<cplx> parse_amp(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '(' && s.back() == ')') {
    const auto inner = s.substr(1, s.size() - 2);
    const auto c = inner.find(',');
    if (c == std::string_view::npos) return std::nullopt;
    auto re = detail::parse_scalar(inner.substr(0, c));
    auto im = detail::parse_scalar(inner.substr(c + 1));
    if (!re || !im) return std::nullopt;
    return cplx(*re, *im);
  }
  if (auto d = detail::parse_scalar(s)) return cplx(*d, 0.0);
  return std::nullopt;
}

inline std::string drift_name(DriftKind k) {
  switch (k) {
    case DriftKind::None: return "none";
    case DriftKind::RandomWalk: return "random-walk";
    case DriftKind::Sinusoidal: return "sinusoidal";
    case DriftKind::Step: return "step";
  }
  return "none";
}

inline std::optional<DriftKind> drift_from(std::string_view s) {
  for (auto k : {DriftKind::None, DriftKind::RandomWalk, DriftKind::Sinusoidal, DriftKind::Step})
    if (s == drift_name(k)) return k;
  return std::nullopt;
}

/// Paths an element touches.
inline std::vector<std::string> element_paths(const Element& e) {
  std::vector<std::string> out;
  if (!e.path.empty()) out.push_back(e.path);
  for (const auto& [k, v] : e.params) {
    if (const auto* l = std::get_if<std::vector<std::string>>(&v)) out.insert(out.end(), l->begin(), l->end());
    if (k == "to")
      if (const auto* w = std::get_if<std::string>(&v)) out.push_back(*w);
  }
  return out;
}

/// Numeric keys of the [run] block, bound to their fields.
inline std::vector<std::pair<std::string, double*>> run_doubles(RunSpec& r) {
  return {{"noise.jitter", &r.noise.phase_jitter},
          {"noise.dephasing", &r.noise.dephasing},
          {"noise.loss", &r.noise.loss},
          {"noise.visibility", &r.noise.visibility},
          {"lock.theta", &r.lock.theta},
          {"lock.Omega", &r.lock.Omega},
          {"lock.tau", &r.lock.tau},
          {"lock.E0H", &r.lock.E0H},
          {"lock.E0V", &r.lock.E0V},
          {"lock.lpf_cutoff", &r.lock.lpf_cutoff},
          {"lock.dt", &r.lock.dt},
          {"lock.detector_noise", &r.lock.detector_noise},
          {"lock.duration", &r.lock_run.duration},
          {"lock.setpoint", &r.lock_run.setpoint},
          {"lock.zeta0", &r.lock_run.zeta0},
          {"lock.settle", &r.lock_run.settle},
          {"pid.kp", &r.pid.kp},
          {"pid.ki", &r.pid.ki},
          {"pid.kd", &r.pid.kd},
          {"pid.out_min", &r.pid.out_min},
          {"pid.out_max", &r.pid.out_max},
          {"drift.sigma", &r.drift.sigma},
          {"drift.amplitude", &r.drift.amplitude},
          {"drift.period", &r.drift.period},
          {"drift.step_time", &r.drift.step_time}};
}

}  // namespace netlist_detail

/// Semantic checks on a structurally parsed netlist; returns diagnostics.
inline std::vector<Diagnostic> validate_netlist(const Netlist& n, std::size_t space_line = 0,
                                                std::size_t run_line = 0,
                                                std::size_t detection_line = 0) {
  using namespace netlist_detail;
  std::vector<Diagnostic> d;
  auto diag = [&](std::size_t line, std::string msg) { d.push_back({line, line ? 1u : 0u, std::move(msg)}); };
  if (n.paths.empty() && n.run.experiment != "lock" && n.run.experiment != "fidelity" &&
      n.run.experiment != "suite")
    diag(space_line, "no paths declared");
  if (n.L < 0 || n.L > 64) diag(space_line, "truncation L must lie in [0, 64]");
  std::set<std::string> declared(n.paths.begin(), n.paths.end());
  if (declared.size() != n.paths.size()) diag(space_line, "duplicate path label");
  auto known = [&](const std::string& p) { return declared.count(p) > 0; };

  std::set<std::string> ids;
  for (const auto& s : n.sources) {
    if (!ids.insert(s.id).second) diag(s.line, "duplicate photon id '" + s.id + "'");
    if (!known(s.path)) diag(s.line, "undeclared path '" + s.path + "'");
    if (!s.recipe.empty() && s.recipe != "aux") {
      try {
        find_recipe(s.recipe);
      } catch (const UnknownRecipe& e) {
        diag(s.line, e.what());
      }
    }
    for (const auto& [m, a] : s.ket)
      if (std::abs(m.oam) > n.L) diag(s.line, "OAM " + format_oam(m.oam) + " outside the truncation window");
    if (s.recipe.empty() && s.ket.empty()) diag(s.line, "empty source");
  }

  SpacePtr space;
  if (!n.paths.empty() && n.L >= 0 && n.L <= 64 && declared.size() == n.paths.size())
    space = make_space(n.paths, n.L);
  for (const auto& st : n.steps)
    for (std::size_t i = 0; i < st.elements.size(); ++i) {
      const auto& e = st.elements[i];
      bool ok = true;
      for (const auto& p : element_paths(e))
        if (!known(p)) {
          diag(st.lines[i], "undeclared path '" + p + "' in " + e.kind);
          ok = false;
        }
      if (ok && space) {
        try {
          element_transform(e, space, Conventions{});
        } catch (const Error& ex) {
          diag(st.lines[i], ex.what());
        }
      }
    }

  for (const auto& [det, count] : n.detection.pattern) {
    if (count < 0) diag(detection_line, "negative photon count for '" + det + "'");
    auto it = n.detection.aliases.find(det);
    if (it == n.detection.aliases.end() && !known(det)) diag(detection_line, "undeclared detector path '" + det + "'");
  }
  for (const auto& [det, ps] : n.detection.aliases)
    for (const auto& p : ps)
      if (!known(p)) diag(detection_line, "undeclared path '" + p + "' in alias " + det);
  for (const auto& [p, a] : n.detection.analyzers)
    if (!known(p)) diag(detection_line, "undeclared analyzer path '" + p + "'");
  if (!n.detection.basis.empty() && n.detection.basis != "ZX" && n.detection.basis != "XZ" &&
      n.detection.basis != "TableA3")
    diag(detection_line, "unknown basis '" + n.detection.basis + "'");

  const auto& r = n.run;
  if (std::find(experiment_kinds().begin(), experiment_kinds().end(), r.experiment) == experiment_kinds().end())
    diag(run_line, "unknown experiment '" + r.experiment + "'");
  if (r.aux != "prestage" && r.aux != "direct") diag(run_line, "aux must be prestage or direct");
  if (!r.analytic && r.shots == 0) diag(run_line, "shot mode needs shots > 0");
  auto guard = [&](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      diag(run_line, e.what());
    }
  };
  guard([&] { r.noise.validate(); });
  if (r.experiment == "lock") {
    guard([&] { r.lock.validate(); });
    guard([&] { r.pid.validate(); });
    guard([&] { r.drift.validate(); });
    if (!(r.lock_run.duration > 0.0)) diag(run_line, "lock.duration must be > 0");
  }
  if (r.experiment == "transcript" && r.golden.empty()) diag(run_line, "transcript needs golden = <file>");

  if (r.experiment == "cpf_d4") {
    for (const char* want : {"1", "4"})
      if (!ids.count(want)) diag(0, std::string("cpf_d4 needs data source ") + want);
    for (const auto& s : n.sources) {
      if ((s.id == "2" || s.id == "3") && s.recipe != "aux") diag(s.line, "sources 2 and 3 are the auxiliaries (aux)");
      if (s.id != "1" && s.id != "2" && s.id != "3" && s.id != "4")
        diag(s.line, "cpf_d4 photon ids are 1..4");
    }
    // a listed chain must be the one the pipeline simulates
    if (!n.steps.empty()) {
      const auto want = pipeline_steps(r.aux == "direct" ? AuxMode::Direct : AuxMode::Prestage);
      std::size_t k = 0;
      for (; k < std::min(want.size(), n.steps.size()); ++k) {
        const auto& got = n.steps[k];
        if (got.label != want[k].label) {
          diag(got.line, "step '" + got.label + "' where the cpf_d4 chain has '" + want[k].label + "'");
          break;
        }
        const auto& we = want[k].elements;
        std::size_t i = 0;
        for (; i < std::min(we.size(), got.elements.size()); ++i)
          if (!(we[i] == got.elements[i])) break;
        if (i < we.size() || i < got.elements.size()) {
          const std::size_t line = i < got.lines.size() ? got.lines[i] : got.line;
          diag(line, "step '" + got.label + "' differs from the cpf_d4 chain at element " + std::to_string(i + 1) +
                         (i < we.size() ? " (expected " + to_string(we[i]) + ")" : ""));
          break;
        }
      }
      if (k == std::min(want.size(), n.steps.size()) && want.size() != n.steps.size())
        diag(n.steps.back().line, "cpf_d4 chain has " + std::to_string(want.size()) + " steps, netlist lists " +
                                      std::to_string(n.steps.size()));
    }
  }
  return d;
}

inline NetlistParse parse_netlist(std::string_view text) {
  using namespace netlist_detail;
  NetlistParse res;
  Netlist n;
  auto& diags = res.diagnostics;
  auto diag = [&](std::size_t line, std::size_t col, std::string msg) {
    diags.push_back({line, col, std::move(msg)});
  };

  std::string section;
  bool seen_version = false;
  std::size_t space_line = 0, run_line = 0, detection_line = 0;
  std::set<std::string> seen_keys;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (const auto h = raw.find('#'); h != std::string_view::npos) raw = raw.substr(0, h);
    std::size_t lead = 0;
    const std::string_view line = trim(raw, &lead);
    if (line.empty()) continue;
    const std::size_t col0 = lead + 1;

    if (!seen_version) {
      seen_version = true;
      if (line.rfind("version", 0) == 0) {
        const auto v = trim(line.substr(7));
        if (v != "1") diag(lineno, col0 + 8, "unsupported version '" + std::string(v) + "'");
        continue;
      }
      diag(lineno, col0, "expected 'version 1' first");
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        diag(lineno, col0, "unterminated section header");
        continue;
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      static const std::set<std::string> known{"space", "sources", "elements", "detection", "run"};
      if (!known.count(section)) diag(lineno, col0 + 1, "unknown section '" + section + "'");
      if (section == "space") space_line = lineno;
      if (section == "run") run_line = lineno;
      if (section == "detection") detection_line = lineno;
      continue;
    }
    if (section.empty()) {
      diag(lineno, col0, "content outside a section");
      continue;
    }

    if (section == "elements") {
      if (line.rfind("step ", 0) == 0 || line == "step") {
        const auto label = trim(line.substr(4));
        if (label.empty()) diag(lineno, col0, "step needs a label");
        n.steps.push_back({std::string(label), {}, {}, lineno});
        continue;
      }
      const auto r = parse_element(line);
      for (const auto& is : r.issues) diag(lineno, col0 + is.column, is.message);
      if (r.element) {
        if (n.steps.empty()) n.steps.push_back({"", {}, {}, lineno});
        n.steps.back().elements.push_back(*r.element);
        n.steps.back().lines.push_back(lineno);
      }
      continue;
    }

    // key = value sections
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      diag(lineno, col0, "expected 'key = value'");
      continue;
    }
    std::size_t vlead = 0;
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1), &vlead);
    const std::size_t vcol = col0 + eq + 1 + vlead;
    if (key.empty()) {
      diag(lineno, col0, "missing key");
      continue;
    }
    if (section != "sources" && !(section == "detection" && key.rfind("alias ", 0) == 0)) {
      if (!seen_keys.insert(section + "." + key).second) diag(lineno, col0, "duplicate key '" + key + "'");
    }
    if (value.empty()) {
      diag(lineno, vcol, "missing value for '" + key + "'");
      continue;
    }

    if (section == "space") {
      if (key == "paths") {
        for (const auto& [item, off] : split_list(value)) {
          if (!is_ident(item)) diag(lineno, vcol + off, "bad path label '" + item + "'");
          else n.paths.push_back(item);
        }
      } else if (key == "L") {
        const auto v = parse_uint(value);
        if (!v || *v > 64) diag(lineno, vcol, "L must be an integer in [0, 64]");
        else n.L = static_cast<int>(*v);
      } else {
        diag(lineno, col0, "unknown key '" + key + "' in [space]");
      }
    } else if (section == "sources") {
      SourceSpec s;
      s.id = key;
      s.line = lineno;
      if (!is_ident(key)) diag(lineno, col0, "bad photon id '" + key + "'");
      const auto at = value.rfind('@');
      if (at == std::string_view::npos) {
        diag(lineno, vcol, "source needs '@ <path>'");
        continue;
      }
      s.path = std::string(trim(value.substr(at + 1)));
      if (!is_ident(s.path)) diag(lineno, vcol + at + 1, "bad path label '" + s.path + "'");
      const auto spec = trim(value.substr(0, at));
      if (spec.rfind("ket(", 0) == 0) {
        if (spec.back() != ')') {
          diag(lineno, vcol, "unterminated ket(");
          continue;
        }
        // items split on commas outside parentheses
        const auto body = spec.substr(4, spec.size() - 5);
        int depth = 0;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= body.size(); ++i) {
          if (i < body.size() && body[i] == '(') ++depth;
          if (i < body.size() && body[i] == ')') --depth;
          if (i == body.size() || (body[i] == ',' && depth == 0)) {
            const auto item = trim(body.substr(start, i - start));
            const std::size_t icol = vcol + 4 + start;
            start = i + 1;
            const auto e = item.find('=');
            if (e == std::string_view::npos) {
              diag(lineno, icol, "ket term needs 'pol:l=amplitude'");
              continue;
            }
            const auto mode = parse_pol_oam(trim(item.substr(0, e)));
            const auto amp = parse_amp(item.substr(e + 1));
            if (!mode) diag(lineno, icol, "bad mode '" + std::string(trim(item.substr(0, e))) + "'");
            else if (!amp) diag(lineno, icol, "bad amplitude '" + std::string(trim(item.substr(e + 1))) + "'");
            else s.ket.push_back({Mode{s.path, mode->first, mode->second}, *amp});
          }
        }
      } else {
        s.recipe = std::string(spec);
        if (s.recipe.empty()) diag(lineno, vcol, "missing source state");
      }
      n.sources.push_back(std::move(s));
    } else if (section == "detection") {
      if (key == "pattern") {
        for (const auto& [item, off] : split_list(value)) {
          const auto c = item.rfind(':');
          const auto cnt = c == std::string::npos ? std::nullopt : parse_uint(item.substr(c + 1));
          if (!cnt || !is_ident(item.substr(0, c))) diag(lineno, vcol + off, "pattern entries are 'detector:count'");
          else n.detection.pattern.emplace_back(item.substr(0, c), static_cast<int>(*cnt));
        }
      } else if (key.rfind("alias ", 0) == 0) {
        const std::string det(trim(std::string_view(key).substr(6)));
        if (!is_ident(det)) diag(lineno, col0, "bad detector name '" + det + "'");
        auto& v = n.detection.aliases[det];
        for (const auto& [item, off] : split_list(value)) {
          if (!is_ident(item)) diag(lineno, vcol + off, "bad path label '" + item + "'");
          else v.push_back(item);
        }
      } else if (key == "analyzers") {
        for (const auto& [item, off] : split_list(value)) {
          const auto c = item.rfind(':');
          try {
            if (c == std::string::npos) throw InvalidParameter("analyzer entries are 'path:HV|DA|RL'");
            n.detection.analyzers[item.substr(0, c)] = analyzer_from_string(item.substr(c + 1));
          } catch (const Error& e) {
            diag(lineno, vcol + off, e.what());
          }
        }
      } else if (key == "accept") {
        n.detection.accept.clear();
        for (const auto& [item, off] : split_list(value)) {
          try {
            n.detection.accept.insert(bell_from_string(item));
          } catch (const Error& e) {
            diag(lineno, vcol + off, e.what());
          }
        }
      } else if (key == "basis") {
        n.detection.basis = std::string(value);
      } else {
        diag(lineno, col0, "unknown key '" + key + "' in [detection]");
      }
    } else if (section == "run") {
      auto& r = n.run;
      const std::string v(value);
      bool matched = true;
      if (key == "experiment") r.experiment = v;
      else if (key == "aux") r.aux = v;
      else if (key == "golden") r.golden = v;
      else if (key == "conventions") r.conventions = v;
      else if (key == "shots" || key == "seed" || key == "noise.realizations" || key == "lock.record_every") {
        const auto u = parse_uint(value);
        if (!u) diag(lineno, vcol, "'" + key + "' must be a non-negative integer");
        else if (key == "shots") r.shots = *u;
        else if (key == "seed") r.seed = *u;
        else if (key == "noise.realizations") r.noise.realizations = static_cast<int>(*u);
        else r.lock_run.record_every = static_cast<std::size_t>(*u);
      } else if (key == "analytic") {
        const auto b = parse_bool(value);
        if (!b) diag(lineno, vcol, "'analytic' must be true or false");
        else r.analytic = *b;
      } else if (key == "drift.kind") {
        const auto k = drift_from(value);
        if (!k) diag(lineno, vcol, "drift.kind must be none, random-walk, sinusoidal or step");
        else r.drift.kind = *k;
      } else {
        matched = false;
      }
      if (!matched) {
        bool found = false;
        for (auto& [k, ptr] : run_doubles(r))
          if (k == key) {
            found = true;
            if (auto x = detail::parse_scalar(value)) *ptr = *x;
            else diag(lineno, vcol, "'" + key + "' must be a number");
          }
        if (!found) diag(lineno, col0, "unknown key '" + key + "' in [run]");
      }
    }
  }
  if (!seen_version) diag(0, 0, "empty netlist");
  if (!diags.empty()) return res;
  auto sem = validate_netlist(n, space_line, run_line, detection_line);
  if (!sem.empty()) {
    res.diagnostics = std::move(sem);
    return res;
  }
  res.netlist = std::move(n);
  return res;
}

/// Canonical text: every key written, numbers at %.17g.
inline std::string serialize_netlist(const Netlist& n) {
  using namespace netlist_detail;
  std::ostringstream os;
  auto join = [](const auto& v, auto f) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + f(x);
    return s;
  };
  os << "version " << n.version << "\n\n[space]\n";
  if (!n.paths.empty()) os << "paths = " << join(n.paths, [](const std::string& p) { return p; }) << "\n";
  os << "L = " << n.L << "\n\n[sources]\n";
  for (const auto& s : n.sources) {
    os << s.id << " = ";
    if (!s.recipe.empty()) {
      os << s.recipe;
    } else {
      os << "ket(" << join(s.ket, [](const std::pair<Mode, cplx>& t) {
        return std::string(1, pol_char(t.first.pol)) + ":" + format_oam(t.first.oam) + "=(" +
               format_number(t.second.real()) + "," + format_number(t.second.imag()) + ")";
      }) << ")";
    }
    os << " @ " << s.path << "\n";
  }
  os << "\n[elements]\n";
  for (const auto& st : n.steps) {
    if (!st.label.empty()) os << "step " << st.label << "\n";
    for (const auto& e : st.elements) os << to_string(e) << "\n";
  }
  os << "\n[detection]\n";
  if (!n.detection.pattern.empty())
    os << "pattern = " << join(n.detection.pattern, [](const std::pair<std::string, int>& p) {
      return p.first + ":" + std::to_string(p.second);
    }) << "\n";
  for (const auto& [det, ps] : n.detection.aliases)
    os << "alias " << det << " = " << join(ps, [](const std::string& p) { return p; }) << "\n";
  if (!n.detection.analyzers.empty())
    os << "analyzers = " << join(n.detection.analyzers, [](const std::pair<const std::string, Analyzer>& a) {
      return a.first + ":" + to_string(a.second);
    }) << "\n";
  os << "accept = " << join(n.detection.accept, [](BellOutcome b) { return std::string(to_string(b)); }) << "\n";
  if (!n.detection.basis.empty()) os << "basis = " << n.detection.basis << "\n";

  const auto& r = n.run;
  os << "\n[run]\n";
  os << "experiment = " << r.experiment << "\n";
  os << "shots = " << r.shots << "\n";
  os << "seed = " << r.seed << "\n";
  os << "analytic = " << (r.analytic ? "true" : "false") << "\n";
  os << "aux = " << r.aux << "\n";
  if (!r.golden.empty()) os << "golden = " << r.golden << "\n";
  if (!r.conventions.empty()) os << "conventions = " << r.conventions << "\n";
  os << "noise.realizations = " << r.noise.realizations << "\n";
  os << "lock.record_every = " << r.lock_run.record_every << "\n";
  os << "drift.kind = " << drift_name(r.drift.kind) << "\n";
  RunSpec copy = r;
  for (const auto& [k, ptr] : run_doubles(copy)) os << k << " = " << format_number(*ptr) << "\n";
  return os.str();
}

}  // namespace hdcpf
