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

// Optical elements: descriptors, their textual grammar, and the exact
// single-photon matrices they induce on a truncated mode space.
//
// Descriptor grammar (also consumed by the netlist parser):
//
//   element  := KIND [ "(" param { "," param } ")" ] [ "@" path ]
//   param    := key "=" ( scalar | "[" path { "," path } "]" | word )
//   scalar   := number | [ "-" ] [ number "*" ] "pi" [ "/" number ]
//
// Kinds: HWP(angle) QWP(angle) QP(q[,offset]) SPP(dl) DP(angle[,pol])
//        PP(phase[,pol]) MIRROR DL POL(angle) PBS(in=[..],out=[..])
//        OKCNOT(k) ROUTE(to)

#pragma once

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hdcpf/mode_space.hpp"

namespace hdcpf {

/// Phase conventions that the element formulas leave implicit. The defaults
/// reproduce the port-A/port-B transcripts of the OAM beam splitter line by
/// line; tests/fixtures/conventions.txt freezes the same values.
struct Conventions {
  /// Phase picked up by the V component reflected at a PBS.
  double pbs_reflection_phase = kPi / 2;
  /// Reflection mirrors the beam, sending l -> -l.
  bool reflection_flips_oam = true;
  /// Phase of a plain mirror reflection.
  double mirror_phase = kPi / 2;
  /// Arm phase of the polarizing interferometer inside an O_k-CNOT; cancels
  /// the factor i each Dove prism contributes.
  double interferometer_phase = -kPi / 2;
  /// Phase plates of the OAM beam splitter.
  double phase_plate_phase = kPi;

  friend bool operator==(const Conventions&, const Conventions&) = default;
};

/// Reads "key = value" lines ('#' starts a comment). Unknown keys throw.
inline Conventions load_conventions(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw InvalidParameter("cannot open convention fixture " + file);
  Conventions c;
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "reflection_flips_oam") {
      c.reflection_flips_oam = (val == "true" || val == "1");
      continue;
    }
    const double v = std::stod(val);
    if (key == "pbs_reflection_phase") c.pbs_reflection_phase = v;
    else if (key == "mirror_phase") c.mirror_phase = v;
    else if (key == "interferometer_phase") c.interferometer_phase = v;
    else if (key == "phase_plate_phase") c.phase_plate_phase = v;
    else throw InvalidParameter("unknown convention key '" + key + "'");
  }
  return c;
}

using ParamValue = std::variant<double, std::string, std::vector<std::string>>;

/// One optical element with its parameters and path binding.
struct Element {
  std::string kind;
  std::vector<std::pair<std::string, ParamValue>> params;
  std::string path;  // empty for two-path elements (PBS)

  friend bool operator==(const Element&, const Element&) = default;

  const ParamValue* find(std::string_view key) const {
    for (const auto& [k, v] : params)
      if (k == key) return &v;
    return nullptr;
  }
  bool has(std::string_view key) const { return find(key) != nullptr; }

  double number(std::string_view key) const {
    const auto* v = find(key);
    if (!v) throw InvalidParameter(kind + " requires parameter '" + std::string(key) + "'");
    if (const auto* d = std::get_if<double>(v)) return *d;
    throw InvalidParameter(kind + " parameter '" + std::string(key) + "' must be numeric");
  }
  double number_or(std::string_view key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  std::string word(std::string_view key) const {
    const auto* v = find(key);
    if (!v) throw InvalidParameter(kind + " requires parameter '" + std::string(key) + "'");
    if (const auto* s = std::get_if<std::string>(v)) return *s;
    throw InvalidParameter(kind + " parameter '" + std::string(key) + "' must be a word");
  }
  std::vector<std::string> list(std::string_view key) const {
    const auto* v = find(key);
    if (!v) throw InvalidParameter(kind + " requires parameter '" + std::string(key) + "'");
    if (const auto* s = std::get_if<std::vector<std::string>>(v)) return *s;
    throw InvalidParameter(kind + " parameter '" + std::string(key) + "' must be a path list");
  }
};

// Convenience constructors.
namespace el {
inline Element hwp(double a, std::string p) { return {"HWP", {{"angle", a}}, std::move(p)}; }
inline Element qwp(double a, std::string p) { return {"QWP", {{"angle", a}}, std::move(p)}; }
inline Element qp(double q, std::string p, double offset = 0.0) {
  Element e{"QP", {{"q", q}}, std::move(p)};
  if (offset != 0.0) e.params.push_back({"offset", offset});
  return e;
}
inline Element spp(int dl, std::string p) { return {"SPP", {{"dl", double(dl)}}, std::move(p)}; }
inline Element dp(double a, std::string p) { return {"DP", {{"angle", a}}, std::move(p)}; }
inline Element dp_pol(double a, Pol pol, std::string p) {
  return {"DP", {{"angle", a}, {"pol", std::string(1, pol_char(pol))}}, std::move(p)};
}
inline Element pp(double phase, std::string p) { return {"PP", {{"phase", phase}}, std::move(p)}; }
inline Element mirror(std::string p) { return {"MIRROR", {}, std::move(p)}; }
inline Element dl(std::string p) { return {"DL", {}, std::move(p)}; }
inline Element pol(double a, std::string p) { return {"POL", {{"angle", a}}, std::move(p)}; }
inline Element pbs(std::vector<std::string> in, std::vector<std::string> out) {
  return {"PBS", {{"in", std::move(in)}, {"out", std::move(out)}}, ""};
}
inline Element okcnot(int k, std::string p) { return {"OKCNOT", {{"k", double(k)}}, std::move(p)}; }
inline Element route(std::string to, std::string p) { return {"ROUTE", {{"to", std::move(to)}}, std::move(p)}; }
}  // namespace el

inline bool is_known_kind(std::string_view k) {
  static const char* const kinds[] = {"HWP", "QWP", "QP",  "SPP", "DP",     "PP",
                                      "MIRROR", "DL", "POL", "PBS", "OKCNOT", "ROUTE"};
  for (const char* s : kinds)
    if (k == s) return true;
  return false;
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Canonical descriptor text, e.g. "HWP(angle=0.39269908169872414)@A".
inline std::string to_string(const Element& e) {
  std::string s = e.kind;
  if (!e.params.empty()) {
    s += "(";
    for (std::size_t i = 0; i < e.params.size(); ++i) {
      if (i) s += ",";
      s += e.params[i].first + "=";
      const auto& v = e.params[i].second;
      if (const auto* d = std::get_if<double>(&v)) s += format_number(*d);
      else if (const auto* w = std::get_if<std::string>(&v)) s += *w;
      else {
        const auto& l = std::get<std::vector<std::string>>(v);
        s += "[";
        for (std::size_t j = 0; j < l.size(); ++j) s += (j ? "," : "") + l[j];
        s += "]";
      }
    }
    s += ")";
  }
  if (!e.path.empty()) s += "@" + e.path;
  return s;
}

/// Position-tagged parse problem; column is 0-based within the parsed text.
struct ParseIssue {
  std::size_t column = 0;
  std::string message;
};

struct ElementParse {
  std::optional<Element> element;
  std::vector<ParseIssue> issues;
};

namespace detail {

inline bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' ||
         c == '~' || c == '\'';
}

/// number | [-][number*]pi[/number]
inline std::optional<double> parse_scalar(std::string_view s) {
  auto trim = [](std::string_view v) {
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
    return v;
  };
  s = trim(s);
  if (s.empty()) return std::nullopt;
  auto plain = [](std::string_view v) -> std::optional<double> {
    if (v.empty()) return std::nullopt;
    std::string tmp(v);
    char* end = nullptr;
    const double d = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size()) return std::nullopt;
    if (!std::isfinite(d)) return std::nullopt;
    return d;
  };
  if (s.find("pi") == std::string_view::npos) return plain(s);
  double sign = 1.0;
  if (s.front() == '-') {
    sign = -1.0;
    s.remove_prefix(1);
  } else if (s.front() == '+') {
    s.remove_prefix(1);
  }
  double mult = 1.0, div = 1.0;
  const auto pi = s.find("pi");
  std::string_view head = s.substr(0, pi);
  std::string_view tail = s.substr(pi + 2);
  if (!head.empty()) {
    if (head.back() != '*') return std::nullopt;
    auto m = plain(head.substr(0, head.size() - 1));
    if (!m) return std::nullopt;
    mult = *m;
  }
  if (!tail.empty()) {
    if (tail.front() != '/') return std::nullopt;
    auto d = plain(tail.substr(1));
    if (!d || *d == 0.0) return std::nullopt;
    div = *d;
  }
  return sign * mult * kPi / div;
}

}  // namespace detail

/// Total parser for one element descriptor: never throws, reports issues.
inline ElementParse parse_element(std::string_view text) {
  ElementParse res;
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  };
  auto issue = [&](std::size_t col, std::string msg) {
    res.issues.push_back({col, std::move(msg)});
  };
  skip_ws();
  const std::size_t kind_start = i;
  while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
  Element e;
  e.kind = std::string(text.substr(kind_start, i - kind_start));
  if (e.kind.empty()) {
    issue(kind_start, "expected element kind");
    return res;
  }
  if (!is_known_kind(e.kind)) issue(kind_start, "unknown element kind '" + e.kind + "'");
  skip_ws();
  if (i < text.size() && text[i] == '(') {
    ++i;
    skip_ws();
    if (i < text.size() && text[i] == ')') {
      ++i;
    } else {
      while (true) {
        skip_ws();
        const std::size_t key_start = i;
        while (i < text.size() && detail::is_ident_char(text[i])) ++i;
        std::string key(text.substr(key_start, i - key_start));
        if (key.empty()) {
          issue(key_start, "expected parameter name");
          return res;
        }
        skip_ws();
        if (i >= text.size() || text[i] != '=') {
          issue(i, "expected '=' after parameter '" + key + "'");
          return res;
        }
        ++i;
        skip_ws();
        const std::size_t val_start = i;
        if (i < text.size() && text[i] == '[') {
          ++i;
          std::vector<std::string> items;
          while (true) {
            skip_ws();
            const std::size_t s0 = i;
            while (i < text.size() && detail::is_ident_char(text[i])) ++i;
            if (i == s0) {
              issue(s0, "expected path label in list");
              return res;
            }
            items.emplace_back(text.substr(s0, i - s0));
            skip_ws();
            if (i < text.size() && text[i] == ',') {
              ++i;
              continue;
            }
            if (i < text.size() && text[i] == ']') {
              ++i;
              break;
            }
            issue(i, "expected ',' or ']' in path list");
            return res;
          }
          e.params.push_back({key, std::move(items)});
        } else {
          while (i < text.size() && text[i] != ',' && text[i] != ')') ++i;
          std::string_view raw = text.substr(val_start, i - val_start);
          while (!raw.empty() && std::isspace(static_cast<unsigned char>(raw.back())))
            raw.remove_suffix(1);
          if (raw.empty()) {
            issue(val_start, "missing parameter value for '" + key + "'");
            return res;
          }
          if (auto d = detail::parse_scalar(raw)) {
            e.params.push_back({key, *d});
          } else {
            bool word = true;
            for (char c : raw) word = word && detail::is_ident_char(c);
            if (!word) {
              issue(val_start, "malformed value '" + std::string(raw) + "' for '" + key + "'");
              return res;
            }
            e.params.push_back({key, std::string(raw)});
          }
        }
        skip_ws();
        if (i < text.size() && text[i] == ',') {
          ++i;
          continue;
        }
        if (i < text.size() && text[i] == ')') {
          ++i;
          break;
        }
        issue(i, "expected ',' or ')'");
        return res;
      }
    }
  }
  skip_ws();
  if (i < text.size() && text[i] == '@') {
    ++i;
    skip_ws();
    const std::size_t p0 = i;
    while (i < text.size() && detail::is_ident_char(text[i])) ++i;
    if (i == p0) {
      issue(p0, "expected path label after '@'");
      return res;
    }
    e.path = std::string(text.substr(p0, i - p0));
  }
  skip_ws();
  if (i != text.size()) {
    issue(i, "unexpected trailing text");
    return res;
  }
  if (res.issues.empty()) res.element = std::move(e);
  return res;
}

/// Throwing convenience wrapper around parse_element.
inline Element element_from_string(std::string_view text) {
  auto r = parse_element(text);
  if (!r.element) {
    const auto& is = r.issues.front();
    if (is.message.rfind("unknown element", 0) == 0) throw UnknownElement(is.message);
    throw InvalidParameter(is.message + " at column " + std::to_string(is.column));
  }
  return *r.element;
}

namespace detail {

/// Builds a transform that acts as `local(pol_in, l_in)` on one path and as
/// the identity on every other path. `local` returns (pol_out, l_out, amp)
/// triples; out-of-window images mark the column out of domain.
template <typename Local>
ModeTransform on_path(const SpacePtr& space, const std::string& path, Local local,
                      TransformKind kind, std::string prov) {
  const std::size_t pidx = space->path_index(path);
  const int L = space->truncation();
  SparseOp m = SparseOp::identity(space->size());
  std::vector<bool> domain(space->size(), true);
  for (int pol = 0; pol < 2; ++pol) {
    for (int l = -L; l <= L; ++l) {
      const std::size_t col = space->index(pidx, Pol(pol), l);
      SparseOp::Column c;
      for (const auto& [po, lo, a] : local(Pol(pol), l)) {
        if (!space->in_window(lo)) {
          domain[col] = false;
          c.clear();
          break;
        }
        c.push_back({space->index(pidx, po, lo), a});
      }
      m.set_column(col, std::move(c));
    }
  }
  return ModeTransform(space, std::move(m), kind, std::move(prov), std::move(domain));
}

struct Img {
  Pol pol;
  int l;
  cplx amp;
};

inline std::vector<Img> pol_matrix(const cplx (&j)[2][2], Pol in, int l) {
  const int c = static_cast<int>(in);
  return {{Pol::H, l, j[0][c]}, {Pol::V, l, j[1][c]}};
}

}  // namespace detail

/// Exact single-photon transform of one element. OKCNOT expands into its
/// wave-plate and interferometer composite.
inline ModeTransform element_transform(const Element& e, const SpacePtr& space,
                                       const Conventions& conv = {});

/// O_k-CNOT as an ordered element list on `path`.
inline std::vector<Element> okcnot_elements(int k, const std::string& path) {
  if (k != 1 && k != 2) throw InvalidParameter("O_k-CNOT order must be 1 or 2");
  const double gamma = k == 1 ? kPi / 4 : kPi / 8;
  std::vector<Element> seq;
  seq.push_back(el::hwp(kPi / 8, path));
  // polarizing interferometer: Dove prisms on the H and V arms, then HWP(pi/4)
  seq.push_back(el::dp_pol(gamma, Pol::H, path));
  seq.push_back(el::dp_pol(-gamma, Pol::V, path));
  seq.push_back(el::hwp(kPi / 4, path));
  seq.push_back({"PP", {{"phase", std::string("interferometer")}}, path});
  if (k == 1) seq.push_back(el::hwp(kPi / 8, path));
  else seq.push_back(el::qwp(kPi / 4, path));
  return seq;
}

inline ModeTransform element_transform(const Element& e, const SpacePtr& space,
                                       const Conventions& conv) {
  using detail::Img;
  const std::string prov = to_string(e);
  auto need_path = [&] {
    if (e.path.empty()) throw InvalidParameter(e.kind + " needs a path binding");
    if (!space->has_path(e.path)) throw SpaceMismatch("unknown path '" + e.path + "'");
  };
  auto pol_filter = [&]() -> std::optional<Pol> {
    if (!e.has("pol")) return std::nullopt;
    const auto w = e.word("pol");
    if (w == "H") return Pol::H;
    if (w == "V") return Pol::V;
    throw InvalidParameter("pol must be H or V");
  };

  ModeTransform out;
  if (e.kind == "HWP") {
    need_path();
    const double a = e.number("angle");
    const double c = std::cos(2 * a), s = std::sin(2 * a);
    const cplx j[2][2] = {{c, s}, {s, -c}};
    out = detail::on_path(space, e.path,
                          [&](Pol p, int l) { return detail::pol_matrix(j, p, l); },
                          TransformKind::Unitary, prov);
  } else if (e.kind == "QWP") {
    // Retarder with phase i along the axis at `angle`, 1 along its normal.
    need_path();
    const double a = e.number("angle");
    const double c = std::cos(a), s = std::sin(a);
    const cplx j[2][2] = {{kI * c * c + s * s, (kI - 1.0) * c * s},
                          {(kI - 1.0) * c * s, kI * s * s + c * c}};
    out = detail::on_path(space, e.path,
                          [&](Pol p, int l) { return detail::pol_matrix(j, p, l); },
                          TransformKind::Unitary, prov);
  } else if (e.kind == "QP") {
    // R|l> -> e^{2i a0} L|l+2q>,  L|l> -> e^{-2i a0} R|l-2q>
    need_path();
    const double q = e.number("q");
    const double shift = 2 * q;
    if (std::abs(shift - std::round(shift)) > 1e-12)
      throw InvalidParameter("QP charge must shift OAM by an integer (got q=" +
                             format_number(q) + ")");
    const int dl = static_cast<int>(std::lround(shift));
    const cplx up = std::exp(2.0 * kI * e.number_or("offset", 0.0));
    const cplx down = std::conj(up);
    const double r = 1 / std::sqrt(2.0);
    out = detail::on_path(
        space, e.path,
        [&](Pol p, int l) {
          // components along R = (H + iV)/sqrt2 and L = (H - iV)/sqrt2
          const cplx cr = p == Pol::H ? cplx(r) : -kI * r;
          const cplx cl = p == Pol::H ? cplx(r) : kI * r;
          return std::vector<Img>{{Pol::H, l + dl, cr * up * r},
                                  {Pol::V, l + dl, cr * up * (-kI) * r},
                                  {Pol::H, l - dl, cl * down * r},
                                  {Pol::V, l - dl, cl * down * kI * r}};
        },
        TransformKind::Unitary, prov);
  } else if (e.kind == "SPP") {
    need_path();
    const double d = e.number("dl");
    if (d != std::round(d)) throw InvalidParameter("SPP step must be an integer");
    const int dl = static_cast<int>(d);
    out = detail::on_path(space, e.path,
                          [&](Pol p, int l) { return std::vector<Img>{{p, l + dl, 1.0}}; },
                          TransformKind::Unitary, prov);
  } else if (e.kind == "DP") {
    // |l> -> i e^{2 i gamma l} |-l>
    need_path();
    const double g = e.number("angle");
    const auto only = pol_filter();
    out = detail::on_path(
        space, e.path,
        [&](Pol p, int l) {
          if (only && *only != p) return std::vector<Img>{{p, l, 1.0}};
          return std::vector<Img>{{p, -l, kI * std::exp(2.0 * kI * g * double(l))}};
        },
        TransformKind::Unitary, prov);
  } else if (e.kind == "PP") {
    need_path();
    double phi = 0.0;
    const auto* v = e.find("phase");
    if (v && std::holds_alternative<std::string>(*v)) {
      const auto& w = std::get<std::string>(*v);
      if (w == "interferometer") phi = conv.interferometer_phase;
      else if (w == "plate") phi = conv.phase_plate_phase;
      else throw InvalidParameter("unknown named phase '" + w + "'");
    } else {
      phi = e.number("phase");
    }
    const auto only = pol_filter();
    const cplx f = std::exp(kI * phi);
    out = detail::on_path(
        space, e.path,
        [&](Pol p, int l) {
          return std::vector<Img>{{p, l, (only && *only != p) ? cplx(1.0) : f}};
        },
        TransformKind::Unitary, prov);
  } else if (e.kind == "MIRROR") {
    need_path();
    const cplx f = std::exp(kI * conv.mirror_phase);
    const bool flip = conv.reflection_flips_oam;
    out = detail::on_path(
        space, e.path,
        [&](Pol p, int l) { return std::vector<Img>{{p, flip ? -l : l, f}}; },
        TransformKind::Unitary, prov);
  } else if (e.kind == "DL") {
    need_path();
    out = ModeTransform(space, SparseOp::identity(space->size()), TransformKind::Unitary, prov);
  } else if (e.kind == "POL") {
    need_path();
    const double a = e.number("angle");
    const double c = std::cos(a), s = std::sin(a);
    const cplx j[2][2] = {{c * c, c * s}, {c * s, s * s}};
    out = detail::on_path(space, e.path,
                          [&](Pol p, int l) { return detail::pol_matrix(j, p, l); },
                          TransformKind::Projector, prov);
  } else if (e.kind == "PBS") {
    const auto in = e.list("in");
    const auto outp = e.list("out");
    if (in.size() != 2 || outp.size() != 2)
      throw InvalidParameter("PBS needs exactly two input and two output paths");
    if (in[0] == in[1] || outp[0] == outp[1])
      throw InvalidParameter("PBS ports must be distinct");
    std::size_t pi[2], po[2];
    for (int k = 0; k < 2; ++k) {
      pi[k] = space->path_index(in[k]);
      po[k] = space->path_index(outp[k]);
    }
    const int L = space->truncation();
    const cplx refl = std::exp(kI * conv.pbs_reflection_phase);
    const bool flip = conv.reflection_flips_oam;
    SparseOp m = SparseOp::identity(space->size());
    // transmitted H keeps its side, reflected V crosses over
    for (int k = 0; k < 2; ++k) {
      for (int l = -L; l <= L; ++l) {
        m.set_column(space->index(pi[k], Pol::H, l),
                     {{space->index(po[k], Pol::H, l), 1.0}});
        m.set_column(space->index(pi[k], Pol::V, l),
                     {{space->index(po[1 - k], Pol::V, flip ? -l : l), refl}});
      }
    }
    // modes of output paths that are not inputs are fed back to the freed
    // input paths, so the block stays a permutation-like unitary
    std::vector<std::size_t> freed, taken;
    for (int k = 0; k < 2; ++k) {
      if (po[k] != pi[0] && po[k] != pi[1]) taken.push_back(po[k]);
      if (pi[k] != po[0] && pi[k] != po[1]) freed.push_back(pi[k]);
    }
    for (std::size_t k = 0; k < taken.size(); ++k)
      for (int pol = 0; pol < 2; ++pol)
        for (int l = -L; l <= L; ++l)
          m.set_column(space->index(taken[k], Pol(pol), l),
                       {{space->index(freed[k], Pol(pol), l), 1.0}});
    out = ModeTransform(space, std::move(m), TransformKind::Unitary, prov);
  } else if (e.kind == "ROUTE") {
    need_path();
    const auto to = e.word("to");
    const std::size_t a = space->path_index(e.path), b = space->path_index(to);
    const int L = space->truncation();
    SparseOp m = SparseOp::identity(space->size());
    if (a != b) {
      for (int pol = 0; pol < 2; ++pol)
        for (int l = -L; l <= L; ++l) {
          m.set_column(space->index(a, Pol(pol), l), {{space->index(b, Pol(pol), l), 1.0}});
          m.set_column(space->index(b, Pol(pol), l), {{space->index(a, Pol(pol), l), 1.0}});
        }
    }
    out = ModeTransform(space, std::move(m), TransformKind::Unitary, prov);
  } else if (e.kind == "OKCNOT") {
    need_path();
    const double k = e.number("k");
    if (k != 1.0 && k != 2.0) throw InvalidParameter("O_k-CNOT order must be 1 or 2");
    std::vector<ModeTransform> parts;
    for (const auto& sub : okcnot_elements(static_cast<int>(k), e.path))
      parts.push_back(element_transform(sub, space, conv));
    auto c = compose_transforms(parts);
    out = ModeTransform(space, c.matrix(), c.kind(), prov, c.domain());
  } else {
    throw UnknownElement("'" + e.kind + "'");
  }
  out.self_check();
  return out;
}

/// Composes an element list in order.
inline ModeTransform chain_transform(std::span<const Element> elements, const SpacePtr& space,
                                     const Conventions& conv = {}) {
  if (elements.empty()) return ModeTransform::identity(space);
  std::vector<ModeTransform> parts;
  parts.reserve(elements.size());
  for (const auto& e : elements) parts.push_back(element_transform(e, space, conv));
  return compose_transforms(parts);
}

}  // namespace hdcpf
