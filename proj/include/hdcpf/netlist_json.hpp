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

// JSON front end for netlists, for programs that would rather not print text.
//
//   {"version": 1,
//    "space":     {"paths": ["A", "B"], "L": 4},
//    "sources":   {"1": "Z:+1 @ A"},
//    "elements":  ["HWP(angle=pi/8)@A", {"step": "sort", "elements": ["..."]}],
//    "detection": {"pattern": ["A:1"], "alias D1": ["P1", "P2"]},
//    "run":       {"shots": 500, "analytic": false, "noise.loss": 0.1}}
//
// Each key/value becomes one line of the text form, so both front ends share
// the parser and validation. Diagnostics name the JSON location instead of a
// line; JSON syntax errors keep their line/column.

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hdcpf/netlist.hpp"

namespace hdcpf {

namespace netlist_json_detail {

inline std::string scalar_text(const nlohmann::json& v, bool& ok) {
  ok = true;
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) return format_number(v.get<double>());
  ok = false;
  return {};
}

inline std::string value_text(const nlohmann::json& v, bool& ok) {
  if (!v.is_array()) return scalar_text(v, ok);
  std::string s;
  for (const auto& x : v) {
    s += (s.empty() ? "" : ", ") + scalar_text(x, ok);
    if (!ok) return {};
  }
  ok = true;
  return s;
}

inline std::string escape_pointer(const std::string& key) {
  std::string s;
  for (char c : key) {
    if (c == '~') s += "~0";
    else if (c == '/') s += "~1";
    else s += c;
  }
  return s;
}

// Generated text plus, per line, where it came from.
struct Lowered {
  std::string text;
  std::vector<std::string> origin{""};  // index 0 unused, lines are 1-based
  std::vector<Diagnostic> diagnostics;

  void line(const std::string& s, const std::string& where) {
    text += s + "\n";
    origin.push_back(where);
  }
  void fail(const std::string& where, const std::string& msg) {
    diagnostics.push_back({0, 0, "at " + (where.empty() ? std::string("/") : where) + ": " + msg});
  }
};

inline Lowered lower(const nlohmann::json& j) {
  Lowered out;
  if (!j.is_object()) {
    out.fail("", "netlist must be a JSON object");
    return out;
  }
  const auto ver = j.find("version");
  if (ver == j.end()) out.line("", "/version");  // the text parser reports the missing tag
  else {
    bool ok = false;
    out.line("version " + scalar_text(*ver, ok), "/version");
    if (!ok) out.fail("/version", "version must be a number");
  }
  for (const auto& [key, val] : j.items()) {
    const std::string where = "/" + escape_pointer(key);
    if (key == "version") continue;
    if (key == "elements") {
      out.line("[elements]", where);
      if (!val.is_array()) {
        out.fail(where, "elements must be an array");
        continue;
      }
      for (std::size_t i = 0; i < val.size(); ++i) {
        const auto& e = val[i];
        const std::string at = where + "/" + std::to_string(i);
        if (e.is_string()) {
          out.line(e.get<std::string>(), at);
        } else if (e.is_object() && e.contains("step") && e["step"].is_string() &&
                   (!e.contains("elements") || e["elements"].is_array())) {
          out.line("step " + e["step"].get<std::string>(), at + "/step");
          if (e.contains("elements"))
            for (std::size_t k = 0; k < e["elements"].size(); ++k) {
              const auto& x = e["elements"][k];
              const std::string ak = at + "/elements/" + std::to_string(k);
              if (x.is_string()) out.line(x.get<std::string>(), ak);
              else out.fail(ak, "element descriptor must be a string");
            }
        } else {
          out.fail(at, "expected a descriptor string or {\"step\": ..., \"elements\": [...]}");
        }
      }
      continue;
    }
    // keyed sections; unknown names fall through to the text parser's diagnostic
    out.line("[" + key + "]", where);
    if (!val.is_object()) {
      out.fail(where, "section must be an object");
      continue;
    }
    for (const auto& [k, v] : val.items()) {
      const std::string at = where + "/" + escape_pointer(k);
      bool ok = false;
      const auto text = value_text(v, ok);
      if (!ok) {
        out.fail(at, "value must be a string, number, boolean or array of those");
        continue;
      }
      if (text.find('\n') != std::string::npos || k.find('\n') != std::string::npos) {
        out.fail(at, "line breaks are not allowed");
        continue;
      }
      out.line(k + " = " + text, at);
    }
  }
  return out;
}

inline std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace netlist_json_detail

/// Parses the JSON form. Total, like parse_netlist.
inline NetlistParse parse_netlist_json(std::string_view text) {
  using namespace netlist_json_detail;
  NetlistParse res;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [l, c] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    res.diagnostics.push_back({l, c, "invalid JSON"});
    return res;
  }
  auto low = lower(j);
  if (!low.diagnostics.empty()) {
    res.diagnostics = std::move(low.diagnostics);
    return res;
  }
  res = parse_netlist(low.text);
  for (auto& d : res.diagnostics) {
    if (d.line > 0 && d.line < low.origin.size())
      d.message = "at " + low.origin[d.line] + ": " + d.message;
    d.line = 0;
    d.column = 0;
  }
  return res;
}

/// JSON form of a netlist; parse_netlist_json(to_json(n).dump()) gives n back.
inline nlohmann::json netlist_to_json(const Netlist& n) {
  using nlohmann::json;
  // walk the canonical text so both forms stay in step
  const auto text = serialize_netlist(n);
  json j = json::object();
  j["version"] = n.version;
  std::string section;
  std::istringstream in(text);
  std::string line;
  json* step = nullptr;
  auto split = [](const std::string& v) {
    json a = json::array();
    for (const auto& [item, col] : netlist_detail::split_list(v)) a.push_back(item);
    return a;
  };
  while (std::getline(in, line)) {
    if (line.empty() || line.rfind("version ", 0) == 0) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      if (section == "elements") j["elements"] = json::array();
      else j[section] = json::object();
      step = nullptr;
      continue;
    }
    if (section == "elements") {
      if (line.rfind("step ", 0) == 0) {
        j["elements"].push_back({{"step", line.substr(5)}, {"elements", json::array()}});
        step = &j["elements"].back()["elements"];
      } else if (step) {
        step->push_back(line);
      } else {
        j["elements"].push_back(line);
      }
      continue;
    }
    const auto eq = line.find(" = ");
    const std::string key = line.substr(0, eq), val = line.substr(eq + 3);
    json& sec = j[section];
    if (section == "space") {
      if (key == "paths") sec[key] = split(val);
      else sec[key] = n.L;
    } else if (section == "detection" && key != "basis") {
      sec[key] = split(val);
    } else if (section == "run") {
      if (val == "true" || val == "false") {
        sec[key] = val == "true";
      } else {
        double d = 0;
        const auto r = std::from_chars(val.data(), val.data() + val.size(), d);
        const bool numeric = r.ec == std::errc() && r.ptr == val.data() + val.size();
        if (!numeric) sec[key] = val;
        else if (val.find_first_of(".eE") == std::string::npos && val.front() != '-')
          sec[key] = std::stoull(val);
        else sec[key] = d;
      }
    } else {
      sec[key] = val;
    }
  }
  return j;
}

/// Picks the front end by the first non-blank character.
inline NetlistParse parse_netlist_any(std::string_view text) {
  const auto p = text.find_first_not_of(" \t\r\n");
  if (p != std::string_view::npos && text[p] == '{') return parse_netlist_json(text);
  return parse_netlist(text);
}

}  // namespace hdcpf
