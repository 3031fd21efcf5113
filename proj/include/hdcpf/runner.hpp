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

// Executes a validated netlist and renders the result. Output is a pure
// function of the netlist: keys sorted, floats rounded to 12 digits.

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "hdcpf/netlist.hpp"
#include "hdcpf/netlist_json.hpp"

namespace hdcpf {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunResult {
  std::string experiment;
  nlohmann::json json;  // full result, provenance included
  std::string csv;      // experiment-specific table
  bool ok = true;       // false when a check inside the run failed (transcript)
};

namespace runner_detail {

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline nlohmann::json distribution_json(const Distribution& d) {
  nlohmann::json j = nlohmann::json::object();
  // numerical dust below 1e-15 prints as 0
  for (const auto& [k, p] : d) j[k] = std::abs(p) < 1e-15 ? 0.0 : round12(p);
  return j;
}

// analytic runs have no tallies
inline nlohmann::json tallies_json(const Counts& c, std::uint64_t shots) {
  return shots == 0 ? nlohmann::json::object() : nlohmann::json(c);
}

inline std::string distribution_csv(const Distribution& d, const Counts& c) {
  std::string s = "outcome,probability,count\n";
  for (const auto& [k, p] : d) {
    auto it = c.find(k);
    s += k + "," + fmt12(p) + "," + (it == c.end() ? std::string() : std::to_string(it->second)) + "\n";
  }
  return s;
}

inline Conventions conventions_of(const Netlist& n, const std::filesystem::path& base) {
  if (n.run.conventions.empty()) return {};
  return load_conventions((base / n.run.conventions).string());
}

inline SinglePhotonState source_state(const SourceSpec& s, const SpacePtr& space, const Conventions& conv) {
  if (s.recipe == "aux") return prepare_auxiliary(space, s.path, conv);
  if (!s.recipe.empty()) return prepare_input(s.recipe, space, s.path, conv).state;
  SinglePhotonState st(space);
  for (const auto& [m, a] : s.ket) st.add(m, a);
  return st.normalized();
}

inline const CpfD4Pipeline& pipeline_for(const Conventions& conv, AuxMode aux,
                                         std::unique_ptr<CpfD4Pipeline>& own) {
  if (conv == Conventions{} && aux == AuxMode::Prestage) return default_pipeline();
  own = std::make_unique<CpfD4Pipeline>(conv, aux);
  return *own;
}

inline NoiseSpec noise_of(const Netlist& n) {
  NoiseSpec s = n.run.noise;
  s.seed = n.run.seed;
  return s;
}

inline std::uint64_t shots_of(const Netlist& n) { return n.run.analytic ? 0 : n.run.shots; }

// --------------------------------------------------------------- experiments

inline void run_circuit(const Netlist& n, const std::filesystem::path& base, RunResult& r) {
  const auto conv = conventions_of(n, base);
  const auto space = make_space(n.paths, n.L);
  std::vector<SinglePhotonState> photons;
  for (const auto& s : n.sources) photons.push_back(source_state(s, space, conv));
  MultiPhotonState state = inject_product(std::span<const SinglePhotonState>(photons));
  const auto chain = n.chain();
  if (!chain.empty()) state = apply_transform(steps_transform(chain, space, conv), state);

  double kept = 1.0;
  if (!n.detection.pattern.empty()) {
    DetectionPattern p;
    for (const auto& [det, c] : n.detection.pattern) p.required[det] = c;
    p.aliases = n.detection.aliases;
    const auto ps = post_select(state, p);
    kept = ps.probability;
    state = ps.state;
  }
  Resolution res;
  for (const auto& path : n.paths) {
    auto it = n.detection.analyzers.find(path);
    res.local[path] = it == n.detection.analyzers.end() ? Analyzer::HV : it->second;
  }
  const auto dist = outcome_distribution(state, res);
  const auto counts = shots_of(n) == 0 ? Counts{} : sample_counts(dist, shots_of(n), n.run.seed, stream_id("circuit"));
  r.json["post_selection_probability"] = round12(kept);
  r.json["distribution"] = distribution_json(dist);
  r.json["tallies"] = tallies_json(counts, shots_of(n));
  r.csv = distribution_csv(dist, counts);
}

inline void run_cpf(const Netlist& n, const std::filesystem::path& base, RunResult& r) {
  const auto conv = conventions_of(n, base);
  std::unique_ptr<CpfD4Pipeline> own;
  const auto& pipe = pipeline_for(conv, n.run.aux == "direct" ? AuxMode::Direct : AuxMode::Prestage, own);
  Eigen::VectorXcd v[2];
  int k = 0;
  for (const char* id : {"1", "4"}) {
    const auto& s = *std::find_if(n.sources.begin(), n.sources.end(), [&](const SourceSpec& x) { return x.id == id; });
    const auto space = make_space({s.path}, std::max(n.L, kD4Truncation));
    SourceSpec copy = s;
    v[k++] = encode_photon(source_state(copy, space, conv));
  }
  const auto psi = QuditState::product(v[0], v[1]).normalized();
  const auto noise = noise_of(n);
  const auto res = pipe.run(psi, n.detection.accept, noise);

  const auto U = cpf_oracle(kD4);
  const Eigen::VectorXcd target = U * psi.amps();
  r.json["heralding_probability"] = round12(res.probability);
  r.json["fidelity"] = round12((target.adjoint() * res.rho * target)(0, 0).real());
  r.json["purity"] = round12(res.purity());

  // per Bell outcome, optionally resolved in a product basis
  std::map<std::string, double> by_outcome;
  Distribution dist;
  const BasisTable* table = nullptr;
  BasisTable t;
  if (!n.detection.basis.empty()) {
    t = basis_table(n.detection.basis);
    table = &t;
  }
  for (const auto& b : res.branches) {
    by_outcome[to_string(b.outcome)] += b.probability;
    if (table) {
      const Eigen::VectorXd p = outcome_probabilities(b.rho, *table);
      for (Eigen::Index i = 0; i < p.size(); ++i)
        dist[std::string(to_string(b.outcome)) + "|" + table->entries[static_cast<std::size_t>(i)].label()] +=
            b.probability * p(i);
    } else {
      dist[to_string(b.outcome)] += b.probability;
    }
  }
  dist["none"] = std::max(0.0, 1.0 - res.probability);
  nlohmann::json bo = nlohmann::json::object();
  for (const auto& [k2, p] : by_outcome) bo[k2] = round12(p);
  r.json["branches"] = bo;
  r.json["distribution"] = distribution_json(dist);
  const auto counts = shots_of(n) == 0 ? Counts{} : sample_counts(dist, shots_of(n), n.run.seed, stream_id("cpf_d4"));
  r.json["tallies"] = tallies_json(counts, shots_of(n));
  r.csv = distribution_csv(dist, counts);
}

inline void run_fidelity(const Netlist& n, const std::filesystem::path& base, RunResult& r) {
  const auto conv = conventions_of(n, base);
  std::unique_ptr<CpfD4Pipeline> own;
  const auto& pipe = pipeline_for(conv, n.run.aux == "direct" ? AuxMode::Direct : AuxMode::Prestage, own);
  const auto noise = noise_of(n);
  const auto rep = run_fidelity_experiment(shots_of(n), noise, pipe);
  r.json["report"] = to_json(rep);
  r.json["process_fidelity"] = round12(process_fidelity(noise, pipe));
  std::string zx = basis_run_csv(rep.zx, zx_table());
  std::string xz = basis_run_csv(rep.xz, xz_table());
  r.csv = zx + xz.substr(xz.find('\n') + 1);
}

inline void run_suite(const Netlist& n, const std::filesystem::path& base, RunResult& r) {
  const auto conv = conventions_of(n, base);
  std::unique_ptr<CpfD4Pipeline> own;
  const auto& pipe = pipeline_for(conv, n.run.aux == "direct" ? AuxMode::Direct : AuxMode::Prestage, own);
  const auto s = superposition_suite(shots_of(n), noise_of(n), pipe);
  r.json["suite"] = to_json(s);
  r.csv = "index,label,fidelity,heralding\n";
  for (const auto& e : s)
    r.csv += std::to_string(e.index) + "," + e.label + "," + fmt12(e.fidelity) + "," + fmt12(e.heralding) + "\n";
}

inline void run_lock(const Netlist& n, RunResult& r) {
  LockRun run = n.run.lock_run;
  run.seed = n.run.seed;
  const auto tr = simulate_lock(n.run.lock, n.run.drift, n.run.pid, run);
  r.json["gain"] = round12(tr.gain);
  r.json["rms_open"] = round12(tr.rms_open);
  r.json["rms_closed"] = round12(tr.rms_closed);
  r.json["diverged"] = tr.diverged;
  r.json["samples"] = tr.t.size();
  r.csv = lock_trace_csv(tr);
}

inline void run_transcript(const Netlist& n, const std::filesystem::path& base, RunResult& r) {
  const auto conv = conventions_of(n, base);
  const auto space = make_space(n.paths, n.L);
  const auto golden = load_golden((base / n.run.golden).string());
  const auto steps = n.chain();
  const auto rep = transcript_check(steps, space, conv, golden);
  r.ok = rep.ok;
  r.json["ok"] = rep.ok;
  r.json["steps_checked"] = rep.steps_checked;
  r.json["lines_checked"] = rep.lines_checked;
  r.json["first_divergence"] = rep.first_divergence;
  r.json["detail"] = rep.detail;
  r.csv = std::string("ok,steps_checked,lines_checked,first_divergence\n") + (rep.ok ? "true" : "false") + "," +
          std::to_string(rep.steps_checked) + "," + std::to_string(rep.lines_checked) + "," +
          rep.first_divergence + "\n";
}

}  // namespace runner_detail

/// Runs the netlist. `base` resolves relative file references.
inline RunResult execute(const Netlist& n, const std::filesystem::path& base = ".") {
  using namespace runner_detail;
  RunResult r;
  r.experiment = n.run.experiment;
  r.json = nlohmann::json::object();
  const auto& e = n.run.experiment;
  if (e == "circuit") run_circuit(n, base, r);
  else if (e == "cpf_d4") run_cpf(n, base, r);
  else if (e == "fidelity") run_fidelity(n, base, r);
  else if (e == "suite") run_suite(n, base, r);
  else if (e == "lock") run_lock(n, r);
  else if (e == "transcript") run_transcript(n, base, r);
  else throw InvalidParameter("unknown experiment '" + e + "'");
  r.json["experiment"] = n.run.experiment;
  r.json["mode"] = n.run.analytic ? "analytic" : "shots";
  r.json["provenance"] = {{"netlist_hash", hex64(stream_id(serialize_netlist(n)))},
                          {"seed", n.run.seed},
                          {"shots", shots_of(n)},
                          {"tool_version", kToolVersion}};
  return r;
}

enum class Format { Json, Csv };

inline std::string emit(const RunResult& r, Format f) {
  if (f == Format::Csv) return r.csv;
  return r.json.dump(2) + "\n";
}

/// Writes `text` to `path`, creating parent directories.
inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace hdcpf
