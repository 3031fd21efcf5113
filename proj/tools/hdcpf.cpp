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

// hdcpf: command-line front end.
//
//   hdcpf simulate|fidelity|lock|transcript|validate --netlist FILE
//         [--shots N] [--seed S] [--out PATH] [--format json|csv] [--analytic]
//
// The netlist may be the line form or its JSON form.
//
// Exit codes: 0 success, 1 diagnostics (or a failed transcript), 2 runtime
// error. HDCPF_OUT_DIR, when set, receives <experiment>.<format> if --out is
// not given; otherwise results go to stdout.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "hdcpf/runner.hpp"

namespace {

struct Options {
  std::string netlist;
  std::optional<std::uint64_t> shots, seed;
  std::string out;
  std::string format = "json";
  bool analytic = false;
};

int run(const std::string& cmd, const Options& o) {
  using namespace hdcpf;
  std::ifstream in(o.netlist, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read " << o.netlist << "\n";
    return 2;
  }
  std::stringstream buf;
  buf << in.rdbuf();
  auto parsed = parse_netlist_any(buf.str());
  if (!parsed.netlist) {
    for (const auto& d : parsed.diagnostics) std::cerr << d.to_string(o.netlist) << "\n";
    return 1;
  }
  Netlist n = std::move(*parsed.netlist);
  if (cmd == "validate") {
    std::cout << o.netlist << ": ok (" << n.run.experiment << ")\n";
    return 0;
  }
  if (cmd == "fidelity" || cmd == "lock" || cmd == "transcript") n.run.experiment = cmd;
  if (o.shots) {
    n.run.shots = *o.shots;
    n.run.analytic = *o.shots == 0;
  }
  if (o.seed) n.run.seed = *o.seed;
  if (o.analytic) n.run.analytic = true;
  // overrides can break what validation checked
  if (auto again = validate_netlist(n); !again.empty()) {
    for (const auto& d : again) std::cerr << d.to_string(o.netlist) << "\n";
    return 1;
  }

  const auto base = std::filesystem::path(o.netlist).parent_path();
  const auto result = execute(n, base.empty() ? std::filesystem::path(".") : base);
  const auto text = emit(result, o.format == "csv" ? Format::Csv : Format::Json);
  std::filesystem::path target = o.out;
  if (target.empty()) {
    if (const char* dir = std::getenv("HDCPF_OUT_DIR"); dir && *dir)
      target = std::filesystem::path(dir) / (result.experiment + "." + o.format);
  }
  if (target.empty()) std::cout << text;
  else write_file(target, text);
  if (!result.ok) {
    std::cerr << "check failed: " << result.json.value("first_divergence", std::string()) << " "
              << result.json.value("detail", std::string()) << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heralded high-dimensional CPF gate simulator"};
  app.require_subcommand(1);
  Options o;
  const char* names[][2] = {{"simulate", "Run the experiment the netlist describes"},
                            {"fidelity", "ZX/XZ fidelities, bounds and process fidelity"},
                            {"lock", "Phase-lock simulation"},
                            {"transcript", "Check an element chain against a golden transcript"},
                            {"validate", "Parse and validate only"}};
  for (const auto& [name, help] : names) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--netlist", o.netlist, "Netlist file")->required()->check(CLI::ExistingFile);
    if (std::string(name) == "validate") continue;
    sub->add_option("--shots", o.shots, "Shots; 0 selects analytic mode");
    sub->add_option("--seed", o.seed, "Seed");
    sub->add_option("--out", o.out, "Output file (default stdout)");
    sub->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    sub->add_flag("--analytic", o.analytic, "Exact probabilities, no sampling");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    return run(app.get_subcommands().front()->get_name(), o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
