#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gtx/util.hpp"

namespace gtx {

struct ExperimentSpec {
  std::string command;      // convergence|transfer-grid|ablation|terrain|gradcheck|selftest
  std::string config_path;  // optional for gradcheck/selftest
  std::string out_dir;
  uint64_t seed = 0;
  bool seed_overridden = false;
  int threads = 1;
  bool resume = false;
};

// Runs one experiment command: validates the config against the command's
// schema, prepares the artifact directory (config_echo, result CSVs,
// MANIFEST, report files) and returns the process exit code.
int run_experiment(const ExperimentSpec& spec);

// Aggregates the artifact directory's CSVs into per-figure plot-data files
// and a human-readable summary. Requires MANIFEST to be present.
void emit_report(const std::string& artifact_dir);

// Published config schema for one command (or all commands when empty).
std::string schema_text(const std::string& command = "");

// gradcheck battery: (operation name, max relative error vs central
// differences), deterministic.
std::vector<std::pair<std::string, double>> gradcheck_battery();

// selftest battery: (check name, passed)
std::vector<std::pair<std::string, bool>> selftest_battery();

}  // namespace gtx
