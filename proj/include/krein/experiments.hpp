#pragma once

#include <string>
#include <vector>

#include "krein/config.hpp"

namespace krein {

// one measured quantity against its budget; informational entries carry an
// infinite budget and always pass
struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double budget = 0.0;
  std::string detail;
};

struct ExperimentResult {
  std::string run_dir;  // directory the artifacts were written to
  std::vector<CheckResult> checks;
  bool all_pass() const;
};

// runs config.experiment into <output_root>/<config.out_dir>/, writing CSV
// artifacts, resolved_config.txt, and summary.json; deterministic for a
// fixed config and seed
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::string& output_root);

struct CompareOutcome {
  bool match = true;
  std::vector<std::string> notes;  // per-file verdicts and diffs
};

// golden_dir defines the contract: every file there must exist in run_dir
// and agree, CSVs numerically per column (tolerances from the optional
// golden-side compare_tolerances.txt: "<file> <column|*> <abs-tol>" lines,
// default exact), other files byte for byte
CompareOutcome regression_compare(const std::string& run_dir,
                                  const std::string& golden_dir);

}  // namespace krein
