#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "krein/experiments.hpp"
#include "krein/util.hpp"

namespace {

// exit codes: 0 all checks pass, 1 check or comparison failure,
// 2 invalid configuration or usage, 3 numerical fault during a run

int do_run(const std::string& config_path) {
  const auto cfg = krein::parse_config_file(config_path);
  const char* root_env = std::getenv("KREIN_LAB_OUTPUT_ROOT");
  const std::string root = root_env != nullptr ? root_env : "runs";
  const auto result = krein::run_experiment(cfg, root);
  std::printf("experiment %s -> %s\n", cfg.experiment.c_str(),
              result.run_dir.c_str());
  for (const auto& c : result.checks)
    std::printf("%s %s: %.6g (budget %.6g)%s%s\n",
                c.pass ? "PASS" : "FAIL", c.name.c_str(), c.measured,
                c.budget, c.detail.empty() ? "" : " ", c.detail.c_str());
  return result.all_pass() ? 0 : 1;
}

int do_compare(const std::string& run_dir, const std::string& golden_dir) {
  const auto outcome = krein::regression_compare(run_dir, golden_dir);
  for (const auto& note : outcome.notes)
    std::printf("%s\n", note.c_str());
  std::printf("%s\n", outcome.match ? "MATCH" : "MISMATCH");
  return outcome.match ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"canonical-system numerical laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run one experiment from a config");
  run->add_option("config", config_path, "config file path")->required();

  std::string run_dir, golden_dir;
  auto* compare =
      app.add_subcommand("compare", "compare a run against a golden dir");
  compare->add_option("run-dir", run_dir, "fresh run directory")->required();
  compare->add_option("golden-dir", golden_dir, "golden reference directory")
      ->required();

  app.add_subcommand("list-experiments", "print known experiment ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return do_run(config_path);
    if (compare->parsed()) return do_compare(run_dir, golden_dir);
    for (const auto& id : krein::known_experiments())
      std::printf("%s\n", id.c_str());
    return 0;
  } catch (const krein::NumericalFault& e) {
    std::fprintf(stderr, "numerical fault: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid config: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
