#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "krein/util.hpp"

namespace krein {

// fallback master seed for randomized suites; any run can override it
inline constexpr std::uint64_t kDefaultSeed = 812396817347ULL;

// fully resolved run description: experiment id plus every tunable,
// defaults filled in, so the same struct can be archived for provenance
struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = kDefaultSeed;
  std::string out_dir;  // run directory name, defaults to the experiment id

  std::map<std::string, double> reals;
  std::map<std::string, std::int64_t> ints;
  std::map<std::string, cplx> complexes;

  double real(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  cplx complex_value(const std::string& key) const;
};

const std::vector<std::string>& known_experiments();

// "a+bi" with a mandatory trailing i, or a bare real
cplx parse_complex(const std::string& text);

// line-oriented "key = value"; '#' starts a comment; keys outside the
// experiment's table are rejected
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// canonical key = value text of a resolved config, stable ordering
std::string resolved_text(const ExperimentConfig& config);

}  // namespace krein
