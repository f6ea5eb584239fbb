#include "krein/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace krein {

namespace {

enum class Kind { real, integer, complex_num };

struct ParamSpec {
  const char* name;
  Kind kind;
  double real_default;
  std::int64_t int_default;
  cplx cplx_default;
};

ParamSpec real_param(const char* name, double v) {
  return {name, Kind::real, v, 0, cplx()};
}
ParamSpec int_param(const char* name, std::int64_t v) {
  return {name, Kind::integer, 0.0, v, cplx()};
}
ParamSpec cplx_param(const char* name, cplx v) {
  return {name, Kind::complex_num, 0.0, 0, v};
}

// one table per experiment id; every key an experiment accepts, with its
// documented default
const std::map<std::string, std::vector<ParamSpec>>& schema() {
  static const std::map<std::string, std::vector<ParamSpec>> s = {
      {"fourier",
       {real_param("lambda_min", -10.0), real_param("lambda_max", 10.0),
        real_param("lambda_step", 0.05), real_param("r_end", 5.0),
        int_param("trials", 200), int_param("max_segments", 100),
        real_param("max_abs", 2.0), real_param("imag_min", 0.1),
        real_param("imag_max", 2.0), real_param("oracle_step", 1e-5),
        int_param("pulse_trials", 20)}},
      {"l2-decay",
       {real_param("exponent", 0.75), real_param("r_end", 200.0)}},
      {"thm61", {real_param("m_value", 1.0), int_param("pulses", 30)}},
      {"thm62",
       {int_param("n_max", 100000), cplx_param("lambda0", cplx(0.0, 1.0)),
        real_param("ratio_budget", 50.0)}},
      {"sakhnovich-demo", {int_param("trials", 50), int_param("dim", 2)}},
      {"discrete", {int_param("n_max", 10000)}},
      {"isometry",
       {real_param("window", 50.0), real_param("step", 0.02),
        int_param("r_nodes", 512)}},
      {"cesaro",
       {int_param("n_max", 10000), cplx_param("lambda0", cplx(0.0, 1.0))}},
  };
  return s;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_real(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size())
    throw std::invalid_argument("malformed number for '" + key + "': " + text);
  return v;
}

std::int64_t parse_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size())
    throw std::invalid_argument("malformed integer for '" + key +
                                "': " + text);
  return v;
}

std::uint64_t parse_seed(const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size() || t[0] == '-')
    throw std::invalid_argument("malformed seed: " + text);
  return v;
}

void format_real(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

double ExperimentConfig::real(const std::string& key) const {
  const auto it = reals.find(key);
  if (it == reals.end())
    throw std::invalid_argument("no real parameter '" + key + "'");
  return it->second;
}

std::int64_t ExperimentConfig::integer(const std::string& key) const {
  const auto it = ints.find(key);
  if (it == ints.end())
    throw std::invalid_argument("no integer parameter '" + key + "'");
  return it->second;
}

cplx ExperimentConfig::complex_value(const std::string& key) const {
  const auto it = complexes.find(key);
  if (it == complexes.end())
    throw std::invalid_argument("no complex parameter '" + key + "'");
  return it->second;
}

const std::vector<std::string>& known_experiments() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> v;
    for (const auto& entry : schema()) v.push_back(entry.first);
    return v;
  }();
  return ids;
}

cplx parse_complex(const std::string& text) {
  std::string t;
  for (char ch : text)
    if (!std::isspace(static_cast<unsigned char>(ch))) t += ch;
  if (t.empty()) throw std::invalid_argument("empty complex value");

  if (t.back() != 'i') {
    char* end = nullptr;
    const double re = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size())
      throw std::invalid_argument("malformed complex value: " + text);
    return cplx(re, 0.0);
  }

  // split "a+bi" at the sign that starts the imaginary part: last +/- not
  // directly after an exponent marker and not leading
  t.pop_back();
  std::size_t split = std::string::npos;
  for (std::size_t k = t.size(); k-- > 1;) {
    if ((t[k] == '+' || t[k] == '-') && t[k - 1] != 'e' && t[k - 1] != 'E') {
      split = k;
      break;
    }
  }
  std::string re_part, im_part;
  if (split == std::string::npos) {
    re_part = "0";
    im_part = t;
  } else {
    re_part = t.substr(0, split);
    im_part = t.substr(split);
  }
  if (im_part.empty() || im_part == "+") im_part = "1";
  if (im_part == "-") im_part = "-1";

  char* end = nullptr;
  const double re = std::strtod(re_part.c_str(), &end);
  if (re_part.empty() || end != re_part.c_str() + re_part.size())
    throw std::invalid_argument("malformed complex value: " + text);
  const double im = std::strtod(im_part.c_str(), &end);
  if (end != im_part.c_str() + im_part.size())
    throw std::invalid_argument("malformed complex value: " + text);
  return cplx(re, im);
}

ExperimentConfig parse_config(const std::string& text) {
  // pass 1: collect key/value pairs in order, find the experiment id
  std::vector<std::pair<std::string, std::string>> pairs;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("expected key = value, got: " + stripped);
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("empty key in: " + stripped);
    pairs.emplace_back(key, value);
  }

  ExperimentConfig cfg;
  for (const auto& [key, value] : pairs)
    if (key == "experiment") cfg.experiment = value;
  if (cfg.experiment.empty())
    throw std::invalid_argument("config is missing the experiment id");
  const auto table = schema().find(cfg.experiment);
  if (table == schema().end())
    throw std::invalid_argument("unknown experiment: " + cfg.experiment);

  // defaults first, then overrides in file order (last duplicate wins)
  cfg.out_dir = cfg.experiment;
  for (const ParamSpec& p : table->second) {
    switch (p.kind) {
      case Kind::real: cfg.reals[p.name] = p.real_default; break;
      case Kind::integer: cfg.ints[p.name] = p.int_default; break;
      case Kind::complex_num: cfg.complexes[p.name] = p.cplx_default; break;
    }
  }
  for (const auto& [key, value] : pairs) {
    if (key == "experiment") continue;
    if (key == "seed") {
      cfg.seed = parse_seed(value);
      continue;
    }
    if (key == "out_dir") {
      if (value.empty()) throw std::invalid_argument("empty out_dir");
      cfg.out_dir = value;
      continue;
    }
    const ParamSpec* spec = nullptr;
    for (const ParamSpec& p : table->second)
      if (key == p.name) spec = &p;
    if (spec == nullptr)
      throw std::invalid_argument("unknown key '" + key +
                                  "' for experiment " + cfg.experiment);
    switch (spec->kind) {
      case Kind::real: cfg.reals[key] = parse_real(key, value); break;
      case Kind::integer: cfg.ints[key] = parse_int(key, value); break;
      case Kind::complex_num: cfg.complexes[key] = parse_complex(value); break;
    }
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string resolved_text(const ExperimentConfig& config) {
  std::string out;
  out += "experiment = " + config.experiment + "\n";
  out += "seed = " + std::to_string(config.seed) + "\n";
  out += "out_dir = " + config.out_dir + "\n";
  // maps iterate in key order, so the dump is stable
  for (const auto& [key, v] : config.ints)
    out += key + " = " + std::to_string(v) + "\n";
  for (const auto& [key, v] : config.reals) {
    out += key + " = ";
    format_real(out, v);
    out += "\n";
  }
  for (const auto& [key, v] : config.complexes) {
    out += key + " = ";
    format_real(out, v.real());
    out += v.imag() < 0 ? "" : "+";
    format_real(out, v.imag());
    out += "i\n";
  }
  return out;
}

}  // namespace krein
