#include "krein/serialize.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace krein {

namespace {

void put(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void put_cell(std::string& out, double v) {
  out += ',';
  put(out, v);
}

void put_complex_header(std::string& out, cplx v) {
  put(out, v.real());
  out += v.imag() < 0 ? "" : "+";
  put(out, v.imag());
  out += 'i';
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

double parse_cell(const std::string& text, std::size_t row) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size())
    throw std::invalid_argument("non-numeric csv cell at data row " +
                                std::to_string(row) + ": " + text);
  return v;
}

}  // namespace

std::string write_profile(const CoefficientProfile& profile,
                          const std::map<std::string, std::string>& meta) {
  if (!profile.piecewise_constant())
    throw std::invalid_argument(
        "profiles with a smooth part do not serialize");
  std::string out = "# krein-profile scalar";
  for (const auto& [key, value] : meta) {
    if (key.find_first_of(" =\n") != std::string::npos ||
        value.find_first_of(" \n") != std::string::npos)
      throw std::invalid_argument("profile metadata must be token=token");
    out += ' ';
    out += key;
    out += '=';
    out += value;
  }
  out += '\n';
  for (const PulseSegment& s : profile.segments()) {
    put(out, s.start);
    out += ' ';
    put(out, s.length);
    out += ' ';
    put(out, s.value.real());
    out += ' ';
    put(out, s.value.imag());
    out += '\n';
  }
  return out;
}

ProfileFile read_profile(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("empty profile text");
  std::istringstream head(line);
  std::string hash, tag, kind;
  head >> hash >> tag >> kind;
  if (hash != "#" || tag != "krein-profile")
    throw std::invalid_argument("missing profile header: " + line);
  if (kind != "scalar")
    throw std::invalid_argument("unsupported profile kind: " + kind);

  ProfileFile out;
  std::string token;
  while (head >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("malformed profile metadata: " + token);
    out.meta[token.substr(0, eq)] = token.substr(eq + 1);
  }

  std::vector<PulseSegment> segments;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    double start = 0.0, length = 0.0, re = 0.0, im = 0.0;
    if (!(row >> start >> length >> re >> im))
      throw std::invalid_argument("malformed segment line: " + line);
    std::string extra;
    if (row >> extra)
      throw std::invalid_argument("trailing tokens on segment line: " + line);
    segments.push_back(make_segment(start, length, cplx(re, im)));
  }
  out.profile = CoefficientProfile(std::move(segments));
  return out;
}

std::string write_trajectory_csv(const Trajectory& traj) {
  std::string out = "# lambda = ";
  put_complex_header(out, traj.lambda);
  out += "\nr,p_re,p_im,p_star_re,p_star_im,log_scale,energy_integral\n";
  for (const KreinState& s : traj.checkpoints) {
    put(out, s.r);
    put_cell(out, s.p.real());
    put_cell(out, s.p.imag());
    put_cell(out, s.p_star.real());
    put_cell(out, s.p_star.imag());
    put_cell(out, s.log_scale);
    put_cell(out, s.energy_integral);
    out += '\n';
  }
  return out;
}

std::string write_matrix_trajectory_csv(const MatrixTrajectory& traj) {
  const auto m = traj.checkpoints.empty()
                     ? Eigen::Index(0)
                     : traj.checkpoints.front().p1.rows();
  std::string out = "# m = " + std::to_string(m) + " lambda = ";
  put_complex_header(out, traj.lambda);
  out += "\nr";
  for (const char* block : {"p1", "p2", "gram"})
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        const std::string cell =
            std::string(block) + '_' + std::to_string(i) + std::to_string(j);
        out += ',' + cell + "_re," + cell + "_im";
      }
  out += ",log_scale\n";
  for (const MatrixState& s : traj.checkpoints) {
    put(out, s.r);
    for (const Eigen::MatrixXcd* block : {&s.p1, &s.p2, &s.gram})
      for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) {
          put_cell(out, (*block)(i, j).real());
          put_cell(out, (*block)(i, j).imag());
        }
    put_cell(out, s.log_scale);
    out += '\n';
  }
  return out;
}

std::string write_spectral_csv(const SpectralReport& report) {
  std::string out = "lambda,density\n";
  for (std::size_t i = 0; i < report.lambda_grid.size(); ++i) {
    put(out, report.lambda_grid[i]);
    put_cell(out, report.density[i]);
    out += '\n';
  }
  return out;
}

std::string write_diagnostics_csv(const std::vector<DiagnosticsRow>& rows) {
  std::string out =
      "n,r,p_star_re,p_star_im,modulus,phase,p_re,p_im,cesaro_re,cesaro_im\n";
  for (const DiagnosticsRow& row : rows) {
    out += std::to_string(row.n);
    put_cell(out, row.r);
    put_cell(out, row.p_star.real());
    put_cell(out, row.p_star.imag());
    put_cell(out, row.modulus);
    put_cell(out, row.phase);
    put_cell(out, row.p.real());
    put_cell(out, row.p.imag());
    put_cell(out, row.cesaro.real());
    put_cell(out, row.cesaro.imag());
    out += '\n';
  }
  return out;
}

std::string write_poly_csv(const PolySequence& seq) {
  std::string out = "# z = ";
  put_complex_header(out, seq.z);
  out += "\nn,phi_re,phi_im,phi_star_re,phi_star_im,sum_sq,log_scale\n";
  for (const PolyPoint& pt : seq.points) {
    out += std::to_string(pt.n);
    put_cell(out, pt.phi.real());
    put_cell(out, pt.phi.imag());
    put_cell(out, pt.phi_star.real());
    put_cell(out, pt.phi_star.imag());
    put_cell(out, pt.sum_sq);
    put_cell(out, pt.log_scale);
    out += '\n';
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

CsvTable read_csv_numeric(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!have_header) {
      table.header = split(line, ',');
      have_header = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != table.header.size())
      throw std::invalid_argument("csv row width mismatch: " + line);
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& cell : cells)
      row.push_back(parse_cell(cell, table.rows.size()));
    table.rows.push_back(std::move(row));
  }
  if (!have_header) throw std::invalid_argument("csv has no header row");
  return table;
}

}  // namespace krein
