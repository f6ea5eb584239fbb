#pragma once

#include <map>
#include <string>
#include <vector>

#include "krein/discrete.hpp"
#include "krein/krein.hpp"
#include "krein/profile.hpp"
#include "krein/sakhnovich.hpp"
#include "krein/spectral.hpp"

namespace krein {

// profile text: header "# krein-profile scalar [key=value ...]" followed by
// one line per segment "start length re(value) im(value)", 17 significant
// digits; only piecewise-constant profiles serialize
std::string write_profile(const CoefficientProfile& profile,
                          const std::map<std::string, std::string>& meta = {});

struct ProfileFile {
  CoefficientProfile profile;
  std::map<std::string, std::string> meta;
};

ProfileFile read_profile(const std::string& text);

// CSV dumps; complex entries split re/im, hat values plus log_scale column
std::string write_trajectory_csv(const Trajectory& traj);
std::string write_matrix_trajectory_csv(const MatrixTrajectory& traj);
std::string write_spectral_csv(const SpectralReport& report);
std::string write_diagnostics_csv(const std::vector<DiagnosticsRow>& rows);
std::string write_poly_csv(const PolySequence& seq);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

// '#' lines are comments; first remaining line is the column header
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable read_csv_numeric(const std::string& text);

}  // namespace krein
