#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "krein/krein.hpp"
#include "krein/profile.hpp"
#include "krein/util.hpp"

namespace krein {

struct SpectralReport {
  std::vector<double> lambda_grid;
  std::vector<double> density;  // 1/(2 pi |p*(r, lambda)|^2), positive
  double skk_value = 0.0;
  double r_used = 0.0;
};

// one propagation per grid point; parallel across lambda
SpectralReport density_at(const CoefficientProfile& profile, double r,
                          const std::vector<double>& lambda_grid,
                          RunMode mode = RunMode::parallel);

// trapezoid of |log density|/(1+lambda^2) over the report window
double skk_integral(const SpectralReport& report);

// out-of-window remainder assuming density stays near the edge values
double skk_tail_bound(const SpectralReport& report);

struct HardyResult {
  double value;                  // energy_integral / (2 Im lambda) at r_end
  double last_half_increment;    // value(r_end) - value(r_end/2)
};

HardyResult hardy_integral(const CoefficientProfile& profile, cplx lambda,
                           double r_end);

struct DiagnosticsRow {
  std::int64_t n;
  double r;
  cplx p_star;     // true value
  double modulus;  // |p_star|
  double phase;    // unwrapped arg p_star
  cplx p;          // true value
  cplx cesaro;     // (1/r) int_0^r p*
};

struct LimitDiagnostics {
  std::vector<DiagnosticsRow> rows;
  std::string classification;
};

// classification over the trailing half: modulus spread vs 1%, phase drift
// vs 0.1 rad, growth factor vs 1.5
std::string classify_sequence(const std::vector<double>& modulus,
                              const std::vector<double>& phase);

LimitDiagnostics limit_diagnostics(const CoefficientProfile& profile,
                                   cplx lambda,
                                   const std::vector<double>& checkpoint_rs);

// Cesaro average (1/r) int_0^r p*(s, lambda) ds
cplx cesaro_pi(const CoefficientProfile& profile, cplx lambda, double r_end);

// sum_{n=n_lo}^{n_hi} 1/(n log n), predicted cumulative phase
double phase_drift_model(std::int64_t n_lo, std::int64_t n_hi);

// smallest n_hi with phase_drift_model(n_lo, n_hi) >= target, or -1 if the
// search exceeds limit
std::int64_t predict_n_for_drift(std::int64_t n_lo, double target,
                                 std::int64_t limit);

struct IsometryReport {
  double norm_f;       // sqrt int |f|^2
  double norm_uf;      // sqrt int |Uf|^2 density over the window
  double defect;       // | norm_uf - norm_f | / norm_f
};

struct IsometryOptions {
  double lambda_window = 50.0;  // integrate over [-window, window]
  double lambda_step = 0.02;
  int r_nodes = 512;            // Simpson panels over [0, r_support], even
  double r_eval_margin = 10.0;  // density evaluated at r_support + margin
};

std::vector<IsometryReport> verify_isometry(
    const CoefficientProfile& profile,
    const std::vector<std::function<cplx(double)>>& test_functions,
    double r_support, const IsometryOptions& opt = {},
    RunMode mode = RunMode::parallel);

struct Thm62RunResult {
  Thm62Schedule schedule;
  LimitDiagnostics diag;        // one row per pulse index, r at pulse start
  double ratio_error_const;     // max_n |ratio_n - model_n| * n * log^2 n
  double hardy_value;           // quadrature int_0^R |p|^2 (independent route)
  double final_energy_identity; // (|p*|^2 - |p|^2)/(2 Im lambda0) at the end
  std::vector<cplx> pulse_ratios;  // p*(r_n + 2 eps_n) / p*(r_n)
};

// dedicated O(1)-per-pulse driver: closed-form gaps sized by delta_policy,
// two exact transfers per pulse, quadrature energy on the side
Thm62RunResult thm62_build_and_run(
    std::int64_t n_max, cplx lambda0,
    const std::function<double(std::int64_t)>& delta_policy = thm62_delta_default,
    double ratio_budget = 50.0);

}  // namespace krein
