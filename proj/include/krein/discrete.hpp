#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "krein/profile.hpp"
#include "krein/util.hpp"

namespace krein {

// Verblunsky coefficient sequence; square_summable is the analytic tag of
// the family, not a measured property
struct VerblunskySeq {
  std::function<cplx(std::int64_t)> a;
  bool square_summable = true;
  std::string name;
};

VerblunskySeq verblunsky_zero();
VerblunskySeq verblunsky_geometric(cplx a0, double q);
// scale/(n+2)^s; square-summable iff s > 1/2
VerblunskySeq verblunsky_power(double s, double scale = 1.0);
// e^{i theta_n}/(n+2)^s with slowly drifting theta_n = log(n+2)
VerblunskySeq verblunsky_phase_drift(double s = 0.5);

struct PolyPair {
  std::int64_t n = 0;
  cplx z{0.0, 0.0};
  cplx phi{1.0, 0.0};
  cplx phi_star{1.0, 0.0};
};

// one Szego recursion step phi_{n+1} = (1-|a|^2)^{-1/2}(z phi - conj(a) phi*)
PolyPair szego_step(const PolyPair& pair, cplx a_n);

// hat values at common log_scale; sum_sq = sum_{k<n} |phi_k|^2 (hat frame)
struct PolyPoint {
  std::int64_t n;
  cplx phi, phi_star;
  double sum_sq;
  double log_scale;
};

struct PolySequence {
  cplx z{0.0, 0.0};
  std::vector<PolyPoint> points;  // n = 0, stride, 2*stride, ..., n_steps
};

PolySequence evaluate_polys(const VerblunskySeq& seq, cplx z,
                            std::int64_t n_steps, std::int64_t stride = 1);

// max over recorded points of the Christoffel-Darboux energy residual
// | |phi*|^2 - |phi|^2 - (1-|z|^2) sum | / (1 + |phi*|^2), hat frame
double discrete_energy_check(const PolySequence& seq);

struct AnalogyRow {
  std::string side;            // "continuous" | "discrete"
  std::string label;
  std::string classification;
  double energy_residual;
  double limit_modulus;        // |p*| resp. |phi*| at the final checkpoint
};

struct AnalogyParams {
  cplx lambda{0.0, 1.0};
  cplx z{0.5, 0.0};
  double r_end = 100.0;
  std::int64_t n_steps = 10000;
};

std::vector<AnalogyRow> analogy_table(const CoefficientProfile& profile,
                                      const VerblunskySeq& seq,
                                      const AnalogyParams& params);

}  // namespace krein
