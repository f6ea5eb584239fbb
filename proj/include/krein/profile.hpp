#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "krein/util.hpp"

namespace krein {

// one constant piece of the coefficient a(r); mass = value * length kept
// explicitly so narrow high pulses never evaluate amplitude against width
struct PulseSegment {
  double start = 0.0;
  double length = 0.0;  // > 0
  cplx value{0.0, 0.0};
  cplx mass{0.0, 0.0};
};

PulseSegment make_segment(double start, double length, cplx value);

// coefficient a(r) on [0, inf): sorted non-overlapping constant segments
// (zero on gaps) plus an optional smooth additive part
class CoefficientProfile {
 public:
  CoefficientProfile() = default;
  explicit CoefficientProfile(std::vector<PulseSegment> segments);
  CoefficientProfile(std::vector<PulseSegment> segments,
                     std::function<cplx(double)> smooth, double smooth_bound,
                     double smooth_support_end);

  cplx operator()(double r) const;

  const std::vector<PulseSegment>& segments() const { return segments_; }
  bool piecewise_constant() const { return !smooth_; }
  const std::function<cplx(double)>& smooth_part() const { return smooth_; }
  // declared bound on |smooth| per unit interval (0 when absent)
  double smooth_bound() const { return smooth_bound_; }
  double smooth_support_end() const { return smooth_support_end_; }
  // end of the last segment or of the smooth support
  double support_end() const;
  bool real_valued() const;

  // exact integral of a over [r_lo, r_hi] for the segment part,
  // plus adaptive quadrature for the smooth part
  cplx integral(double r_lo, double r_hi) const;

 private:
  std::vector<PulseSegment> segments_;
  std::function<cplx(double)> smooth_;
  double smooth_bound_ = 0.0;
  double smooth_support_end_ = 0.0;
};

enum class BumpKind { two_step, smooth_mollified };

// unit bump b on [0,1] with zero total integral and positive half integral
struct BumpProfile {
  std::vector<PulseSegment> steps;  // step representation (two_step)
  std::vector<double> samples;      // uniform samples on [0,1] (mollified)
  double integral_total = 0.0;
  double integral_half = 0.0;
  bool is_step() const { return samples.empty(); }
  double eval(double x) const;
};

BumpProfile make_bump(BumpKind kind, int sample_count = 10001);

// amplitude law for the single-bump blow-up pulse family
struct AmpMode {
  enum Kind { logloginverse, fixed_m } kind = logloginverse;
  double m = 1.0;  // used by fixed_m
  static AmpMode LogLogInverse() { return {logloginverse, 0.0}; }
  static AmpMode FixedM(double m) { return {fixed_m, m}; }
};

// pulse a(r) = -amp * b(r/eps) on [0, eps];
// amp = log|log eps|/eps or M/eps depending on mode
CoefficientProfile lemma61_pulse(const BumpProfile& b, double eps,
                                 AmpMode mode);

// pulse train: one scaled two-step bump of width 2^-n at r = n, n = 3..n_max;
// half-pulse mass is log(n)/2 in logloginverse mode and M/2 in fixed mode
CoefficientProfile thm61_profile(int n_max, AmpMode mode);

// two constant segments of length eps: value -b then conj(xi)*b, |xi| = 1
CoefficientProfile thm62_pulse(double b_amp, cplx xi, double eps,
                               double start = 0.0);

struct Thm62Params {
  double eps;  // 1/log^2 n
  double b;    // log^2 n / sqrt(n)
  cplx xi;     // unit modulus, |1 - xi| = 1/log n, Im xi > 0
};

Thm62Params thm62_schedule_params(int n);

// smallness target for |p/p_star| ahead of pulse n
double thm62_delta_default(int n);

// per-pulse data of a realized slow-phase-drift run; r strictly increasing
struct Thm62Schedule {
  int n_min = 3;
  int n_max = 0;
  std::vector<double> eps, b, r, delta;
  std::vector<cplx> xi;
};

struct LpNorm {
  double value = 0.0;       // integral of |a|^p (the p-th power of the norm)
  bool exact = true;        // segment sum (false: quadrature estimate)
  bool divergent = false;   // tail ratio test says the family is not in L^p
};

// exact per-segment sum of |a|^p; smooth profiles get a quadrature estimate.
// Divergence is a Raabe-type test on trailing per-pulse terms: reliable for
// the provided pulse families, heuristic near the p = 2 boundary.
LpNorm lp_norm(const CoefficientProfile& profile, double p);

}  // namespace krein
