#pragma once

#include <vector>

#include "krein/profile.hpp"
#include "krein/util.hpp"

namespace krein {

// state of the scalar canonical pair at position r, stored renormalized:
// true p = p_hat * e^{log_scale}, true energy = energy_hat * e^{2 log_scale};
// energy_integral = 2 Im(lambda) * int_0^r |p|^2 ds in the scaled frame, so
// |p_star|^2 - |p|^2 = energy_integral holds per checkpoint (exact arithmetic)
struct KreinState {
  double r = 0.0;
  cplx lambda{0.0, 0.0};
  cplx p{1.0, 0.0};
  cplx p_star{1.0, 0.0};
  double log_scale = 0.0;
  double energy_integral = 0.0;
  // side accumulators (same scaled frame, linear in the state):
  cplx cesaro_integral{0.0, 0.0};  // int_0^r p_star ds
  cplx pi_integral{0.0, 0.0};      // int_0^r a p ds
};

// exact propagator of (p, p_star) across one constant segment, stored as
// entries * e^{segment_log_scale}; det satisfies
// det * e^{2 segment_log_scale} = e^{i lambda delta}
struct TransferMatrix2 {
  cplx a11{1.0, 0.0}, a12{0.0, 0.0}, a21{0.0, 0.0}, a22{1.0, 0.0};
  double segment_log_scale = 0.0;
};

TransferMatrix2 constant_transfer(cplx c, cplx lambda, double delta);

// int_0^delta exp(A s) ds for the same generator, row-major 2x2;
// feeds the segment-exact running integrals of p and p_star
struct SegmentIntegral2 {
  cplx g11, g12, g21, g22;
};

SegmentIntegral2 constant_segment_integral(cplx c, cplx lambda, double delta);

struct Trajectory {
  cplx lambda{0.0, 0.0};
  const CoefficientProfile* profile = nullptr;
  std::vector<KreinState> checkpoints;  // strictly increasing r; last = r_end
};

Trajectory propagate(const CoefficientProfile& profile, cplx lambda,
                     double r_end, const std::vector<double>& checkpoints = {});

// same march, arbitrary initial state (state.r is the start position)
Trajectory propagate_from(KreinState state, const CoefficientProfile& profile,
                          double r_end,
                          const std::vector<double>& checkpoints = {});

// closed form for real-valued coefficients at lambda = 0 from initial
// values (c, c_star); returns (q(r), q_star(r))
std::pair<cplx, cplx> q_propagate(const CoefficientProfile& profile, cplx c,
                                  cplx c_star, double r);

// max over checkpoints of |(|p*|^2 - |p|^2) - energy| / (1 + |p*|^2),
// evaluated in each checkpoint's scaled frame
double lagrange_residual(const Trajectory& traj);

// fixed-step 4th-order reference integrator, steps aligned to segment
// boundaries, energy and side integrals by quadrature; no renormalization
KreinState rk_oracle(const CoefficientProfile& profile, cplx lambda,
                     double r_end, double step);

struct AdaptiveOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
  double max_step = 1.0;
};

}  // namespace krein
