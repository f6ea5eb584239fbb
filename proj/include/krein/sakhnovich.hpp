#pragma once

#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "krein/profile.hpp"
#include "krein/util.hpp"

namespace krein {

struct MatrixSegment {
  double start;
  double length;
  Eigen::MatrixXcd value;
};

// piecewise-constant matrix coefficient with optional smooth part; zero
// outside all segments and the smooth support
class MatrixProfile {
 public:
  explicit MatrixProfile(int m);
  MatrixProfile(int m, std::vector<MatrixSegment> segments);
  MatrixProfile(int m, std::function<Eigen::MatrixXcd(double)> smooth,
                double support_end);

  int dim() const { return m_; }
  Eigen::MatrixXcd operator()(double r) const;
  const std::vector<MatrixSegment>& segments() const { return segments_; }
  bool piecewise_constant() const { return !smooth_; }
  const std::function<Eigen::MatrixXcd(double)>& smooth_part() const {
    return smooth_;
  }
  double smooth_support_end() const { return smooth_end_; }
  double support_end() const;

 private:
  int m_;
  std::vector<MatrixSegment> segments_;
  std::function<Eigen::MatrixXcd(double)> smooth_;
  double smooth_end_ = 0.0;
};

struct SakhnovichSystem {
  int m;
  Eigen::VectorXd d;  // diagonal of D, strictly positive
  MatrixProfile a1;   // skew-Hermitian at every sampled r
  MatrixProfile a2;
};

// validates dimensions, positivity of D, skew-Hermitian A1 (segments exactly,
// smooth part by sampling)
SakhnovichSystem make_system(Eigen::VectorXd d, MatrixProfile a1,
                             MatrixProfile a2);

// m = 1, D = 1, A1 = 0, A2 = -a
SakhnovichSystem krein_embedding(const CoefficientProfile& a);

// hat values at common log_scale; true P = hat * e^{log_scale},
// true gram = hat * e^{2 log_scale}
struct MatrixState {
  double r = 0.0;
  cplx lambda{0.0, 0.0};
  Eigen::MatrixXcd p1, p2;
  Eigen::MatrixXcd gram;  // int_0^r P1* D P1
  double log_scale = 0.0;
};

struct MatrixTrajectory {
  cplx lambda{0.0, 0.0};
  const SakhnovichSystem* sys = nullptr;
  std::vector<MatrixState> checkpoints;
};

MatrixTrajectory propagate_matrix(const SakhnovichSystem& sys, cplx lambda,
                                  double r_end,
                                  const std::vector<double>& checkpoints = {});

// max over checkpoints of || P2*P2 - P1*P1 - 2 Im(lambda) gram ||_F
// normalized by 1 + ||P2||_F^2, hat frame (scale cancels)
double self_identity_residual(const MatrixTrajectory& traj);

// lockstep pair march sharing one step sequence; mixed = int P1*(l0) D P1(l),
// true value = hat * e^{scale0 + scale1}
struct PairState {
  MatrixState at_lambda0, at_lambda;
  Eigen::MatrixXcd mixed;
};

struct PairTrajectory {
  cplx lambda0{0.0, 0.0}, lambda{0.0, 0.0};
  const SakhnovichSystem* sys = nullptr;
  std::vector<PairState> checkpoints;
};

PairTrajectory propagate_pair(const SakhnovichSystem& sys, cplx lambda0,
                              cplx lambda, double r_end,
                              const std::vector<double>& checkpoints = {});

// residual matrix of the bilinear identity at one checkpoint, true frame:
// P2*(l0)P2(l) - P1*(l0)P1(l) - i(conj(l0) - l) mixed
Eigen::MatrixXcd bilinear_residual(const PairState& state, cplx lambda0,
                                   cplx lambda);

// max over checkpoints of ||residual||_F / (1 + ||P2(l0)||_F ||P2(l)||_F)
double lagrange_bilinear(const PairTrajectory& pair);

// adapter: trajectories must share system and checkpoint positions; reruns
// the march as a lockstep pair to accumulate the mixed integral
double lagrange_bilinear(const MatrixTrajectory& traj0,
                         const MatrixTrajectory& traj1);

// worst margin of 4||A2(mid)|| - d/dr log(||P1||^2 + ||P2||^2) over
// checkpoint intervals interior to one coefficient piece; >= 0 means the
// bound holds everywhere tested
double log_norm_bound_check(const MatrixTrajectory& traj);

struct PiEstimate {
  Eigen::MatrixXcd value;
  double tail_bound;  // truncation estimate, reported
};

// I + int_0^{r_end} A2 P1 = P2(r_end), with a Cauchy-Schwarz tail bound
PiEstimate pi_l2(const SakhnovichSystem& sys, cplx lambda, double r_end,
                 double tail_tol = std::numeric_limits<double>::infinity());

// i(conj(l0) - l) (Pi*(l0))^{-1} mixed(r_end); pair should carry checkpoints
// at r/4, r/2, r for the tail estimate
PiEstimate pi_via_integral(const PairTrajectory& pair,
                           const Eigen::MatrixXcd& pi_at_lambda0,
                           double tail_tol = std::numeric_limits<double>::infinity());

double frobenius(const Eigen::MatrixXcd& m);

}  // namespace krein
