#include "doctest.h"

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/MatrixFunctions>

#include "krein/krein.hpp"
#include "krein/profile.hpp"

using krein::CoefficientProfile;
using krein::cplx;
using krein::KreinState;
using krein::PulseSegment;

namespace {

// reference transfer by dense matrix exponential, no scaling tricks
Eigen::Matrix2cd expm_transfer(cplx c, cplx lambda, double delta) {
  Eigen::Matrix2cd a;
  a(0, 0) = cplx(0.0, 1.0) * lambda;
  a(0, 1) = -std::conj(c);
  a(1, 0) = -c;
  a(1, 1) = cplx(0.0, 0.0);
  Eigen::Matrix2cd ad = a * delta;
  return ad.exp();
}

CoefficientProfile three_segments() {
  std::vector<PulseSegment> segs;
  segs.push_back(krein::make_segment(0.0, 1.2, cplx(0.8, -0.3)));
  segs.push_back(krein::make_segment(1.5, 0.7, cplx(-1.1, 0.6)));
  segs.push_back(krein::make_segment(2.2, 1.0, cplx(0.4, 0.4)));
  return CoefficientProfile(std::move(segs));
}

}  // namespace

TEST_CASE("constant_transfer: zero coefficient is exact") {
  const cplx lambda(0.7, 0.4);
  const auto t = krein::constant_transfer(cplx(0.0, 0.0), lambda, 2.5);
  CHECK(t.a12 == cplx(0.0, 0.0));
  CHECK(t.a21 == cplx(0.0, 0.0));
  CHECK(t.a22 == cplx(1.0, 0.0));
  CHECK(t.segment_log_scale == 0.0);
  const cplx want = std::exp(cplx(0.0, 1.0) * lambda * 2.5);
  CHECK(std::abs(t.a11 - want) <= 1e-15 * std::abs(want));
}

TEST_CASE("constant_transfer: matches dense matrix exponential") {
  const double deltas[] = {1e-6, 1e-4, 2.4e-4, 2.6e-4, 0.01, 0.5, 2.0};
  const cplx cs[] = {{0.5, 0.0}, {1.3, -0.7}, {0.0, 2.0}, {0.25, 0.25}};
  const cplx lambdas[] = {{0.0, 0.0}, {0.6, 0.0}, {1.0, 1.0},
                          {-2.0, 0.5}, {0.0, 2.0}};
  for (cplx c : cs)
    for (cplx lam : lambdas)
      for (double d : deltas) {
        const auto t = krein::constant_transfer(c, lam, d);
        const Eigen::Matrix2cd ref = expm_transfer(c, lam, d);
        const double scale = std::exp(t.segment_log_scale);
        const double norm = ref.cwiseAbs().maxCoeff();
        CHECK(std::abs(t.a11 * scale - ref(0, 0)) <= 1e-12 * norm);
        CHECK(std::abs(t.a12 * scale - ref(0, 1)) <= 1e-12 * norm);
        CHECK(std::abs(t.a21 * scale - ref(1, 0)) <= 1e-12 * norm);
        CHECK(std::abs(t.a22 * scale - ref(1, 1)) <= 1e-12 * norm);
      }
}

TEST_CASE("constant_transfer: resonance lambda = ±2|c|") {
  for (double sgn : {1.0, -1.0}) {
    const cplx c(0.75, 0.0);
    const cplx lam(sgn * 1.5, 0.0);  // omega^2 = 0 exactly
    const auto t = krein::constant_transfer(c, lam, 1.0);
    const Eigen::Matrix2cd ref = expm_transfer(c, lam, 1.0);
    const double scale = std::exp(t.segment_log_scale);
    CHECK(std::abs(t.a11 * scale - ref(0, 0)) <= 1e-12);
    CHECK(std::abs(t.a21 * scale - ref(1, 0)) <= 1e-12);
  }
}

TEST_CASE("constant_transfer: determinant law det = e^{i lambda delta}") {
  const cplx cs[] = {{1.0, 0.0}, {0.3, -1.2}, {0.0, 0.0}};
  const cplx lambdas[] = {{0.9, 0.0}, {0.5, 1.5}, {-1.0, 0.25}};
  for (cplx c : cs)
    for (cplx lam : lambdas)
      for (double d : {1e-5, 0.3, 1.7}) {
        const auto t = krein::constant_transfer(c, lam, d);
        const cplx det =
            (t.a11 * t.a22 - t.a12 * t.a21) *
            std::exp(2.0 * t.segment_log_scale);
        const cplx want = std::exp(cplx(0.0, 1.0) * lam * d);
        CHECK(std::abs(det - want) <= 1e-12 * std::abs(want));
      }
}

TEST_CASE("constant_transfer: hermitian-like known value at lambda = 0") {
  const auto t = krein::constant_transfer(cplx(-1.0, 0.0), cplx(0.0, 0.0), 1.0);
  const double scale = std::exp(t.segment_log_scale);
  CHECK(t.a11.real() * scale == doctest::Approx(1.5430806348152437).epsilon(1e-14));
  CHECK(t.a12.real() * scale == doctest::Approx(1.1752011936438014).epsilon(1e-14));
  CHECK(t.a21.real() * scale == doctest::Approx(1.1752011936438014).epsilon(1e-14));
}

TEST_CASE("constant_segment_integral: Simpson oracle and zero-c closed form") {
  SUBCASE("generic coefficient vs quadrature") {
    const cplx c(0.9, -0.4), lam(0.8, 0.6);
    const double delta = 0.8;
    const auto g = krein::constant_segment_integral(c, lam, delta);
    // composite Simpson on the dense exponential
    const int n = 200;  // even
    Eigen::Matrix2cd acc = Eigen::Matrix2cd::Zero();
    for (int i = 0; i <= n; ++i) {
      const double s = delta * i / n;
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      acc += w * expm_transfer(c, lam, s);
    }
    acc *= delta / (3.0 * n);
    CHECK(std::abs(g.g11 - acc(0, 0)) <= 1e-10);
    CHECK(std::abs(g.g12 - acc(0, 1)) <= 1e-10);
    CHECK(std::abs(g.g21 - acc(1, 0)) <= 1e-10);
    CHECK(std::abs(g.g22 - acc(1, 1)) <= 1e-10);
  }
  SUBCASE("zero coefficient") {
    const cplx lam(1.2, 0.5);
    const double delta = 0.6;
    const auto g = krein::constant_segment_integral(cplx(0, 0), lam, delta);
    const cplx il = cplx(0.0, 1.0) * lam;
    const cplx want = (std::exp(il * delta) - 1.0) / il;
    CHECK(std::abs(g.g11 - want) <= 1e-14);
    CHECK(g.g22 == cplx(delta, 0.0));
    CHECK(g.g12 == cplx(0.0, 0.0));
    // tiny-argument series branch
    const auto gs = krein::constant_segment_integral(cplx(0, 0), lam, 1e-7);
    CHECK(std::abs(gs.g11 - 1e-7) <= 1e-13);
  }
}

TEST_CASE("propagate: zero profile leaves p_star frozen, p rotating") {
  const CoefficientProfile empty;
  const cplx lam(2.0, 0.0);
  const auto traj = krein::propagate(empty, lam, 7.0, {3.5});
  REQUIRE(traj.checkpoints.size() == 2);
  const auto& end = traj.checkpoints.back();
  CHECK(end.r == 7.0);
  CHECK(end.p_star == cplx(1.0, 0.0));
  const cplx want = std::exp(cplx(0.0, 14.0));
  CHECK(std::abs(end.p * std::exp(end.log_scale) - want) <= 1e-13);
}

TEST_CASE("propagate vs rk_oracle on a piecewise profile") {
  const auto prof = three_segments();
  const cplx lam(0.7, 0.9);
  const auto traj = krein::propagate(prof, lam, 3.5);
  const auto& end = traj.checkpoints.back();
  const auto ref = krein::rk_oracle(prof, lam, 3.5, 1e-4);
  const double scale = std::exp(end.log_scale);
  CHECK(std::abs(end.p * scale - ref.p) <= 1e-9 * std::abs(ref.p));
  CHECK(std::abs(end.p_star * scale - ref.p_star) <=
        1e-9 * std::abs(ref.p_star));
  CHECK(std::abs(end.energy_integral * scale * scale - ref.energy_integral) <=
        1e-8 * std::abs(ref.energy_integral));
  CHECK(std::abs(end.cesaro_integral * scale - ref.cesaro_integral) <=
        1e-8 * std::abs(ref.cesaro_integral));
  CHECK(std::abs(end.pi_integral * scale - ref.pi_integral) <=
        1e-8 * std::abs(ref.pi_integral));
}

TEST_CASE("propagate: energy bookkeeping satisfies the Lagrange identity") {
  const auto prof = three_segments();
  const auto traj =
      krein::propagate(prof, cplx(0.3, 1.1), 4.0, {0.5, 1.0, 2.0, 3.0});
  CHECK(krein::lagrange_residual(traj) <= 1e-9);
}

TEST_CASE("propagate: real lambda has exactly zero energy integral") {
  const auto prof = three_segments();
  const auto traj = krein::propagate(prof, cplx(1.3, 0.0), 4.0, {2.0});
  for (const auto& s : traj.checkpoints) CHECK(s.energy_integral == 0.0);
  // and the Lagrange identity degenerates to |p*| = |p| balance
  CHECK(krein::lagrange_residual(traj) <= 1e-10);
}

TEST_CASE("propagate_from: composition equals one full run") {
  const auto prof = three_segments();
  const cplx lam(0.4, 0.8);
  const double mid = 1.7, r_end = 3.3;
  const auto full = krein::propagate(prof, lam, r_end, {mid});
  REQUIRE(full.checkpoints.size() == 2);
  const auto two = krein::propagate_from(full.checkpoints.front(), prof, r_end);
  const auto& a = full.checkpoints.back();
  const auto& b = two.checkpoints.back();
  // identical event sequences make the halves bitwise-reproducible
  CHECK(a.p == b.p);
  CHECK(a.p_star == b.p_star);
  CHECK(a.log_scale == b.log_scale);
  CHECK(a.energy_integral == b.energy_integral);
}

TEST_CASE("propagate: renormalization keeps growing modes representable") {
  const CoefficientProfile empty;
  const cplx lam(0.0, -2.0);  // p ~ e^{2r}
  const auto traj = krein::propagate(empty, lam, 150.0);
  const auto& end = traj.checkpoints.back();
  const double logp = std::log(std::abs(end.p)) + end.log_scale;
  CHECK(logp == doctest::Approx(300.0).epsilon(1e-12));
  // p_star stays exactly 1 through every rescale
  const double logps = std::log(std::abs(end.p_star)) + end.log_scale;
  CHECK(std::abs(logps) <= 1e-12);
}

TEST_CASE("pulse algebra: closed form from initial state (0, 1) at lambda 0") {
  struct Case {
    double b, eps;
    int n;
  };
  for (const Case& c : {Case{0.8, 0.3, 5}, Case{1.5, 0.1, 17}, Case{0.3, 0.9, 3}}) {
    const cplx xi = krein::thm62_schedule_params(c.n).xi;
    const auto prof = krein::thm62_pulse(c.b, xi, c.eps);
    KreinState init;
    init.lambda = cplx(0.0, 0.0);
    init.p = cplx(0.0, 0.0);
    init.p_star = cplx(1.0, 0.0);
    const auto traj = krein::propagate_from(init, prof, 2.0 * c.eps);
    const auto& end = traj.checkpoints.back();
    const double scale = std::exp(end.log_scale);
    const cplx q = end.p * scale;
    const cplx qs = end.p_star * scale;
    const cplx q_want = 0.5 * (1.0 - xi) * std::sinh(2.0 * c.b * c.eps);
    const double sh = std::sinh(c.b * c.eps);
    const cplx qs_want = 1.0 + (1.0 - std::conj(xi)) * sh * sh;
    CHECK(std::abs(q - q_want) <= 1e-13);
    CHECK(std::abs(qs - qs_want) <= 1e-13);
  }
}

TEST_CASE("q_propagate: closed form for real profiles") {
  std::vector<PulseSegment> segs;
  segs.push_back(krein::make_segment(0.0, 1.0, cplx(-1.0, 0.0)));
  const CoefficientProfile prof(segs);
  SUBCASE("hyperbolic growth from (0, 1)") {
    const auto [q, qs] = krein::q_propagate(prof, cplx(0, 0), cplx(1, 0), 1.0);
    CHECK(q.real() == doctest::Approx(1.1752011936438014).epsilon(1e-14));
    CHECK(qs.real() == doctest::Approx(1.5430806348152437).epsilon(1e-14));
  }
  SUBCASE("matches the lambda = 0 propagation from (1, 1)") {
    const auto [q, qs] = krein::q_propagate(prof, cplx(1, 0), cplx(1, 0), 1.0);
    const double e1 = std::exp(1.0);
    CHECK(std::abs(q - cplx(e1, 0.0)) <= 1e-14 * e1);
    CHECK(std::abs(qs - cplx(e1, 0.0)) <= 1e-14 * e1);
    KreinState init;
    const auto traj = krein::propagate_from(init, prof, 1.0);
    const auto& end = traj.checkpoints.back();
    const double scale = std::exp(end.log_scale);
    CHECK(std::abs(end.p * scale - q) <= 1e-12);
    CHECK(std::abs(end.p_star * scale - qs) <= 1e-12);
  }
  SUBCASE("complex-valued profile rejected") {
    std::vector<PulseSegment> bad;
    bad.push_back(krein::make_segment(0.0, 1.0, cplx(0.0, 1.0)));
    const CoefficientProfile cbad(bad);
    CHECK_THROWS_AS(
        (void)krein::q_propagate(cbad, cplx(0, 0), cplx(1, 0), 1.0),
        std::invalid_argument);
  }
}

TEST_CASE("propagate: checkpoint bookkeeping") {
  const auto prof = three_segments();
  const auto traj =
      krein::propagate(prof, cplx(0.5, 0.5), 3.5, {0.0, 1.0, 2.0, 3.5});
  REQUIRE(traj.checkpoints.size() == 4);
  CHECK(traj.checkpoints[0].r == 0.0);
  CHECK(traj.checkpoints[0].p == cplx(1.0, 0.0));
  CHECK(traj.checkpoints[1].r == 1.0);
  CHECK(traj.checkpoints[2].r == 2.0);
  CHECK(traj.checkpoints[3].r == 3.5);
  const auto zero = krein::propagate(prof, cplx(0.5, 0.5), 0.0);
  REQUIRE(zero.checkpoints.size() == 1);
  CHECK(zero.checkpoints[0].r == 0.0);
}

TEST_CASE("propagate: smooth part integrates through the adaptive path") {
  // a(r) = (1+r)^{-0.75} on [0, 20]: decaying, real
  CoefficientProfile prof(
      {}, [](double r) { return cplx(std::pow(1.0 + r, -0.75), 0.0); }, 1.0,
      1e9);
  const cplx lam(1.0, 1.0);
  const auto traj = krein::propagate(prof, lam, 20.0, {10.0});
  CHECK(krein::lagrange_residual(traj) <= 1e-8);
  const auto ref = krein::rk_oracle(prof, lam, 20.0, 1e-3);
  const auto& end = traj.checkpoints.back();
  const double scale = std::exp(end.log_scale);
  CHECK(std::abs(end.p * scale - ref.p) <= 1e-7 * std::abs(ref.p));
  CHECK(std::abs(end.p_star * scale - ref.p_star) <=
        1e-7 * std::abs(ref.p_star));
}
