// acceptance gate: twelve criteria, one PASS/FAIL line each, exit code is
// the number of failed criteria

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "krein/discrete.hpp"
#include "krein/krein.hpp"
#include "krein/profile.hpp"
#include "krein/sakhnovich.hpp"
#include "krein/seeded.hpp"
#include "krein/spectral.hpp"
#include "krein/util.hpp"

using krein::cplx;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kSeed = 812396817347ULL;

int g_failures = 0;

void line(int id, bool pass, double measured, double budget,
          const std::string& note = {}) {
  if (!pass) ++g_failures;
  std::printf("%s criterion %d: %.6g (budget %.6g)%s%s\n",
              pass ? "PASS" : "FAIL", id, measured, budget,
              note.empty() ? "" : "  ", note.c_str());
}

cplx true_p(const krein::KreinState& s) {
  return s.p * std::exp(s.log_scale);
}
cplx true_p_star(const krein::KreinState& s) {
  return s.p_star * std::exp(s.log_scale);
}

// 1. free system: plane wave, constant adjoint, flat density
void criterion1() {
  const krein::CoefficientProfile zero;
  std::vector<double> grid;
  for (int i = 0; i <= 400; ++i) grid.push_back(-10.0 + 0.05 * i);
  const auto rep = krein::density_at(zero, 5.0, grid);
  double worst = 0.0;
  for (double d : rep.density)
    worst = std::max(worst, std::abs(d - 1.0 / (2.0 * kPi)));
  for (double lv : {-10.0, -3.7, 0.0, 5.1, 10.0}) {
    const auto traj = krein::propagate(zero, cplx(lv, 0.0), 5.0, {2.5, 5.0});
    for (const auto& s : traj.checkpoints) {
      worst = std::max(worst,
                       std::abs(true_p(s) - std::exp(cplx(0.0, lv * s.r))));
      worst = std::max(worst, std::abs(true_p_star(s) - cplx(1.0, 0.0)));
    }
  }
  line(1, worst <= 1e-12, worst, 1e-12);
}

// 2. energy identity over seeded piecewise profiles
void criterion2() {
  krein::SeededRng rng(kSeed, "lagrange");
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto profile = krein::random_profile(rng, 100, 2.0);
    const cplx lambda(rng.uniform(-2.0, 2.0), rng.uniform(0.1, 2.0));
    const double r_end = profile.support_end() + 1.0;
    const auto traj = krein::propagate(
        profile, lambda, r_end,
        {0.25 * r_end, 0.5 * r_end, 0.75 * r_end, r_end});
    worst = std::max(worst, krein::lagrange_residual(traj));
  }
  line(2, worst <= 1e-8, worst, 1e-8);
}

// 3. segment transfer vs fixed-step reference, branch point included
void criterion3() {
  double worst = 0.0;
  for (double cv : {0.0, 0.5, 1.0, 1.5, 2.0}) {
    std::set<double> lambdas{0.0, 0.5, 1.0, 1.5, 2.0};
    lambdas.insert(2.0 * cv);
    lambdas.insert(-2.0 * cv);
    for (double lv : lambdas)
      for (double delta : {0.0, 0.5, 1.0, 1.5, 2.0}) {
        const auto t =
            krein::constant_transfer(cplx(cv, 0.0), cplx(lv, 0.0), delta);
        const double scale = std::exp(t.segment_log_scale);
        const cplx p = (t.a11 + t.a12) * scale;
        const cplx ps = (t.a21 + t.a22) * scale;
        std::vector<krein::PulseSegment> seg;
        if (cv != 0.0 && delta > 0.0)
          seg.push_back(krein::make_segment(0.0, delta, cplx(cv, 0.0)));
        const auto ref =
            krein::rk_oracle(krein::CoefficientProfile(std::move(seg)),
                             cplx(lv, 0.0), delta, 1e-5);
        worst = std::max(worst, std::abs(p - true_p(ref)));
        worst = std::max(worst, std::abs(ps - true_p_star(ref)));
      }
  }
  line(3, worst <= 1e-9, worst, 1e-9);
}

// 4. pulse pair at lambda = 0 from (0, 1) against the closed form
void criterion4() {
  krein::SeededRng rng(kSeed, "pulse");
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const double b = rng.uniform(0.1, 2.0);
    const cplx xi = std::exp(cplx(0.0, rng.uniform(0.0, 2.0 * kPi)));
    const double eps = rng.uniform(0.05, 0.5);
    krein::KreinState init;
    init.p = cplx(0.0, 0.0);
    const auto traj =
        krein::propagate_from(init, krein::thm62_pulse(b, xi, eps), 2.0 * eps);
    const auto& end = traj.checkpoints.back();
    const double sh = std::sinh(b * eps);
    worst = std::max(worst, std::abs(true_p(end) - 0.5 * (1.0 - xi) *
                                                       std::sinh(2.0 * b * eps)));
    worst = std::max(
        worst, std::abs(true_p_star(end) -
                        (1.0 + (1.0 - std::conj(xi)) * sh * sh)));
  }
  line(4, worst <= 1e-12, worst, 1e-12);
}

// 5. slow L^2 coefficient: p sinks, p* is Cauchy, limit matches P2
void criterion5() {
  const krein::CoefficientProfile profile(
      {}, [](double r) { return cplx(std::pow(1.0 + r, -0.75), 0.0); }, 1.0,
      1e9);
  std::vector<double> cps;
  for (double r = 12.5; r <= 102400.5; r *= 2.0) cps.push_back(r);
  double final_p = 0.0, max_rise = -kInf;
  bool cauchy_down = true;
  for (const cplx lambda : {cplx(0.0, 1.0), cplx(1.0, 1.0)}) {
    const auto traj = krein::propagate(profile, lambda, 102400.0, cps);
    double prev = kInf;
    for (const auto& s : traj.checkpoints) {
      const double now = std::abs(true_p(s));
      max_rise = std::max(max_rise, now - prev);
      prev = now;
    }
    final_p = std::max(final_p, prev);
    double dprev = kInf;  // |p*(R) - p*(R/2)| over R in {25, 50, 100, 200}
    for (std::size_t i = 1; i < 5; ++i) {
      const double d = std::abs(true_p_star(traj.checkpoints[i]) -
                                true_p_star(traj.checkpoints[i - 1]));
      cauchy_down = cauchy_down && d < dprev;
      dprev = d;
    }
  }
  const auto sys = krein::krein_embedding(profile);
  const auto est = krein::pi_l2(sys, cplx(0.0, 1.0), 200.0);
  const auto far = krein::propagate_matrix(sys, cplx(0.0, 1.0), 800.0);
  const cplx far_p2 = far.checkpoints.back().p2(0, 0) *
                      std::exp(far.checkpoints.back().log_scale);
  const double gap = std::abs(est.value(0, 0) - far_p2);
  const bool pass = final_p <= 1e-3 && max_rise <= 0.0 && cauchy_down &&
                    gap <= est.tail_bound;
  char note[160];
  std::snprintf(note, sizeof note,
                "final |p| %.3g, limit gap %.3g vs tail bound %.3g",
                final_p, gap, est.tail_bound);
  line(5, pass, final_p, 1e-3, note);
}

// 6. bounded pulse train: |p*| swings inside a fixed band forever
void criterion6() {
  const auto profile = krein::thm61_profile(32, krein::AmpMode::FixedM(2.0));
  std::vector<double> cps;
  for (int n = 3; n <= 32; ++n) {
    cps.push_back(n + 0.5 * std::pow(2.0, -n));
    cps.push_back(n + 0.5);
  }
  const auto diag = krein::limit_diagnostics(profile, cplx(0.0, 1.0), cps);
  double mx = 0.0, mn = kInf;
  for (std::size_t i = diag.rows.size() - 20; i < diag.rows.size(); ++i) {
    mx = std::max(mx, diag.rows[i].modulus);
    mn = std::min(mn, diag.rows[i].modulus);
  }
  const double ratio = mx / mn;
  const bool pass = ratio >= 1.40 && ratio <= 1.70 &&
                    diag.classification == "modulus-oscillates";
  line(6, pass, ratio, 1.70,
       "band [1.40, 1.70], classified " + diag.classification);
}

// criteria 7 and 8 share one long pulse-train run
void criteria7and8() {
  const std::int64_t n_max = 100000;
  const auto run = krein::thm62_build_and_run(n_max, cplx(0.0, 1.0));
  const auto& rows = run.diag.rows;

  double mx = 0.0, mn = kInf;
  for (const auto& row : rows)
    if (row.n >= n_max / 2) {
      mx = std::max(mx, row.modulus);
      mn = std::min(mn, row.modulus);
    }
  const double spread = (mx - mn) / mn;

  const double drift = rows.back().phase;
  const double model = krein::phase_drift_model(3, n_max - 1);
  const double drift_err = std::abs(drift - model) / model;

  double collapse = 0.0;
  for (const auto& row : rows)
    if (row.n >= n_max / 10)
      collapse = std::max(collapse, std::abs(row.p) / row.modulus);

  const double pi_sq = rows.back().modulus * rows.back().modulus;
  const double via_hardy = 2.0 * run.hardy_value;
  const double energy_err = std::abs(pi_sq - via_hardy) / via_hardy;

  std::vector<krein::PulseSegment> segs;
  krein::KahanSum closed;
  for (std::size_t k = 0; k < run.schedule.r.size(); ++k) {
    const double r = run.schedule.r[k], eps = run.schedule.eps[k],
                 b = run.schedule.b[k];
    segs.push_back(krein::make_segment(r, eps, cplx(-b, 0.0)));
    segs.push_back(
        krein::make_segment(r + eps, eps, std::conj(run.schedule.xi[k]) * b));
    closed.add(2.0 * b * b * b * eps);
  }
  const auto lp = krein::lp_norm(krein::CoefficientProfile(std::move(segs)), 3.0);
  const double lp_err = std::abs(lp.value - closed.value());

  const bool pass7 = spread <= 0.01 && drift_err <= 0.25 &&
                     collapse <= 1e-3 && energy_err <= 0.02 &&
                     lp_err <= 1e-10;
  char note7[220];
  std::snprintf(note7, sizeof note7,
                "drift err %.3g (<=0.25), |p|/|p*| %.3g (<=1e-3), energy "
                "route err %.3g (<=0.02), L3 err %.3g (<=1e-10)",
                drift_err, collapse, energy_err, lp_err);
  line(7, pass7, spread, 0.01, note7);

  // nonuniqueness witness: full circle coverage needs predicted drift
  // >= 2 pi, and the drift model grows like log log n
  const double predicted = krein::phase_drift_model(3, n_max);
  int covered = 0;
  for (int k = 0; k < 8; ++k) {
    const cplx target = std::exp(cplx(0.0, 2.0 * kPi * k / 8.0));
    bool hit = false;
    for (const auto& row : rows)
      hit = hit ||
            std::abs(row.p_star / std::abs(row.p_star) - target) <= 0.05;
    covered += hit ? 1 : 0;
  }
  if (predicted >= 2.0 * kPi) {
    line(8, covered == 8, static_cast<double>(covered), 8.0,
         "unit phases visited by p*/|p*|");
  } else {
    const double log10_n_star =
        std::exp(std::log(std::log(static_cast<double>(n_max))) +
                 (2.0 * kPi - predicted)) /
        std::numbers::ln10;
    char note8[240];
    std::snprintf(note8, sizeof note8,
                  "blocked: predicted drift %.4f rad < 2 pi at n = 1e5; the "
                  "required horizon is n ~ 10^%.0f pulses (drift grows like "
                  "log log n); %d/8 phases covered so far",
                  predicted, log10_n_star, covered);
    line(8, false, predicted, 2.0 * kPi, note8);
  }
}

// 9. matrix systems: closed form, positivity, bilinear identity,
// scalar embedding, growth bound
void criterion9() {
  krein::SeededRng drng(kSeed, "diag");
  Eigen::VectorXd d(2);
  d << drng.uniform(0.5, 2.0), drng.uniform(0.5, 2.0);
  const auto dsys =
      krein::make_system(d, krein::MatrixProfile(2), krein::MatrixProfile(2));
  const auto dtraj =
      krein::propagate_matrix(dsys, cplx(0.0, 1.0), 2.5, {1.0, 2.5});
  double diag_err = 0.0;
  for (const auto& s : dtraj.checkpoints) {
    const double scale = std::exp(s.log_scale);
    for (int k = 0; k < 2; ++k) {
      diag_err = std::max(
          diag_err, std::abs(s.p1(k, k) * scale - std::exp(-d(k) * s.r)));
      diag_err = std::max(diag_err, std::abs(s.p2(k, k) * scale - 1.0));
    }
  }

  krein::SeededRng rng(kSeed, "systems");
  double identity = 0.0, eig_deficit = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto sys = krein::random_system(rng, 2);
    const cplx lambda(rng.uniform(-1.0, 1.0), rng.uniform(0.3, 1.5));
    const double r_end = sys.a2.support_end() + 0.5;
    const auto traj = krein::propagate_matrix(
        sys, lambda, r_end, {0.5 * r_end, r_end});
    identity = std::max(identity, krein::self_identity_residual(traj));
    for (const auto& s : traj.checkpoints) {
      const Eigen::MatrixXcd q =
          s.p2.adjoint() * s.p2 - s.p1.adjoint() * s.p1;
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(
          0.5 * (q + q.adjoint()));
      eig_deficit = std::max(eig_deficit, -eig.eigenvalues().minCoeff() /
                                              (1.0 + s.p2.squaredNorm()));
    }
  }

  krein::SeededRng demo_rng(kSeed, "demo");
  const auto demo = krein::random_system(demo_rng, 2);
  const double demo_end = demo.a2.support_end() + 0.5;
  const auto pair =
      krein::propagate_pair(demo, cplx(0.0, 1.0), cplx(0.0, 2.0), demo_end,
                            {0.5 * demo_end, demo_end});
  const double bilinear = krein::lagrange_bilinear(pair);

  std::vector<krein::PulseSegment> segs;
  segs.push_back(krein::make_segment(0.0, 1.2, cplx(0.8, -0.3)));
  segs.push_back(krein::make_segment(1.5, 0.7, cplx(-1.1, 0.6)));
  segs.push_back(krein::make_segment(2.2, 1.0, cplx(0.4, 0.4)));
  const krein::CoefficientProfile scalar_profile(
      (std::vector<krein::PulseSegment>(segs)));
  const auto esys = krein::krein_embedding(scalar_profile);
  const cplx el(0.6, 0.9);
  const std::vector<double> ecps{0.9, 1.8, 2.7, 3.6};
  const auto st = krein::propagate(scalar_profile, el, 3.6, ecps);
  const auto mt = krein::propagate_matrix(esys, el, 3.6, ecps);
  double embed = 0.0;
  for (std::size_t i = 0; i < st.checkpoints.size(); ++i) {
    const auto& a = st.checkpoints[i];
    const auto& b = mt.checkpoints[i];
    const double sa = std::exp(a.log_scale), sb = std::exp(b.log_scale);
    embed = std::max(embed, std::abs(b.p1(0, 0) * sb - a.p * sa) /
                                (1.0 + std::abs(a.p * sa)));
    embed = std::max(embed, std::abs(b.p2(0, 0) * sb - a.p_star * sa) /
                                (1.0 + std::abs(a.p_star * sa)));
  }

  Eigen::MatrixXcd base(2, 2);
  base << cplx(0.5, 0.2), cplx(-0.3, 0.4), cplx(0.2, -0.1), cplx(0.6, 0.0);
  const krein::MatrixProfile a2_smooth(
      2,
      [base](double r) {
        return Eigen::MatrixXcd(2.0 / ((1.0 + r) * (1.0 + r)) * base);
      },
      12.0);
  Eigen::VectorXd d2(2);
  d2 << 1.0, 1.5;
  const auto smooth_sys =
      krein::make_system(d2, krein::MatrixProfile(2), a2_smooth);
  std::vector<double> smooth_cps;
  for (int k = 1; k <= 16; ++k) smooth_cps.push_back(0.5 * k);
  const double margin = krein::log_norm_bound_check(
      krein::propagate_matrix(smooth_sys, cplx(0.3, 0.8), 8.0, smooth_cps));

  const bool pass = diag_err <= 1e-12 && identity <= 1e-7 &&
                    eig_deficit <= 1e-8 && bilinear <= 1e-7 &&
                    embed <= 1e-9 && margin >= -1e-6;
  char note[220];
  std::snprintf(note, sizeof note,
                "diag %.3g (<=1e-12), min-eig deficit %.3g (<=1e-8), "
                "bilinear %.3g (<=1e-7), embedding %.3g (<=1e-9), log-norm "
                "margin %.3g (>=-1e-6)",
                diag_err, eig_deficit, bilinear, embed, margin);
  line(9, pass, identity, 1e-7, note);
}

// 10. discrete recursion: monomials, energy identity, summability dichotomy
void criterion10() {
  const cplx z0(0.55, 0.3);
  const auto mono = krein::evaluate_polys(krein::verblunsky_zero(), z0, 50);
  double mono_err = 0.0;
  cplx zn(1.0, 0.0);
  for (const auto& pt : mono.points) {
    const double scale = std::exp(pt.log_scale);
    mono_err = std::max(mono_err, std::abs(pt.phi * scale - zn));
    mono_err = std::max(mono_err, std::abs(pt.phi_star * scale - 1.0));
    zn *= z0;
  }

  double energy = 0.0;
  for (const auto& seq :
       {krein::verblunsky_geometric(cplx(0.4, 0.3), 0.9),
        krein::verblunsky_power(2.0), krein::verblunsky_power(0.7),
        krein::verblunsky_phase_drift(0.5)})
    for (const cplx z : {cplx(0.9, 0.0), cplx(-0.63, 0.64), cplx(0.0, 0.3)})
      energy = std::max(energy, krein::discrete_energy_check(
                                    krein::evaluate_polys(seq, z, 10000, 50)));

  const auto summable = krein::verblunsky_power(2.0);
  double dprev = kInf, dlast = 0.0;
  bool cauchy = true;
  for (std::int64_t n : {400, 800, 1600}) {
    const auto a = krein::evaluate_polys(summable, cplx(0.0, 0.5), n).points;
    const auto b =
        krein::evaluate_polys(summable, cplx(0.0, 0.5), 2 * n).points;
    dlast = std::abs(b.back().phi_star * std::exp(b.back().log_scale) -
                     a.back().phi_star * std::exp(a.back().log_scale));
    cauchy = cauchy && dlast < dprev;
    dprev = dlast;
  }

  const auto rough =
      krein::evaluate_polys(krein::verblunsky_power(0.5), cplx(0.5, 0.0),
                            10000, 1000);
  const auto sum_at = [&rough](std::size_t i) {
    return rough.points[i].sum_sq * std::exp(2.0 * rough.points[i].log_scale);
  };
  const double growth = sum_at(rough.points.size() - 1) / sum_at(1);

  const bool pass =
      mono_err <= 1e-13 && energy <= 1e-10 && cauchy && dlast <= 1e-3 &&
      growth >= 10.0;
  char note[200];
  std::snprintf(note, sizeof note,
                "monomial err %.3g (<=1e-13), Cauchy gap %.3g (<=1e-3), "
                "divergent-family growth %.3g (>=10)",
                mono_err, dlast, growth);
  line(10, pass, energy, 1e-10, note);
}

// 11. transform isometry in the free case; general case reported
void criterion11() {
  const auto box = [](double) { return cplx(1.0, 0.0); };
  const auto free_rep =
      krein::verify_isometry(krein::CoefficientProfile{}, {box}, 1.0);
  std::vector<krein::PulseSegment> segs;
  segs.push_back(krein::make_segment(0.2, 0.8, cplx(0.4, 0.2)));
  const auto gen_rep = krein::verify_isometry(
      krein::CoefficientProfile((std::vector<krein::PulseSegment>(segs))),
      {box}, 1.0);
  char note[160];
  std::snprintf(note, sizeof note,
                "general-coefficient defect %.3g reported, not asserted",
                gen_rep[0].defect);
  line(11, free_rep[0].defect <= 0.01, free_rep[0].defect, 0.01, note);
}

// 12. averaged adjoint: exact for the free system, oscillating for the
// slow pulse train
void criterion12() {
  const double flat_err = std::abs(
      krein::cesaro_pi(krein::CoefficientProfile{}, cplx(0.0, 1.0), 32.0) -
      cplx(1.0, 0.0));
  const auto run = krein::thm62_build_and_run(10000, cplx(0.0, 1.0));
  const auto& rows = run.diag.rows;
  const auto window_spread = [&rows](std::size_t from) {
    double re_lo = kInf, re_hi = -kInf, im_lo = kInf, im_hi = -kInf;
    krein::KahanSum mean;
    for (std::size_t i = from; i < rows.size(); ++i) {
      re_lo = std::min(re_lo, rows[i].cesaro.real());
      re_hi = std::max(re_hi, rows[i].cesaro.real());
      im_lo = std::min(im_lo, rows[i].cesaro.imag());
      im_hi = std::max(im_hi, rows[i].cesaro.imag());
      mean.add(std::abs(rows[i].cesaro));
    }
    return std::max(re_hi - re_lo, im_hi - im_lo) /
           (mean.value() / static_cast<double>(rows.size() - from));
  };
  const double half = window_spread(rows.size() / 2);
  const double quarter = window_spread(3 * rows.size() / 4);
  const bool oscillates = half > 0.01 && quarter > 0.01;
  char note[180];
  std::snprintf(note, sizeof note,
                "flat average err %.3g (exact), trailing windows spread "
                "%.3g and %.3g, classification '%s'",
                flat_err, half, quarter, oscillates ? "oscillates" : "settles");
  line(12, flat_err <= 1e-14 && oscillates, half, 0.01, note);
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criteria7and8();
  criterion9();
  criterion10();
  criterion11();
  criterion12();
  std::printf("%d of 12 criteria pass\n", 12 - g_failures);
  return g_failures;
}
