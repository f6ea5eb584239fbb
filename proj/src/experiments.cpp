#include "krein/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "json.hpp"
#include "krein/seeded.hpp"
#include "krein/serialize.hpp"
#include "krein/util.hpp"

namespace krein {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

void add_check(std::vector<CheckResult>& checks, std::string name,
               bool pass, double measured, double budget,
               std::string detail = {}) {
  checks.push_back(
      {std::move(name), pass, measured, budget, std::move(detail)});
}

// budgeted "measured <= budget" convenience
void add_bound(std::vector<CheckResult>& checks, std::string name,
               double measured, double budget, std::string detail = {}) {
  add_check(checks, std::move(name), measured <= budget, measured, budget,
            std::move(detail));
}

cplx true_p(const KreinState& s) { return s.p * std::exp(s.log_scale); }
cplx true_p_star(const KreinState& s) {
  return s.p_star * std::exp(s.log_scale);
}

std::vector<double> quarter_checkpoints(double r_end) {
  return {0.25 * r_end, 0.5 * r_end, 0.75 * r_end, r_end};
}

// keeps at most `cap` rows: first, last, even stride between
std::vector<DiagnosticsRow> subsample(const std::vector<DiagnosticsRow>& rows,
                                      std::size_t cap) {
  if (rows.size() <= cap) return rows;
  std::vector<DiagnosticsRow> out;
  const std::size_t stride = (rows.size() + cap - 2) / (cap - 1);
  for (std::size_t i = 0; i + 1 < rows.size(); i += stride)
    out.push_back(rows[i]);
  out.push_back(rows.back());
  return out;
}

// ---------------------------------------------------------------- fourier

void run_fourier(const ExperimentConfig& cfg, const fs::path& dir,
                 std::vector<CheckResult>& checks, ordered_json& values) {
  const double lo = cfg.real("lambda_min"), hi = cfg.real("lambda_max");
  const double step = cfg.real("lambda_step"), r_end = cfg.real("r_end");
  if (!(step > 0.0) || !(hi > lo) || !(r_end > 0.0))
    throw std::invalid_argument("fourier grid parameters must be positive");
  const CoefficientProfile zero;

  std::vector<double> grid;
  const auto count = static_cast<std::int64_t>((hi - lo) / step + 0.5);
  for (std::int64_t i = 0; i <= count; ++i)
    grid.push_back(lo + step * static_cast<double>(i));
  const auto rep = density_at(zero, r_end, grid);

  double worst = 0.0;
  for (double d : rep.density)
    worst = std::max(worst, std::abs(d - 1.0 / (2.0 * kPi)));
  for (double lambda : {lo, 0.3 * lo, 0.0, 0.7 * hi, hi}) {
    const auto traj =
        propagate(zero, cplx(lambda, 0.0), r_end, {0.5 * r_end, r_end});
    for (const auto& s : traj.checkpoints) {
      worst = std::max(worst, std::abs(true_p(s) -
                                       std::exp(cplx(0.0, lambda * s.r))));
      worst = std::max(worst, std::abs(true_p_star(s) - cplx(1.0, 0.0)));
    }
  }
  add_bound(checks, "free-solution-and-density", worst, 1e-12);
  values["skk_integral"] = skk_integral(rep);
  write_text_file((dir / "density.csv").string(), write_spectral_csv(rep));

  // energy identity across seeded piecewise profiles
  SeededRng rng(cfg.seed, "lagrange");
  const auto trials = cfg.integer("trials");
  const auto max_segments = cfg.integer("max_segments");
  const double max_abs = cfg.real("max_abs");
  const double im_lo = cfg.real("imag_min"), im_hi = cfg.real("imag_max");
  if (trials < 1 || max_segments < 1 || !(max_abs > 0.0) ||
      !(im_hi >= im_lo) || !(im_lo > 0.0))
    throw std::invalid_argument("fourier trial parameters out of range");
  double worst_lagrange = 0.0;
  for (std::int64_t t = 0; t < trials; ++t) {
    const auto profile =
        random_profile(rng, static_cast<int>(max_segments), max_abs);
    const cplx lambda(rng.uniform(-2.0, 2.0), rng.uniform(im_lo, im_hi));
    const double r_end_t = profile.support_end() + 1.0;
    const auto traj =
        propagate(profile, lambda, r_end_t, quarter_checkpoints(r_end_t));
    worst_lagrange = std::max(worst_lagrange, lagrange_residual(traj));
  }
  add_bound(checks, "lagrange-identity", worst_lagrange, 1e-8,
            "constant segments transport the identity defect exactly, so "
            "any nonzero residual points at frame or checkpoint handling");

  // exact transfer against the fixed-step reference, branch point included
  const double oracle_step = cfg.real("oracle_step");
  if (!(oracle_step > 0.0))
    throw std::invalid_argument("oracle_step must be positive");
  double worst_oracle = 0.0;
  for (double cv : {0.0, 0.5, 1.0, 1.5, 2.0}) {
    std::set<double> lambdas{0.0, 0.5, 1.0, 1.5, 2.0};
    lambdas.insert(2.0 * cv);   // omega = 0 branch
    lambdas.insert(-2.0 * cv);
    for (double lv : lambdas)
      for (double delta : {0.1, 0.5, 1.0, 1.5, 2.0}) {
        const auto t = constant_transfer(cplx(cv, 0.0), cplx(lv, 0.0), delta);
        const double scale = std::exp(t.segment_log_scale);
        const cplx p = (t.a11 + t.a12) * scale;
        const cplx p_star = (t.a21 + t.a22) * scale;
        std::vector<PulseSegment> seg;
        if (cv != 0.0) seg.push_back(make_segment(0.0, delta, cplx(cv, 0.0)));
        const auto ref = rk_oracle(CoefficientProfile(std::move(seg)),
                                   cplx(lv, 0.0), delta, oracle_step);
        worst_oracle = std::max(worst_oracle, std::abs(p - true_p(ref)));
        worst_oracle =
            std::max(worst_oracle, std::abs(p_star - true_p_star(ref)));
      }
  }
  add_bound(checks, "transfer-vs-oracle", worst_oracle, 1e-9);

  // pulse pair at lambda = 0 from (0, 1) against the hand closed form
  SeededRng prng(cfg.seed, "pulse");
  const auto pulse_trials = cfg.integer("pulse_trials");
  if (pulse_trials < 1)
    throw std::invalid_argument("pulse_trials must be positive");
  double worst_pulse = 0.0;
  for (std::int64_t t = 0; t < pulse_trials; ++t) {
    const double b = prng.uniform(0.1, 2.0);
    const cplx xi = std::exp(cplx(0.0, prng.uniform(0.0, 2.0 * kPi)));
    const double eps = prng.uniform(0.05, 0.5);
    const auto pulse = thm62_pulse(b, xi, eps);
    KreinState init;
    init.p = cplx(0.0, 0.0);
    const auto traj = propagate_from(init, pulse, 2.0 * eps);
    const auto& end = traj.checkpoints.back();
    const double sh = std::sinh(b * eps);
    const cplx want_p = 0.5 * (1.0 - xi) * std::sinh(2.0 * b * eps);
    const cplx want_ps = 1.0 + (1.0 - std::conj(xi)) * sh * sh;
    worst_pulse = std::max(worst_pulse, std::abs(true_p(end) - want_p));
    worst_pulse =
        std::max(worst_pulse, std::abs(true_p_star(end) - want_ps));
  }
  add_bound(checks, "pulse-algebra", worst_pulse, 1e-12);
}

// --------------------------------------------------------------- l2-decay

void run_l2_decay(const ExperimentConfig& cfg, const fs::path& dir,
                  std::vector<CheckResult>& checks, ordered_json& values) {
  const double e = cfg.real("exponent"), r_end = cfg.real("r_end");
  if (!(e > 0.5) || !(r_end >= 16.0))
    throw std::invalid_argument(
        "l2-decay needs exponent > 1/2 and r_end >= 16");
  const CoefficientProfile profile(
      {}, [e](double r) { return cplx(std::pow(1.0 + r, -e), 0.0); }, 1.0,
      1e9);
  // geometric checkpoints: the Cauchy window ends at r_end, the forced
  // response |p| ~ (1+r)^{-exponent} needs a much longer horizon to sink
  // below its budget
  std::vector<double> cps;
  for (double r = r_end / 16.0; r <= 512.0 * r_end + 0.5; r *= 2.0)
    cps.push_back(r);

  double final_p = 0.0, max_rise = 0.0, cauchy_last = 0.0,
         cauchy_prev = kInf;
  bool cauchy_decreasing = true;
  Trajectory kept;
  for (const cplx lambda : {cplx(0.0, 1.0), cplx(1.0, 1.0)}) {
    const auto traj = propagate(profile, lambda, 512.0 * r_end, cps);
    double prev = kInf;
    for (const auto& s : traj.checkpoints) {
      const double now = std::abs(true_p(s));
      max_rise = std::max(max_rise, now - prev);
      prev = now;
    }
    final_p = std::max(final_p, prev);
    // checkpoints double, so consecutive p* gaps over the first five form
    // the Cauchy differences across R in {r_end/8, ..., r_end}
    cauchy_prev = kInf;
    for (std::size_t i = 1; i < 5; ++i) {
      cauchy_last = std::abs(true_p_star(traj.checkpoints[i]) -
                             true_p_star(traj.checkpoints[i - 1]));
      cauchy_decreasing = cauchy_decreasing && cauchy_last < cauchy_prev;
      cauchy_prev = cauchy_last;
    }
    if (lambda == cplx(0.0, 1.0)) kept = traj;
  }
  add_check(checks, "p-decay", final_p <= 1e-3 && max_rise <= 0.0, final_p,
            1e-3, max_rise > 0.0 ? "modulus rose between checkpoints" : "");
  add_check(checks, "pi-cauchy", cauchy_decreasing, cauchy_last, cauchy_prev,
            "consecutive p* differences must shrink");

  const auto sys = krein_embedding(profile);
  const auto near = pi_l2(sys, cplx(0.0, 1.0), r_end);
  const auto far = propagate_matrix(sys, cplx(0.0, 1.0), 4.0 * r_end);
  const cplx far_value = far.checkpoints.back().p2(0, 0) *
                         std::exp(far.checkpoints.back().log_scale);
  const double gap = std::abs(near.value(0, 0) - far_value);
  add_bound(checks, "pi-l2-tail", gap, near.tail_bound,
            "limit estimate vs direct propagation to 4 r_end");
  values["pi_l2_tail_bound"] = near.tail_bound;
  values["pi_l2_value_re"] = near.value(0, 0).real();
  values["pi_l2_value_im"] = near.value(0, 0).imag();
  write_text_file((dir / "trajectory.csv").string(),
                  write_trajectory_csv(kept));
}

// ------------------------------------------------------------------ thm61

void run_thm61(const ExperimentConfig& cfg, const fs::path& dir,
               std::vector<CheckResult>& checks, ordered_json& values) {
  const double m = cfg.real("m_value");
  const auto pulses = cfg.integer("pulses");
  if (!(m > 0.0) || pulses < 10 || pulses > 37)
    throw std::invalid_argument(
        "thm61 needs m_value > 0 and pulses in [10, 37]");
  const int n_max = static_cast<int>(pulses) + 2;  // pulse index starts at 3
  const auto profile = thm61_profile(n_max, AmpMode::FixedM(2.0 * m));

  std::vector<double> cps;
  for (int n = 3; n <= n_max; ++n) {
    cps.push_back(n + 0.5 * std::pow(2.0, -n));  // pulse midpoint
    cps.push_back(n + 0.5);                      // following gap
  }
  const auto diag = limit_diagnostics(profile, cplx(0.0, 1.0), cps);

  double mx = 0.0, mn = kInf;
  for (std::size_t i = diag.rows.size() - 20; i < diag.rows.size(); ++i) {
    mx = std::max(mx, diag.rows[i].modulus);
    mn = std::min(mn, diag.rows[i].modulus);
  }
  const double ratio = mx / mn;
  // the band is stated for m = 1 around cosh(1); scale it with the target
  const double stretch = std::cosh(m) / std::cosh(1.0);
  const double lo = 1.40 * stretch, hi = 1.70 * stretch;
  add_check(checks, "oscillation-band", ratio >= lo && ratio <= hi, ratio,
            hi, "swing of |p*| between pulse peaks and gaps, band low " +
                    std::to_string(lo));
  add_check(checks, "classified-oscillating",
            diag.classification == "modulus-oscillates", 0.0, 0.0,
            diag.classification);
  values["oscillation_ratio"] = ratio;
  values["classification"] = diag.classification;

  write_text_file((dir / "diagnostics.csv").string(),
                  write_diagnostics_csv(diag.rows));
  write_text_file((dir / "profile.txt").string(),
                  write_profile(profile, {{"n_max", std::to_string(n_max)}}));
}

// ------------------------------------------------------------------ thm62

void run_thm62(const ExperimentConfig& cfg, const fs::path& dir,
               std::vector<CheckResult>& checks, ordered_json& values) {
  const auto n_max = cfg.integer("n_max");
  const cplx lambda0 = cfg.complex_value("lambda0");
  const double budget = cfg.real("ratio_budget");
  if (!(budget > 0.0))
    throw std::invalid_argument("ratio_budget must be positive");
  const auto run =
      thm62_build_and_run(n_max, lambda0, thm62_delta_default, budget);
  const auto& rows = run.diag.rows;

  double mx = 0.0, mn = kInf;
  for (const auto& row : rows)
    if (row.n >= n_max / 2) {
      mx = std::max(mx, row.modulus);
      mn = std::min(mn, row.modulus);
    }
  add_bound(checks, "modulus-spread", (mx - mn) / mn, 0.01,
            "relative spread of |p*| over the trailing half");

  // p* starts at 1 and gaps leave it fixed; each row holds the state just
  // before its pulse, so the last row carries the kicks of 3..n_max-1
  const double drift = rows.back().phase;
  const double model = phase_drift_model(3, n_max - 1);
  add_bound(checks, "phase-drift", std::abs(drift - model), 0.25 * model,
            "measured " + std::to_string(drift) + " rad vs model " +
                std::to_string(model));

  double collapse = 0.0;
  for (const auto& row : rows)
    if (row.n >= n_max / 10)
      collapse = std::max(collapse, std::abs(row.p) / row.modulus);
  add_bound(checks, "p-collapse", collapse, 1e-3,
            "|p|/|p*| over the last decade of pulses");

  const double pi_sq = rows.back().modulus * rows.back().modulus;
  const double via_hardy = 2.0 * lambda0.imag() * run.hardy_value;
  add_bound(checks, "energy-route-match",
            std::abs(pi_sq - via_hardy) / via_hardy, 0.02,
            "|p*|^2 at the end vs 2 Im(lambda0) x quadrature energy");

  // L^3 mass of the realized profile against the schedule's closed form
  std::vector<PulseSegment> segs;
  KahanSum closed;
  for (std::size_t k = 0; k < run.schedule.r.size(); ++k) {
    const double r = run.schedule.r[k], eps = run.schedule.eps[k],
                 b = run.schedule.b[k];
    const cplx xi = run.schedule.xi[k];
    segs.push_back(make_segment(r, eps, cplx(-b, 0.0)));
    segs.push_back(make_segment(r + eps, eps, std::conj(xi) * b));
    closed.add(2.0 * b * b * b * eps);  // 2 b^3 eps = 2 log^4(n) n^{-3/2}
  }
  const auto lp = lp_norm(CoefficientProfile(std::move(segs)), 3.0);
  add_bound(checks, "l3-closed-form", std::abs(lp.value - closed.value()),
            1e-10, "segment-exact integral of |a|^3 vs schedule sum");

  // phase coverage of the unit circle needs total drift >= 2 pi; report how
  // far this run gets and what reaching 2 pi would take
  const double predicted = phase_drift_model(3, n_max);
  int covered = 0;
  for (int k = 0; k < 8; ++k) {
    const cplx target = std::exp(cplx(0.0, 2.0 * kPi * k / 8.0));
    bool hit = false;
    for (const auto& row : rows)
      hit = hit || std::abs(row.p_star / std::abs(row.p_star) - target) <=
                       0.05;
    covered += hit ? 1 : 0;
  }
  if (predicted >= 2.0 * kPi) {
    add_check(checks, "phase-coverage", covered == 8,
              static_cast<double>(covered), 8.0,
              "unit phases visited by p*/|p*|");
  } else {
    const std::int64_t extended = predict_n_for_drift(3, 2.0 * kPi, 10000000);
    const double log10_n_star =
        std::exp(std::log(std::log(static_cast<double>(n_max))) +
                 (2.0 * kPi - predicted)) /
        std::numbers::ln10;
    add_check(checks, "phase-coverage", false, predicted, 2.0 * kPi,
              "drift at n_max is " + std::to_string(predicted) +
                  " rad < 2 pi; extension within 1e7 pulses: " +
                  (extended < 0 ? "none" : std::to_string(extended)) +
                  "; reaching 2 pi needs n ~ 10^" +
                  std::to_string(log10_n_star) + "; phases covered " +
                  std::to_string(covered) + "/8");
  }
  values["ratio_error_const"] = run.ratio_error_const;
  values["phase_drift"] = drift;
  values["phase_drift_model"] = model;
  values["hardy_value"] = run.hardy_value;
  values["phases_covered"] = covered;
  values["classification"] = run.diag.classification;

  write_text_file((dir / "diagnostics.csv").string(),
                  write_diagnostics_csv(subsample(rows, 1001)));
}

// -------------------------------------------------------- sakhnovich-demo

void run_sakhnovich(const ExperimentConfig& cfg, const fs::path& dir,
                    std::vector<CheckResult>& checks, ordered_json& values) {
  const auto trials = cfg.integer("trials");
  const auto dim = cfg.integer("dim");
  if (trials < 1 || dim < 1 || dim > 6)
    throw std::invalid_argument(
        "sakhnovich-demo needs trials >= 1 and dim in [1, 6]");
  const int m = static_cast<int>(dim);

  // decoupled diagonal system against the hand closed form
  SeededRng drng(cfg.seed, "diag");
  Eigen::VectorXd d(m);
  for (int k = 0; k < m; ++k) d(k) = drng.uniform(0.5, 2.0);
  const auto dsys = make_system(d, MatrixProfile(m), MatrixProfile(m));
  const auto dtraj =
      propagate_matrix(dsys, cplx(0.0, 1.0), 2.5, {1.0, 2.5});
  double worst_diag = 0.0;
  for (const auto& s : dtraj.checkpoints) {
    const double scale = std::exp(s.log_scale);
    for (int k = 0; k < m; ++k) {
      worst_diag = std::max(
          worst_diag,
          std::abs(s.p1(k, k) * scale - std::exp(-d(k) * s.r)));
      worst_diag =
          std::max(worst_diag, std::abs(s.p2(k, k) * scale - 1.0));
      const double gram_kk = 0.5 * (1.0 - std::exp(-2.0 * d(k) * s.r));
      worst_diag = std::max(
          worst_diag, std::abs(s.gram(k, k) * scale * scale - gram_kk));
    }
  }
  add_bound(checks, "diagonal-closed-form", worst_diag, 1e-12);

  // energy identity and positivity across seeded systems
  SeededRng rng(cfg.seed, "systems");
  double worst_identity = 0.0, worst_eig = 0.0;
  for (std::int64_t t = 0; t < trials; ++t) {
    const auto sys = random_system(rng, m);
    const cplx lambda(rng.uniform(-1.0, 1.0), rng.uniform(0.3, 1.5));
    const double r_end = sys.a2.support_end() + 0.5;
    const auto traj =
        propagate_matrix(sys, lambda, r_end, quarter_checkpoints(r_end));
    worst_identity =
        std::max(worst_identity, self_identity_residual(traj));
    for (const auto& s : traj.checkpoints) {
      const Eigen::MatrixXcd q = s.p2.adjoint() * s.p2 -
                                 s.p1.adjoint() * s.p1;
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(
          0.5 * (q + q.adjoint()));
      const double scale = 1.0 + s.p2.squaredNorm();
      worst_eig =
          std::max(worst_eig, -eig.eigenvalues().minCoeff() / scale);
    }
  }
  add_bound(checks, "identity-residual", worst_identity, 1e-7);
  add_check(checks, "psd-margin", worst_eig <= 1e-8, -worst_eig, -1e-8,
            "normalized smallest eigenvalue of P2*P2 - P1*P1");

  // two-point energy bilinear form on one demo system
  SeededRng demo_rng(cfg.seed, "demo");
  const auto demo = random_system(demo_rng, m);
  const double demo_end = demo.a2.support_end() + 0.5;
  const auto pair = propagate_pair(demo, cplx(0.0, 1.0), cplx(0.0, 2.0),
                                   demo_end, quarter_checkpoints(demo_end));
  add_bound(checks, "bilinear-residual", lagrange_bilinear(pair), 1e-7);

  // m = 1 embedding against the scalar solver on a fixed profile
  std::vector<PulseSegment> segs;
  segs.push_back(make_segment(0.0, 1.2, cplx(0.8, -0.3)));
  segs.push_back(make_segment(1.5, 0.7, cplx(-1.1, 0.6)));
  segs.push_back(make_segment(2.2, 1.0, cplx(0.4, 0.4)));
  const CoefficientProfile scalar_profile((std::vector<PulseSegment>(segs)));
  const auto esys = krein_embedding(scalar_profile);
  const cplx elambda(0.6, 0.9);
  const auto cps = quarter_checkpoints(3.6);
  const auto st = propagate(scalar_profile, elambda, 3.6, cps);
  const auto mt = propagate_matrix(esys, elambda, 3.6, cps);
  double worst_embed = 0.0;
  for (std::size_t i = 0; i < st.checkpoints.size(); ++i) {
    const auto& a = st.checkpoints[i];
    const auto& b = mt.checkpoints[i];
    const double sa = std::exp(a.log_scale), sb = std::exp(b.log_scale);
    worst_embed = std::max(
        worst_embed, std::abs(b.p1(0, 0) * sb - a.p * sa) /
                         (1.0 + std::abs(a.p * sa)));
    worst_embed = std::max(
        worst_embed, std::abs(b.p2(0, 0) * sb - a.p_star * sa) /
                         (1.0 + std::abs(a.p_star * sa)));
  }
  add_bound(checks, "scalar-embedding", worst_embed, 1e-9);

  // growth-rate bound along a smooth coupling
  Eigen::MatrixXcd base(2, 2);
  base << cplx(0.5, 0.2), cplx(-0.3, 0.4), cplx(0.2, -0.1), cplx(0.6, 0.0);
  const MatrixProfile a2_smooth(
      2,
      [base](double r) {
        return Eigen::MatrixXcd(2.0 / ((1.0 + r) * (1.0 + r)) * base);
      },
      12.0);
  Eigen::VectorXd d2(2);
  d2 << 1.0, 1.5;
  const auto smooth_sys = make_system(d2, MatrixProfile(2), a2_smooth);
  std::vector<double> smooth_cps;
  for (int k = 1; k <= 16; ++k) smooth_cps.push_back(0.5 * k);
  const auto smooth_traj =
      propagate_matrix(smooth_sys, cplx(0.3, 0.8), 8.0, smooth_cps);
  const double margin = log_norm_bound_check(smooth_traj);
  add_check(checks, "log-norm-margin", margin >= -1e-6, margin, -1e-6,
            "4||A2|| minus the observed log growth slope");

  values["identity_residual"] = worst_identity;
  values["bilinear_residual"] = lagrange_bilinear(pair);
  const auto demo_traj = propagate_matrix(
      demo, cplx(0.0, 1.0), demo_end, quarter_checkpoints(demo_end));
  write_text_file((dir / "matrix_trajectory.csv").string(),
                  write_matrix_trajectory_csv(demo_traj));
}

// --------------------------------------------------------------- discrete

void run_discrete(const ExperimentConfig& cfg, const fs::path& dir,
                  std::vector<CheckResult>& checks, ordered_json& values) {
  const auto n_max = cfg.integer("n_max");
  if (n_max < 1000)
    throw std::invalid_argument("discrete needs n_max >= 1000");

  // free recursion is exactly the monomials
  const cplx z0(0.55, 0.3);
  const auto mono = evaluate_polys(verblunsky_zero(), z0, 50);
  double worst_mono = 0.0;
  cplx zn(1.0, 0.0);
  for (const auto& pt : mono.points) {
    const double scale = std::exp(pt.log_scale);
    worst_mono = std::max(worst_mono, std::abs(pt.phi * scale - zn));
    worst_mono =
        std::max(worst_mono, std::abs(pt.phi_star * scale - 1.0));
    zn *= z0;
  }
  add_bound(checks, "monomials", worst_mono, 1e-13);

  double worst_energy = 0.0;
  for (const auto& seq :
       {verblunsky_geometric(cplx(0.4, 0.3), 0.9), verblunsky_power(2.0),
        verblunsky_power(0.7), verblunsky_phase_drift(0.5)})
    for (const cplx z : {cplx(0.9, 0.0), cplx(-0.63, 0.64), cplx(0.0, 0.3)})
      worst_energy = std::max(
          worst_energy,
          discrete_energy_check(evaluate_polys(seq, z, n_max, 50)));
  add_bound(checks, "energy-identity", worst_energy, 1e-10);

  // square-summable side: phi* is Cauchy
  const auto summable = verblunsky_power(2.0);
  double prev = kInf, last = 0.0;
  bool shrinking = true;
  for (std::int64_t n : {400, 800, 1600}) {
    const auto at_n = evaluate_polys(summable, cplx(0.0, 0.5), n).points;
    const auto at_2n =
        evaluate_polys(summable, cplx(0.0, 0.5), 2 * n).points;
    last = std::abs(at_2n.back().phi_star *
                        std::exp(at_2n.back().log_scale) -
                    at_n.back().phi_star * std::exp(at_n.back().log_scale));
    shrinking = shrinking && last < prev;
    prev = last;
  }
  add_check(checks, "cauchy-when-summable", shrinking && last <= 1e-3, last,
            1e-3, "phi* differences across doubling n");

  // divergent side: the running energy sum keeps growing
  const auto rough = verblunsky_power(0.5);
  const auto run =
      evaluate_polys(rough, cplx(0.5, 0.0), n_max, n_max / 10);
  const auto sum_at = [&run](std::size_t i) {
    return run.points[i].sum_sq *
           std::exp(2.0 * run.points[i].log_scale);
  };
  const double growth = sum_at(run.points.size() - 1) / sum_at(1);
  add_check(checks, "divergence-when-rough", growth >= 10.0, growth, 10.0,
            "energy sum growth over the final decade of steps");

  values["energy_residual"] = worst_energy;
  values["divergence_growth"] = growth;
  write_text_file((dir / "poly.csv").string(), write_poly_csv(run));
}

// --------------------------------------------------------------- isometry

void run_isometry(const ExperimentConfig& cfg, const fs::path& dir,
                  std::vector<CheckResult>& checks, ordered_json& values) {
  IsometryOptions opt;
  opt.lambda_window = cfg.real("window");
  opt.lambda_step = cfg.real("step");
  opt.r_nodes = static_cast<int>(cfg.integer("r_nodes"));
  if (!(opt.lambda_window > 0.0) || !(opt.lambda_step > 0.0) ||
      opt.r_nodes < 2 || opt.r_nodes % 2 != 0)
    throw std::invalid_argument("isometry grid parameters out of range");
  const auto box = [](double) { return cplx(1.0, 0.0); };

  const CoefficientProfile zero;
  const auto free_rep = verify_isometry(zero, {box}, 1.0, opt);
  add_bound(checks, "fourier-defect", free_rep[0].defect, 0.01,
            "Plancherel defect of the indicator of [0,1], free system");

  std::vector<PulseSegment> segs;
  segs.push_back(make_segment(0.2, 0.8, cplx(0.4, 0.2)));
  const CoefficientProfile general((std::vector<PulseSegment>(segs)));
  const auto gen_rep = verify_isometry(general, {box}, 1.0, opt);
  add_check(checks, "general-defect", true, gen_rep[0].defect, kInf,
            "reported, not asserted");

  values["fourier_defect"] = free_rep[0].defect;
  values["general_defect"] = gen_rep[0].defect;
  std::string csv = "case,norm_f,norm_uf,defect\n";
  int idx = 0;
  for (const auto* rep : {&free_rep[0], &gen_rep[0]}) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", idx++,
                  rep->norm_f, rep->norm_uf, rep->defect);
    csv += buf;
  }
  write_text_file((dir / "isometry.csv").string(), csv);
}

// ----------------------------------------------------------------- cesaro

void run_cesaro(const ExperimentConfig& cfg, const fs::path& dir,
                std::vector<CheckResult>& checks, ordered_json& values) {
  const auto n_max = cfg.integer("n_max");
  const cplx lambda0 = cfg.complex_value("lambda0");
  const CoefficientProfile zero;
  const double flat_err =
      std::abs(cesaro_pi(zero, lambda0, 32.0) - cplx(1.0, 0.0));
  add_bound(checks, "flat-average", flat_err, 1e-14,
            "free system average of p* is 1");

  const auto run = thm62_build_and_run(n_max, lambda0);
  const auto& rows = run.diag.rows;

  // Cauchy-window probe: lower bound on the diameter of the averaged
  // values over a trailing window, relative to their mean modulus
  const auto window_spread = [&rows](std::size_t from) {
    double re_lo = kInf, re_hi = -kInf, im_lo = kInf, im_hi = -kInf;
    KahanSum mean;
    for (std::size_t i = from; i < rows.size(); ++i) {
      const cplx c = rows[i].cesaro;
      re_lo = std::min(re_lo, c.real());
      re_hi = std::max(re_hi, c.real());
      im_lo = std::min(im_lo, c.imag());
      im_hi = std::max(im_hi, c.imag());
      mean.add(std::abs(c));
    }
    const double diam_lower = std::max(re_hi - re_lo, im_hi - im_lo);
    return diam_lower /
           (mean.value() / static_cast<double>(rows.size() - from));
  };
  const double spread_half = window_spread(rows.size() / 2);
  const double spread_quarter = window_spread(3 * rows.size() / 4);
  const bool oscillates = spread_half > 0.01 && spread_quarter > 0.01;
  const std::string verdict = oscillates ? "oscillates" : "settles";
  add_check(checks, "oscillation-emitted", oscillates, spread_half, 0.01,
            "average classified '" + verdict +
                "'; trailing windows keep a spread above 1%");
  values["cesaro_classification"] = verdict;
  values["spread_half"] = spread_half;
  values["spread_quarter"] = spread_quarter;

  std::string csv = "n,r,cesaro_re,cesaro_im,cesaro_abs\n";
  const auto kept = subsample(rows, 1001);
  for (const auto& row : kept) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(row.n), row.r, row.cesaro.real(),
                  row.cesaro.imag(), std::abs(row.cesaro));
    csv += buf;
  }
  write_text_file((dir / "cesaro.csv").string(), csv);
}

}  // namespace

bool ExperimentResult::all_pass() const {
  for (const CheckResult& c : checks)
    if (!c.pass) return false;
  return true;
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::string& output_root) {
  const fs::path dir = fs::path(output_root) / config.out_dir;
  fs::create_directories(dir);

  ExperimentResult result;
  result.run_dir = dir.string();
  ordered_json values = ordered_json::object();

  if (config.experiment == "fourier")
    run_fourier(config, dir, result.checks, values);
  else if (config.experiment == "l2-decay")
    run_l2_decay(config, dir, result.checks, values);
  else if (config.experiment == "thm61")
    run_thm61(config, dir, result.checks, values);
  else if (config.experiment == "thm62")
    run_thm62(config, dir, result.checks, values);
  else if (config.experiment == "sakhnovich-demo")
    run_sakhnovich(config, dir, result.checks, values);
  else if (config.experiment == "discrete")
    run_discrete(config, dir, result.checks, values);
  else if (config.experiment == "isometry")
    run_isometry(config, dir, result.checks, values);
  else if (config.experiment == "cesaro")
    run_cesaro(config, dir, result.checks, values);
  else
    throw std::invalid_argument("unknown experiment: " + config.experiment);

  ordered_json summary;
  summary["experiment"] = config.experiment;
  summary["seed"] = config.seed;
  summary["all_pass"] = result.all_pass();
  summary["checks"] = ordered_json::array();
  for (const CheckResult& c : result.checks) {
    ordered_json jc;
    jc["name"] = c.name;
    jc["pass"] = c.pass;
    jc["measured"] = c.measured;
    jc["budget"] = c.budget;
    if (!c.detail.empty()) jc["detail"] = c.detail;
    summary["checks"].push_back(jc);
  }
  summary["values"] = values;
  write_text_file((dir / "summary.json").string(), summary.dump(2) + "\n");
  write_text_file((dir / "resolved_config.txt").string(),
                  resolved_text(config));
  return result;
}

CompareOutcome regression_compare(const std::string& run_dir,
                                  const std::string& golden_dir) {
  if (!fs::is_directory(run_dir))
    throw std::invalid_argument("run directory missing: " + run_dir);
  if (!fs::is_directory(golden_dir))
    throw std::invalid_argument("golden directory missing: " + golden_dir);

  // golden-side tolerance table: "<file> <column|*> <abs tolerance>"
  struct Tolerance {
    std::string file, column;
    double tol;
  };
  std::vector<Tolerance> tolerances;
  const fs::path tol_path = fs::path(golden_dir) / "compare_tolerances.txt";
  if (fs::exists(tol_path)) {
    std::istringstream in(read_text_file(tol_path.string()));
    std::string file, column;
    double tol = 0.0;
    while (in >> file >> column >> tol)
      tolerances.push_back({file, column, tol});
  }
  const auto tolerance_for = [&tolerances](const std::string& file,
                                           const std::string& column) {
    for (const Tolerance& t : tolerances)
      if (t.file == file && (t.column == "*" || t.column == column))
        return t.tol;
    return 0.0;
  };

  CompareOutcome out;
  std::vector<fs::path> names;
  for (const auto& entry : fs::directory_iterator(golden_dir))
    if (entry.is_regular_file() &&
        entry.path().filename() != "compare_tolerances.txt")
      names.push_back(entry.path().filename());
  std::sort(names.begin(), names.end());

  for (const fs::path& name : names) {
    const fs::path run_file = fs::path(run_dir) / name;
    if (!fs::exists(run_file)) {
      out.match = false;
      out.notes.push_back("missing in run dir: " + name.string());
      continue;
    }
    const std::string golden_text =
        read_text_file((fs::path(golden_dir) / name).string());
    const std::string run_text = read_text_file(run_file.string());
    if (name.extension() != ".csv") {
      if (golden_text != run_text) {
        out.match = false;
        out.notes.push_back("content differs: " + name.string());
      }
      continue;
    }
    CsvTable golden, run;
    try {
      golden = read_csv_numeric(golden_text);
      run = read_csv_numeric(run_text);
    } catch (const std::invalid_argument& err) {
      out.match = false;
      out.notes.push_back(name.string() + ": " + err.what());
      continue;
    }
    if (golden.header != run.header || golden.rows.size() != run.rows.size()) {
      out.match = false;
      out.notes.push_back("table shape differs: " + name.string());
      continue;
    }
    for (std::size_t col = 0; col < golden.header.size(); ++col) {
      double worst = 0.0;
      std::size_t worst_row = 0;
      for (std::size_t row = 0; row < golden.rows.size(); ++row) {
        const double diff =
            std::abs(golden.rows[row][col] - run.rows[row][col]);
        if (diff > worst) {
          worst = diff;
          worst_row = row;
        }
      }
      const double tol = tolerance_for(name.string(), golden.header[col]);
      if (worst > tol) {
        out.match = false;
        out.notes.push_back(name.string() + " column " + golden.header[col] +
                            " row " + std::to_string(worst_row) +
                            ": max diff " + std::to_string(worst) +
                            " over tolerance " + std::to_string(tol));
      } else if (worst > 0.0) {
        out.notes.push_back(name.string() + " column " + golden.header[col] +
                            ": max diff " + std::to_string(worst) +
                            " within tolerance " + std::to_string(tol));
      }
    }
  }
  return out;
}

}  // namespace krein
