#include "krein/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Core>
#include <unsupported/Eigen/MatrixFunctions>

namespace krein {

namespace {

constexpr double kPi = std::numbers::pi;

double true_density(const KreinState& s) {
  // 1 / (2 pi |p*|^2), |p*| = |p_star_hat| e^{log_scale}
  const double mod = std::abs(s.p_star) * std::exp(s.log_scale);
  return 1.0 / (2.0 * kPi * mod * mod);
}

// nearest-branch unwrap: successive differences folded into (-pi, pi]
std::vector<double> unwrap_phases(const std::vector<double>& raw) {
  std::vector<double> out(raw.size());
  if (raw.empty()) return out;
  out[0] = raw[0];
  for (std::size_t k = 1; k < raw.size(); ++k) {
    double d = raw[k] - raw[k - 1];
    d -= 2.0 * kPi * std::round(d / (2.0 * kPi));
    out[k] = out[k - 1] + d;
  }
  return out;
}

double mean_of(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  KahanSum s;
  for (std::size_t i = lo; i < hi; ++i) s.add(v[i]);
  return hi > lo ? s.value() / static_cast<double>(hi - lo) : 0.0;
}

// int_0^delta e^{A* s} C1 e^{A s} ds with C1 = diag(1, 0): the |p|^2 mass
// a constant segment adds, evaluated on true-frame state y via y* M y
Eigen::Matrix2cd hardy_weight(cplx c, cplx lambda, double delta) {
  Eigen::Matrix2cd a;
  a << cplx(0.0, 1.0) * lambda, -std::conj(c), -c, cplx(0.0, 0.0);
  Eigen::Matrix4cd z = Eigen::Matrix4cd::Zero();
  z.topLeftCorner<2, 2>() = -a.adjoint() * delta;
  z(0, 2) = delta;  // C1 delta
  z.bottomRightCorner<2, 2>() = a * delta;
  const Eigen::Matrix4cd e = z.exp();
  const Eigen::Matrix2cd t = (a * delta).exp();
  return t.adjoint() * e.topRightCorner<2, 2>();
}

}  // namespace

SpectralReport density_at(const CoefficientProfile& profile, double r,
                          const std::vector<double>& lambda_grid,
                          RunMode mode) {
  if (!(r > 0.0)) throw std::invalid_argument("r must be > 0");
  if (lambda_grid.empty())
    throw std::invalid_argument("lambda grid must be nonempty");
  SpectralReport report;
  report.lambda_grid = lambda_grid;
  report.density.resize(lambda_grid.size());
  report.r_used = r;
  std::vector<std::string> faults(lambda_grid.size());
  for_each_index(static_cast<std::int64_t>(lambda_grid.size()), mode,
                 [&](std::int64_t i) {
                   try {
                     const auto traj =
                         propagate(profile, cplx(lambda_grid[i], 0.0), r);
                     const double d = true_density(traj.checkpoints.back());
                     if (!std::isfinite(d) || !(d > 0.0))
                       throw NumericalFault("density not positive-finite");
                     report.density[i] = d;
                   } catch (const std::exception& e) {
                     faults[i] = e.what();
                   }
                 });
  for (std::size_t i = 0; i < faults.size(); ++i)
    if (!faults[i].empty())
      throw NumericalFault("density at lambda = " +
                           std::to_string(lambda_grid[i]) + ": " + faults[i]);
  return report;
}

double skk_integral(const SpectralReport& report) {
  const auto& grid = report.lambda_grid;
  const auto& den = report.density;
  if (grid.size() != den.size() || grid.size() < 2)
    throw std::invalid_argument("report needs a grid with >= 2 points");
  KahanSum acc;
  const auto f = [&](std::size_t i) {
    return std::abs(std::log(den[i])) / (1.0 + grid[i] * grid[i]);
  };
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    acc.add(0.5 * (f(i) + f(i + 1)) * (grid[i + 1] - grid[i]));
  return acc.value();
}

double skk_tail_bound(const SpectralReport& report) {
  const auto& grid = report.lambda_grid;
  const auto& den = report.density;
  if (grid.size() != den.size() || grid.empty())
    throw std::invalid_argument("report is empty");
  const double left = std::abs(std::log(den.front())) *
                      (std::atan(grid.front()) + kPi / 2.0);
  const double right = std::abs(std::log(den.back())) *
                       (kPi / 2.0 - std::atan(grid.back()));
  return left + right;
}

HardyResult hardy_integral(const CoefficientProfile& profile, cplx lambda,
                           double r_end) {
  if (!(lambda.imag() > 0.0))
    throw std::invalid_argument("hardy integral needs Im lambda > 0");
  if (!(r_end > 0.0)) throw std::invalid_argument("r_end must be > 0");
  const auto traj = propagate(profile, lambda, r_end, {r_end / 2.0, r_end});
  const auto value_at = [&](const KreinState& s) {
    return s.energy_integral * std::exp(2.0 * s.log_scale) /
           (2.0 * lambda.imag());
  };
  const auto& half = traj.checkpoints[traj.checkpoints.size() - 2];
  const auto& full = traj.checkpoints.back();
  return {value_at(full), value_at(full) - value_at(half)};
}

std::string classify_sequence(const std::vector<double>& modulus,
                              const std::vector<double>& phase) {
  if (modulus.size() != phase.size())
    throw std::invalid_argument("modulus/phase length mismatch");
  const std::size_t n = modulus.size();
  if (n < 4) return "modulus-oscillates";
  const std::size_t w0 = n / 2;  // trailing half window
  double mx = modulus[w0], mn = modulus[w0];
  for (std::size_t i = w0; i < n; ++i) {
    mx = std::max(mx, modulus[i]);
    mn = std::min(mn, modulus[i]);
  }
  const double mean = mean_of(modulus, w0, n);
  const double spread = mean > 0.0 ? (mx - mn) / mean : 0.0;
  const double drift = std::abs(phase[n - 1] - phase[w0]);
  if (spread <= 0.01)
    return drift <= 0.1 ? "converges" : "modulus-converges-phase-drifts";
  const std::size_t mid = w0 + (n - w0) / 2;
  const double m1 = mean_of(modulus, w0, mid);
  const double m2 = mean_of(modulus, mid, n);
  if (m1 > 0.0) {
    const double growth = m2 / m1;
    if (growth >= 1.5 || growth <= 1.0 / 1.5) return "diverges";
  }
  return "modulus-oscillates";
}

LimitDiagnostics limit_diagnostics(const CoefficientProfile& profile,
                                   cplx lambda,
                                   const std::vector<double>& checkpoint_rs) {
  if (checkpoint_rs.empty())
    throw std::invalid_argument("need at least one checkpoint");
  if (!std::is_sorted(checkpoint_rs.begin(), checkpoint_rs.end()))
    throw std::invalid_argument("checkpoints must be sorted");
  const auto traj =
      propagate(profile, lambda, checkpoint_rs.back(), checkpoint_rs);
  LimitDiagnostics out;
  std::vector<double> raw_phase, log_mod;
  for (std::size_t i = 0; i < traj.checkpoints.size(); ++i) {
    const auto& s = traj.checkpoints[i];
    const double scale = std::exp(s.log_scale);
    DiagnosticsRow row;
    row.n = static_cast<std::int64_t>(i);
    row.r = s.r;
    row.p_star = s.p_star * scale;
    row.modulus = std::abs(s.p_star) * scale;
    row.phase = std::arg(s.p_star);
    row.p = s.p * scale;
    row.cesaro = s.r > 0.0 ? s.cesaro_integral * scale / s.r : s.p_star * scale;
    raw_phase.push_back(row.phase);
    log_mod.push_back(s.log_scale + std::log(std::abs(s.p_star)));
    out.rows.push_back(row);
  }
  const auto phases = unwrap_phases(raw_phase);
  for (std::size_t i = 0; i < phases.size(); ++i) out.rows[i].phase = phases[i];
  // classify on rescaled moduli so huge log scales cannot overflow
  const double top = *std::max_element(log_mod.begin(), log_mod.end());
  std::vector<double> bounded;
  bounded.reserve(log_mod.size());
  for (double lm : log_mod) bounded.push_back(std::exp(lm - top));
  out.classification = classify_sequence(bounded, phases);
  return out;
}

cplx cesaro_pi(const CoefficientProfile& profile, cplx lambda, double r_end) {
  if (!(r_end > 0.0)) throw std::invalid_argument("r_end must be > 0");
  const auto traj = propagate(profile, lambda, r_end);
  const auto& s = traj.checkpoints.back();
  return s.cesaro_integral * std::exp(s.log_scale) / r_end;
}

double phase_drift_model(std::int64_t n_lo, std::int64_t n_hi) {
  if (n_lo < 3 || n_hi < n_lo)
    throw std::invalid_argument("need 3 <= n_lo <= n_hi");
  KahanSum acc;
  for (std::int64_t n = n_lo; n <= n_hi; ++n) {
    const double x = static_cast<double>(n);
    acc.add(1.0 / (x * std::log(x)));
  }
  return acc.value();
}

std::int64_t predict_n_for_drift(std::int64_t n_lo, double target,
                                 std::int64_t limit) {
  if (n_lo < 3) throw std::invalid_argument("need n_lo >= 3");
  if (!(target > 0.0)) return n_lo;
  KahanSum acc;
  for (std::int64_t n = n_lo; n <= limit; ++n) {
    const double x = static_cast<double>(n);
    acc.add(1.0 / (x * std::log(x)));
    if (acc.value() >= target) return n;
  }
  return -1;
}

std::vector<IsometryReport> verify_isometry(
    const CoefficientProfile& profile,
    const std::vector<std::function<cplx(double)>>& test_functions,
    double r_support, const IsometryOptions& opt, RunMode mode) {
  if (!(r_support > 0.0))
    throw std::invalid_argument("r_support must be > 0");
  if (opt.r_nodes < 2 || opt.r_nodes % 2 != 0)
    throw std::invalid_argument("r_nodes must be even and >= 2");
  if (!(opt.lambda_step > 0.0) || !(opt.lambda_window > 0.0))
    throw std::invalid_argument("lambda window and step must be > 0");
  const std::size_t nf = test_functions.size();
  if (nf == 0) return {};

  // Simpson nodes in r shared by all test functions
  const int nr = opt.r_nodes;
  const double hr = r_support / nr;
  std::vector<double> r_nodes_v(nr + 1);
  std::vector<double> wr(nr + 1);
  for (int j = 0; j <= nr; ++j) {
    r_nodes_v[j] = hr * j;
    wr[j] = (j == 0 || j == nr) ? hr / 3.0
                                : (j % 2 == 1 ? 4.0 * hr / 3.0 : 2.0 * hr / 3.0);
  }
  std::vector<std::vector<cplx>> f_vals(nf, std::vector<cplx>(nr + 1));
  for (std::size_t k = 0; k < nf; ++k)
    for (int j = 0; j <= nr; ++j) f_vals[k][j] = test_functions[k](r_nodes_v[j]);

  const double r_eval = r_support + opt.r_eval_margin;
  std::vector<double> marks = r_nodes_v;
  marks.push_back(r_eval);

  // odd lambda point count so Simpson applies over an even panel count
  const std::int64_t half =
      std::llround(opt.lambda_window / opt.lambda_step);
  const std::int64_t npts = 2 * half + 1;
  std::vector<double> density(npts);
  std::vector<std::vector<double>> uf_sq(nf, std::vector<double>(npts));
  std::vector<std::string> faults(npts);

  for_each_index(npts, mode, [&](std::int64_t i) {
    try {
      const double lam = (static_cast<double>(i) - half) * opt.lambda_step;
      const auto traj = propagate(profile, cplx(lam, 0.0), r_eval, marks);
      const auto& cps = traj.checkpoints;
      // nodes come back in order: nr+1 interior marks then r_eval
      if (cps.size() != static_cast<std::size_t>(nr + 2))
        throw NumericalFault("checkpoint bookkeeping mismatch");
      density[i] = true_density(cps.back());
      for (std::size_t k = 0; k < nf; ++k) {
        cplx acc{0.0, 0.0};
        for (int j = 0; j <= nr; ++j) {
          const auto& s = cps[j];
          acc += wr[j] * f_vals[k][j] * s.p * std::exp(s.log_scale);
        }
        uf_sq[k][i] = std::norm(acc);
      }
    } catch (const std::exception& e) {
      faults[i] = e.what();
    }
  });
  for (std::int64_t i = 0; i < npts; ++i)
    if (!faults[i].empty())
      throw NumericalFault("isometry sweep: " + faults[i]);

  std::vector<IsometryReport> out(nf);
  for (std::size_t k = 0; k < nf; ++k) {
    KahanSum nf2;
    for (int j = 0; j <= nr; ++j)
      nf2.add(wr[j] * std::norm(f_vals[k][j]));
    KahanSum nu2;
    for (std::int64_t i = 0; i < npts; ++i) {
      const double wl = (i == 0 || i == npts - 1)
                            ? opt.lambda_step / 3.0
                            : (i % 2 == 1 ? 4.0 * opt.lambda_step / 3.0
                                          : 2.0 * opt.lambda_step / 3.0);
      nu2.add(wl * uf_sq[k][i] * density[i]);
    }
    IsometryReport rep;
    rep.norm_f = std::sqrt(std::max(0.0, nf2.value()));
    rep.norm_uf = std::sqrt(std::max(0.0, nu2.value()));
    if (!(rep.norm_f > 0.0))
      throw std::invalid_argument("test function has zero norm");
    rep.defect = std::abs(rep.norm_uf - rep.norm_f) / rep.norm_f;
    out[k] = rep;
  }
  return out;
}

Thm62RunResult thm62_build_and_run(
    std::int64_t n_max, cplx lambda0,
    const std::function<double(std::int64_t)>& delta_policy,
    double ratio_budget) {
  if (!(lambda0.imag() > 0.0))
    throw std::invalid_argument("thm62 run needs Im lambda0 > 0");
  if (n_max < 10) throw std::invalid_argument("n_max must be >= 10");
  const double im = lambda0.imag();

  Thm62RunResult out;
  out.schedule.n_min = 3;
  out.schedule.n_max = static_cast<int>(n_max);

  cplx p{1.0, 0.0}, ps{1.0, 0.0};
  double r = 0.0;
  KahanSum hardy;               // int |p|^2, quadrature route
  cplx ces{0.0, 0.0};           // int p*
  std::vector<double> raw_phase;
  double worst_c = 0.0;

  const auto apply_segment = [&](cplx c, double len) {
    // exact transfer in the true frame; thm62 moduli stay O(1)
    const auto t = constant_transfer(c, lambda0, len);
    const auto g = constant_segment_integral(c, lambda0, len);
    const Eigen::Matrix2cd w = hardy_weight(c, lambda0, len);
    const Eigen::Vector2cd y(p, ps);
    hardy.add((y.adjoint() * w * y)(0).real());
    ces += g.g21 * p + g.g22 * ps;
    const double scale = std::exp(t.segment_log_scale);
    const cplx pn = scale * (t.a11 * p + t.a12 * ps);
    const cplx psn = scale * (t.a21 * p + t.a22 * ps);
    p = pn;
    ps = psn;
    r += len;
    if (!finite(p) || !finite(ps))
      throw NumericalFault("thm62 state non-finite at r = " +
                           std::to_string(r));
  };

  for (std::int64_t n = 3; n <= n_max; ++n) {
    const auto par = thm62_schedule_params(static_cast<int>(n));
    const double delta_n = delta_policy(n);
    // closed-form gap: p* frozen, |p| contracts by e^{-im dr}
    double gap = 1.0;
    const double need = std::abs(p) / (delta_n * std::abs(ps));
    if (need > 1.0) gap = std::max(1.0, std::log(need) / im);
    hardy.add(std::norm(p) * -std::expm1(-2.0 * im * gap) / (2.0 * im));
    ces += ps * gap;
    p *= std::exp(cplx(0.0, 1.0) * lambda0 * gap);
    r += gap;

    out.schedule.eps.push_back(par.eps);
    out.schedule.b.push_back(par.b);
    out.schedule.xi.push_back(par.xi);
    out.schedule.delta.push_back(delta_n);
    out.schedule.r.push_back(r);

    DiagnosticsRow row;
    row.n = n;
    row.r = r;
    row.p_star = ps;
    row.modulus = std::abs(ps);
    row.phase = std::arg(ps);
    row.p = p;
    row.cesaro = r > 0.0 ? ces / r : ps;
    raw_phase.push_back(row.phase);
    out.diag.rows.push_back(row);

    const cplx ps_before = ps;
    apply_segment(-par.b, par.eps);
    apply_segment(std::conj(par.xi) * par.b, par.eps);

    const cplx ratio = ps / ps_before;
    out.pulse_ratios.push_back(ratio);
    const double ln = std::log(static_cast<double>(n));
    const cplx model = cplx(1.0, 0.0) + cplx(0.0, 1.0) / (static_cast<double>(n) * ln);
    const double cn = std::abs(ratio - model) * static_cast<double>(n) * ln * ln;
    worst_c = std::max(worst_c, cn);
    if (worst_c > ratio_budget)
      throw NumericalFault("thm62 ratio error exceeds budget at n = " +
                           std::to_string(n) +
                           " (C = " + std::to_string(worst_c) + ")");
  }

  out.ratio_error_const = worst_c;
  out.hardy_value = hardy.value();
  out.final_energy_identity =
      (std::norm(ps) - std::norm(p)) / (2.0 * im);

  const auto phases = unwrap_phases(raw_phase);
  std::vector<double> moduli;
  moduli.reserve(out.diag.rows.size());
  for (std::size_t i = 0; i < out.diag.rows.size(); ++i) {
    out.diag.rows[i].phase = phases[i];
    moduli.push_back(out.diag.rows[i].modulus);
  }
  out.diag.classification = classify_sequence(moduli, phases);
  return out;
}

}  // namespace krein
