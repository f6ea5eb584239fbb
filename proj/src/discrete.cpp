#include "krein/discrete.hpp"

#include <cmath>
#include <stdexcept>

#include "krein/spectral.hpp"

namespace krein {

namespace {

constexpr double kRenormHi = 1e100;
constexpr double kRenormLo = 1e-100;

}  // namespace

VerblunskySeq verblunsky_zero() {
  return {[](std::int64_t) { return cplx(0.0, 0.0); }, true, "zero"};
}

VerblunskySeq verblunsky_geometric(cplx a0, double q) {
  if (std::abs(a0) >= 1.0 || std::abs(q) >= 1.0)
    throw std::invalid_argument("geometric family needs |a0| < 1, |q| < 1");
  return {[a0, q](std::int64_t n) {
            return a0 * std::pow(q, static_cast<double>(n));
          },
          true, "geometric"};
}

VerblunskySeq verblunsky_power(double s, double scale) {
  if (s <= 0.0 || std::abs(scale) >= std::pow(2.0, s))
    throw std::invalid_argument("power family needs s > 0 and |a_0| < 1");
  return {[s, scale](std::int64_t n) {
            return cplx(scale * std::pow(static_cast<double>(n) + 2.0, -s),
                        0.0);
          },
          s > 0.5, "power"};
}

VerblunskySeq verblunsky_phase_drift(double s) {
  if (s <= 0.0) throw std::invalid_argument("phase-drift family needs s > 0");
  return {[s](std::int64_t n) {
            const double x = static_cast<double>(n) + 2.0;
            return std::polar(std::pow(x, -s), std::log(x));
          },
          s > 0.5, "phase-drift"};
}

PolyPair szego_step(const PolyPair& pair, cplx a_n) {
  const double a2 = std::norm(a_n);
  if (!(a2 < 1.0)) throw std::invalid_argument("|a_n| must be < 1");
  const double g = 1.0 / std::sqrt(1.0 - a2);
  PolyPair next;
  next.n = pair.n + 1;
  next.z = pair.z;
  next.phi = g * (pair.z * pair.phi - std::conj(a_n) * pair.phi_star);
  next.phi_star = g * (pair.phi_star - a_n * pair.z * pair.phi);
  return next;
}

PolySequence evaluate_polys(const VerblunskySeq& seq, cplx z,
                            std::int64_t n_steps, std::int64_t stride) {
  if (std::abs(z) > 1.0 + 1e-15)
    throw std::invalid_argument("|z| must be <= 1");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  PolySequence out;
  out.z = z;
  cplx phi(1.0, 0.0), phi_star(1.0, 0.0);
  double sum_sq = 0.0;  // sum_{k<n} |phi_k|^2, current hat frame
  double sigma = 0.0;
  out.points.push_back({0, phi, phi_star, sum_sq, sigma});
  for (std::int64_t n = 0; n < n_steps; ++n) {
    sum_sq += std::norm(phi);
    PolyPair pair{n, z, phi, phi_star};
    const PolyPair next = szego_step(pair, seq.a(n));
    phi = next.phi;
    phi_star = next.phi_star;
    if (!finite(phi) || !finite(phi_star))
      throw NumericalFault("non-finite polynomial at n = " + std::to_string(n));
    const double m = std::max(std::abs(phi), std::abs(phi_star));
    if (m != 0.0 && (m <= kRenormLo || m >= kRenormHi)) {
      const double down = 1.0 / m;
      phi *= down;
      phi_star *= down;
      sum_sq *= down * down;
      sigma += std::log(m);
    }
    if ((n + 1) % stride == 0 || n + 1 == n_steps)
      out.points.push_back({n + 1, phi, phi_star, sum_sq, sigma});
  }
  return out;
}

double discrete_energy_check(const PolySequence& seq) {
  const double w = 1.0 - std::norm(seq.z);
  double worst = 0.0;
  for (const auto& pt : seq.points) {
    const double lhs = std::norm(pt.phi_star) - std::norm(pt.phi);
    const double rhs = w * pt.sum_sq;
    const double res = std::abs(lhs - rhs) / (1.0 + std::norm(pt.phi_star));
    worst = std::max(worst, res);
  }
  return worst;
}

std::vector<AnalogyRow> analogy_table(const CoefficientProfile& profile,
                                      const VerblunskySeq& seq,
                                      const AnalogyParams& params) {
  std::vector<AnalogyRow> rows;

  // continuous side: geometric checkpoint grid out to r_end
  std::vector<double> rs;
  for (double r = params.r_end / 64.0; r < params.r_end; r *= 1.25)
    rs.push_back(r);
  rs.push_back(params.r_end);
  const auto diag = limit_diagnostics(profile, params.lambda, rs);
  const auto traj = propagate(profile, params.lambda, params.r_end, rs);
  rows.push_back({"continuous", "profile", diag.classification,
                  lagrange_residual(traj), diag.rows.back().modulus});

  // discrete side: same classifier on |phi*_n| and its unwrapped phase
  const std::int64_t stride = std::max<std::int64_t>(1, params.n_steps / 512);
  const auto polys = evaluate_polys(seq, params.z, params.n_steps, stride);
  std::vector<double> mods, phases;
  mods.reserve(polys.points.size());
  phases.reserve(polys.points.size());
  double phase = 0.0, prev_arg = 0.0;
  for (std::size_t i = 0; i < polys.points.size(); ++i) {
    const auto& pt = polys.points[i];
    mods.push_back(std::log(std::abs(pt.phi_star)) + pt.log_scale);
    const double arg = std::arg(pt.phi_star);
    if (i > 0) {
      double d = arg - prev_arg;
      while (d > 3.141592653589793) d -= 2.0 * 3.141592653589793;
      while (d < -3.141592653589793) d += 2.0 * 3.141592653589793;
      phase += d;
    } else {
      phase = arg;
    }
    prev_arg = arg;
    phases.push_back(phase);
  }
  // classifier works on moduli; exponentiate the bounded log values
  double max_log = mods.front();
  for (double v : mods) max_log = std::max(max_log, v);
  std::vector<double> bounded;
  bounded.reserve(mods.size());
  for (double v : mods) bounded.push_back(std::exp(v - max_log));
  const auto& last = polys.points.back();
  rows.push_back({"discrete", seq.name, classify_sequence(bounded, phases),
                  discrete_energy_check(polys),
                  std::abs(last.phi_star) * std::exp(last.log_scale)});
  return rows;
}

}  // namespace krein
