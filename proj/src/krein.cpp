#include "krein/krein.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Core>
#include <unsupported/Eigen/MatrixFunctions>

namespace krein {

namespace {

constexpr double kRenormHi = 1e100;
constexpr double kRenormLo = 1e-100;
constexpr double kSmallOmega = 1e-4;  // |omega*delta| series cutoff

cplx ilam_half(cplx lambda) { return cplx(0.0, 0.5) * lambda; }

// principal square root with Re >= 0 (Im >= 0 on the cut)
cplx sqrt_principal(cplx z) {
  cplx s = std::sqrt(z);
  if (s.real() < 0.0 || (s.real() == 0.0 && s.imag() < 0.0)) s = -s;
  return s;
}

// (e^{z} - 1)/z with series fallback near z = 0
cplx expm1_over(cplx z) {
  if (std::abs(z) < kSmallOmega)
    return 1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0));
  return (std::exp(z) - 1.0) / z;
}

}  // namespace

TransferMatrix2 constant_transfer(cplx c, cplx lambda, double delta) {
  if (delta < 0.0) throw std::invalid_argument("delta must be >= 0");
  TransferMatrix2 t;
  if (delta == 0.0) return t;
  if (c == cplx(0.0, 0.0)) {
    // decoupled: p picks up e^{i lambda delta}, p_star is frozen
    t.a11 = std::exp(cplx(0.0, 1.0) * lambda * delta);
    t.a22 = cplx(1.0, 0.0);
    return t;
  }
  const cplx mu = ilam_half(lambda) * delta;  // i lambda delta / 2
  const cplx omega2 = std::norm(c) - 0.25 * lambda * lambda;
  const cplx w = sqrt_principal(omega2) * delta;  // Re w >= 0
  cplx ch, f;  // cosh(w) and sinh(w)/omega, shared scale factored out
  double sigma;
  if (std::abs(w) < kSmallOmega) {
    sigma = mu.real();
    const cplx w2 = w * w;
    ch = 1.0 + w2 * (0.5 + w2 / 24.0);
    f = delta * (1.0 + w2 * (1.0 / 6.0 + w2 / 120.0));
  } else {
    // scale e^{Re w} out of cosh/sinh so entries stay representable
    sigma = mu.real() + w.real();
    const cplx ep = std::exp(cplx(0.0, w.imag()));         // e^{w - Re w}
    const cplx em = std::exp(-w - w.real());               // e^{-w - Re w}
    ch = 0.5 * (ep + em);
    f = (0.5 * (ep - em)) * (delta / w);
  }
  const cplx phase = std::exp(cplx(0.0, mu.imag()));
  const cplx diag = ilam_half(lambda) * f;
  t.a11 = phase * (ch + diag);
  t.a12 = phase * (-f * std::conj(c));
  t.a21 = phase * (-f * c);
  t.a22 = phase * (ch - diag);
  t.segment_log_scale = sigma;
  return t;
}

SegmentIntegral2 constant_segment_integral(cplx c, cplx lambda, double delta) {
  if (delta < 0.0) throw std::invalid_argument("delta must be >= 0");
  if (c == cplx(0.0, 0.0)) {
    const cplx z = cplx(0.0, 1.0) * lambda * delta;
    return SegmentIntegral2{delta * expm1_over(z), cplx(0.0, 0.0),
                            cplx(0.0, 0.0), cplx(delta, 0.0)};
  }
  // upper-right block of exp([[A, I], [0, 0]] delta) is int_0^delta e^{As} ds
  Eigen::Matrix4cd z = Eigen::Matrix4cd::Zero();
  const cplx ilam = cplx(0.0, 1.0) * lambda;
  z(0, 0) = ilam * delta;
  z(0, 1) = -std::conj(c) * delta;
  z(1, 0) = -c * delta;
  z(0, 2) = delta;
  z(1, 3) = delta;
  const Eigen::Matrix4cd e = z.exp();
  return SegmentIntegral2{e(0, 2), e(0, 3), e(1, 2), e(1, 3)};
}

namespace {

// full working state of one march, hat values at common log_scale
struct PropState {
  double r;
  cplx p, ps;
  double sigma;
  double energy;  // e_hat
  cplx ces, pi;
};

PropState from_state(const KreinState& s) {
  return PropState{s.r,         s.p,   s.p_star, s.log_scale,
                   s.energy_integral, s.cesaro_integral, s.pi_integral};
}

KreinState to_state(const PropState& s, cplx lambda) {
  KreinState k;
  k.r = s.r;
  k.lambda = lambda;
  k.p = s.p;
  k.p_star = s.ps;
  k.log_scale = s.sigma;
  k.energy_integral = s.energy;
  k.cesaro_integral = s.ces;
  k.pi_integral = s.pi;
  return k;
}

void check_finite(const PropState& s) {
  if (!finite(s.p) || !finite(s.ps) || !std::isfinite(s.energy))
    throw NumericalFault("non-finite state at r = " + std::to_string(s.r));
}

void renormalize(PropState& s) {
  const double m = std::max(std::abs(s.p), std::abs(s.ps));
  if (m > kRenormLo && m < kRenormHi) return;
  if (m == 0.0) return;
  const double shift = std::log(m);
  const double down = 1.0 / m;
  s.p *= down;
  s.ps *= down;
  s.energy *= down * down;
  s.ces *= down;
  s.pi *= down;
  s.sigma += shift;
}

void apply_constant(PropState& s, cplx c, cplx lambda, double len,
                    bool imag_lambda_zero) {
  const TransferMatrix2 t = constant_transfer(c, lambda, len);
  const SegmentIntegral2 g = constant_segment_integral(c, lambda, len);
  const cplx ces_inc = g.g21 * s.p + g.g22 * s.ps;
  const cplx pi_inc = c * (g.g11 * s.p + g.g12 * s.ps);
  const double q_old = std::norm(s.ps) - std::norm(s.p);
  const cplx p_new = t.a11 * s.p + t.a12 * s.ps;
  const cplx ps_new = t.a21 * s.p + t.a22 * s.ps;
  const double ds = t.segment_log_scale;
  const double lin = std::exp(-ds);
  s.p = p_new;
  s.ps = ps_new;
  // energy on a constant segment comes from the identity, not quadrature;
  // for real lambda the true increment is exactly zero
  if (imag_lambda_zero) {
    s.energy *= lin * lin;
  } else {
    const double q_new = std::norm(s.ps) - std::norm(s.p);
    s.energy = q_new + lin * lin * (s.energy - q_old);
  }
  s.ces = lin * (s.ces + ces_inc);
  s.pi = lin * (s.pi + pi_inc);
  s.sigma += ds;
  s.r += len;
}

// ---- embedded Dormand-Prince 5(4) over smooth stretches ----

struct Y5 {
  cplx p, ps, ces, pi;
  double e;
};

Y5 operator+(const Y5& a, const Y5& b) {
  return {a.p + b.p, a.ps + b.ps, a.ces + b.ces, a.pi + b.pi, a.e + b.e};
}

Y5 operator*(double k, const Y5& y) {
  return {k * y.p, k * y.ps, k * y.ces, k * y.pi, k * y.e};
}

template <typename Coeff>
Y5 rhs(const Coeff& a_of_r, cplx lambda, double two_im_lambda, double r,
       const Y5& y) {
  const cplx a = a_of_r(r);
  return {cplx(0.0, 1.0) * lambda * y.p - std::conj(a) * y.ps,  // p'
          -a * y.p,                                             // p_star'
          y.ps,                                                 // cesaro'
          a * y.p,                                              // pi'
          two_im_lambda * std::norm(y.p)};                      // energy'
}

template <typename Coeff>
void adaptive_advance(PropState& s, const Coeff& a_of_r, cplx lambda,
                      double r_to, const AdaptiveOptions& opt) {
  const double two_im = 2.0 * lambda.imag();
  Y5 y{s.p, s.ps, s.ces, s.pi, s.energy};
  double r = s.r;
  double h = std::min({opt.max_step, r_to - r, 0.1});
  while (r < r_to) {
    h = std::min(h, r_to - r);
    if (!(h > 1e-14 * (1.0 + std::abs(r))))
      throw NumericalFault("step size collapsed at r = " + std::to_string(r));
    const Y5 k1 = rhs(a_of_r, lambda, two_im, r, y);
    const Y5 k2 = rhs(a_of_r, lambda, two_im, r + h / 5.0,
                      y + (h / 5.0) * k1);
    const Y5 k3 = rhs(a_of_r, lambda, two_im, r + 0.3 * h,
                      y + h * (3.0 / 40.0) * k1 + h * (9.0 / 40.0) * k2);
    const Y5 k4 =
        rhs(a_of_r, lambda, two_im, r + 0.8 * h,
            y + h * ((44.0 / 45.0) * k1 + (-56.0 / 15.0) * k2 +
                     (32.0 / 9.0) * k3));
    const Y5 k5 =
        rhs(a_of_r, lambda, two_im, r + (8.0 / 9.0) * h,
            y + h * ((19372.0 / 6561.0) * k1 + (-25360.0 / 2187.0) * k2 +
                     (64448.0 / 6561.0) * k3 + (-212.0 / 729.0) * k4));
    const Y5 k6 =
        rhs(a_of_r, lambda, two_im, r + h,
            y + h * ((9017.0 / 3168.0) * k1 + (-355.0 / 33.0) * k2 +
                     (46732.0 / 5247.0) * k3 + (49.0 / 176.0) * k4 +
                     (-5103.0 / 18656.0) * k5));
    const Y5 y5 =
        y + h * ((35.0 / 384.0) * k1 + (500.0 / 1113.0) * k3 +
                 (125.0 / 192.0) * k4 + (-2187.0 / 6784.0) * k5 +
                 (11.0 / 84.0) * k6);
    const Y5 k7 = rhs(a_of_r, lambda, two_im, r + h, y5);
    const Y5 y4 =
        y + h * ((5179.0 / 57600.0) * k1 + (7571.0 / 16695.0) * k3 +
                 (393.0 / 640.0) * k4 + (-92097.0 / 339200.0) * k5 +
                 (187.0 / 2100.0) * k6 + (1.0 / 40.0) * k7);
    // error controlled on the state pair against the trajectory norm
    const double scale =
        opt.abs_tol +
        opt.rel_tol * std::max({std::abs(y5.p), std::abs(y5.ps), 1.0});
    const double err =
        std::max(std::abs(y5.p - y4.p), std::abs(y5.ps - y4.ps)) / scale;
    if (err <= 1.0) {
      r += h;
      y = y5;
      if (!finite(y.p) || !finite(y.ps))
        throw NumericalFault("non-finite state at r = " + std::to_string(r));
      const double m = std::max(std::abs(y.p), std::abs(y.ps));
      if (m != 0.0 && (m <= kRenormLo || m >= kRenormHi)) {
        const double shift = std::log(m);
        const double down = 1.0 / m;
        y.p *= down;
        y.ps *= down;
        y.ces *= down;
        y.pi *= down;
        y.e *= down * down;
        s.sigma += shift;
      }
    }
    const double grow =
        err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
    h *= std::clamp(grow, 0.2, 5.0);
    h = std::min(h, opt.max_step);
  }
  s.r = r_to;
  s.p = y.p;
  s.ps = y.ps;
  s.ces = y.ces;
  s.pi = y.pi;
  s.energy = y.e;
}

// constant part of the profile on the event interval containing mid;
// boundary points must never be sampled directly (half-open lookup)
cplx interval_value(const CoefficientProfile& profile, double mid) {
  const auto& segs = profile.segments();
  auto it = std::upper_bound(
      segs.begin(), segs.end(), mid,
      [](double x, const PulseSegment& g) { return x < g.start; });
  if (it != segs.begin()) {
    const PulseSegment& g = *(it - 1);
    if (mid < g.start + g.length) return g.value;
  }
  return cplx(0.0, 0.0);
}

std::vector<double> build_events(const CoefficientProfile& profile, double r0,
                                 double r_end,
                                 const std::vector<double>& checkpoints) {
  std::set<double> ev;
  ev.insert(r_end);
  for (const auto& s : profile.segments()) {
    if (s.start > r0 && s.start < r_end) ev.insert(s.start);
    const double e = s.start + s.length;
    if (e > r0 && e < r_end) ev.insert(e);
  }
  if (profile.smooth_part()) {
    const double se = profile.smooth_support_end();
    if (se > r0 && se < r_end) ev.insert(se);
  }
  for (double c : checkpoints)
    if (c > r0 && c < r_end) ev.insert(c);
  return {ev.begin(), ev.end()};
}

}  // namespace

Trajectory propagate_from(KreinState init, const CoefficientProfile& profile,
                          double r_end,
                          const std::vector<double>& checkpoints) {
  if (r_end < init.r) throw std::invalid_argument("r_end must be >= start r");
  const cplx lambda = init.lambda;
  const bool im_zero = lambda.imag() == 0.0;
  Trajectory traj;
  traj.lambda = lambda;
  traj.profile = &profile;

  std::set<double> marks(checkpoints.begin(), checkpoints.end());
  PropState s = from_state(init);
  if (marks.count(s.r)) traj.checkpoints.push_back(to_state(s, lambda));

  const AdaptiveOptions opt;
  double prev = s.r;
  for (double stop : build_events(profile, s.r, r_end, checkpoints)) {
    if (stop <= prev) continue;
    const cplx seg_value = interval_value(profile, 0.5 * (prev + stop));
    const bool smooth_here =
        profile.smooth_part() && prev < profile.smooth_support_end();
    if (smooth_here) {
      const auto& sm = profile.smooth_part();
      adaptive_advance(
          s, [&](double r) { return seg_value + sm(r); }, lambda, stop, opt);
    } else {
      // chunk so |Im lambda| * len <= 100 per transfer; keeps the scaled
      // entries and the segment integral representable across long gaps
      const double len = stop - prev;
      long chunks = 1;
      if (lambda.imag() != 0.0) {
        const double cap = 100.0 / std::abs(lambda.imag());
        if (len > cap) chunks = static_cast<long>(std::ceil(len / cap));
      }
      const double h = len / static_cast<double>(chunks);
      for (long k = 0; k < chunks; ++k) {
        apply_constant(s, seg_value, lambda, h, im_zero);
        renormalize(s);
      }
      s.r = stop;
    }
    check_finite(s);
    renormalize(s);
    if (marks.count(stop) || stop == r_end)
      traj.checkpoints.push_back(to_state(s, lambda));
    prev = stop;
  }
  if (traj.checkpoints.empty() ||
      traj.checkpoints.back().r != r_end) {
    s.r = r_end;
    traj.checkpoints.push_back(to_state(s, lambda));
  }
  return traj;
}

Trajectory propagate(const CoefficientProfile& profile, cplx lambda,
                     double r_end, const std::vector<double>& checkpoints) {
  KreinState init;
  init.lambda = lambda;
  return propagate_from(init, profile, r_end, checkpoints);
}

std::pair<cplx, cplx> q_propagate(const CoefficientProfile& profile, cplx c,
                                  cplx c_star, double r) {
  for (const auto& seg : profile.segments())
    if (seg.value.imag() != 0.0)
      throw std::invalid_argument("complex-valued profile");
  if (profile.smooth_part()) {
    // sampled certification that the smooth part is real on [0, r]
    const double end = std::min(r, profile.smooth_support_end());
    for (int i = 0; i <= 64; ++i) {
      const cplx v = profile.smooth_part()(end * i / 64.0);
      if (std::abs(v.imag()) > 1e-14 * (1.0 + std::abs(v.real())))
        throw std::invalid_argument("complex-valued profile");
    }
  }
  const double ia = profile.integral(0.0, r).real();
  const cplx sum = (c + c_star) * std::exp(-ia);
  const cplx dif = (c - c_star) * std::exp(ia);
  return {0.5 * (sum + dif), 0.5 * (sum - dif)};
}

double lagrange_residual(const Trajectory& traj) {
  double worst = 0.0;
  for (const auto& s : traj.checkpoints) {
    const double q = std::norm(s.p_star) - std::norm(s.p);
    const double res =
        std::abs(q - s.energy_integral) / (1.0 + std::norm(s.p_star));
    worst = std::max(worst, res);
  }
  return worst;
}

KreinState rk_oracle(const CoefficientProfile& profile, cplx lambda,
                     double r_end, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be > 0");
  const double two_im = 2.0 * lambda.imag();
  Y5 y{cplx(1.0, 0.0), cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0), 0.0};
  double prev = 0.0;
  auto events = build_events(profile, 0.0, r_end, {});
  for (double stop : events) {
    if (stop <= prev) continue;
    const cplx seg_value = interval_value(profile, 0.5 * (prev + stop));
    const bool smooth_here =
        profile.smooth_part() && prev < profile.smooth_support_end();
    const auto a_of_r = [&](double r) {
      return smooth_here ? seg_value + profile.smooth_part()(r) : seg_value;
    };
    const auto n = static_cast<long>(std::ceil((stop - prev) / step));
    const double h = (stop - prev) / static_cast<double>(n);
    double r = prev;
    for (long i = 0; i < n; ++i) {
      const Y5 k1 = rhs(a_of_r, lambda, two_im, r, y);
      const Y5 k2 = rhs(a_of_r, lambda, two_im, r + 0.5 * h,
                        y + (0.5 * h) * k1);
      const Y5 k3 = rhs(a_of_r, lambda, two_im, r + 0.5 * h,
                        y + (0.5 * h) * k2);
      const Y5 k4 = rhs(a_of_r, lambda, two_im, r + h, y + h * k3);
      y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      r += h;
      if (!finite(y.p) || !finite(y.ps))
        throw NumericalFault("overflow at r = " + std::to_string(r));
    }
    prev = stop;
  }
  KreinState out;
  out.r = r_end;
  out.lambda = lambda;
  out.p = y.p;
  out.p_star = y.ps;
  out.energy_integral = y.e;
  out.cesaro_integral = y.ces;
  out.pi_integral = y.pi;
  return out;
}

}  // namespace krein
