#include "krein/sakhnovich.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "krein/krein.hpp"

namespace krein {

namespace {

constexpr double kRenormHi = 1e100;
constexpr double kRenormLo = 1e-100;

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

}  // namespace

double frobenius(const MatrixXcd& m) { return m.norm(); }

MatrixProfile::MatrixProfile(int m) : m_(m) {
  if (m < 1) throw std::invalid_argument("dimension must be >= 1");
}

MatrixProfile::MatrixProfile(int m, std::vector<MatrixSegment> segments)
    : m_(m), segments_(std::move(segments)) {
  if (m < 1) throw std::invalid_argument("dimension must be >= 1");
  double prev_end = -1.0;
  for (const auto& s : segments_) {
    if (!(s.length > 0.0)) throw std::invalid_argument("segment length <= 0");
    if (s.value.rows() != m || s.value.cols() != m)
      throw std::invalid_argument("segment dimension mismatch");
    if (s.start < prev_end - 1e-15)
      throw std::invalid_argument("segments unsorted or overlapping");
    prev_end = s.start + s.length;
  }
}

MatrixProfile::MatrixProfile(int m, std::function<MatrixXcd(double)> smooth,
                             double support_end)
    : m_(m), smooth_(std::move(smooth)), smooth_end_(support_end) {
  if (m < 1) throw std::invalid_argument("dimension must be >= 1");
  if (!(support_end > 0.0))
    throw std::invalid_argument("smooth support end must be > 0");
}

MatrixXcd MatrixProfile::operator()(double r) const {
  MatrixXcd out = MatrixXcd::Zero(m_, m_);
  auto it = std::upper_bound(
      segments_.begin(), segments_.end(), r,
      [](double x, const MatrixSegment& g) { return x < g.start; });
  if (it != segments_.begin()) {
    const MatrixSegment& g = *(it - 1);
    if (r < g.start + g.length) out = g.value;
  }
  if (smooth_ && r < smooth_end_) out += smooth_(r);
  return out;
}

double MatrixProfile::support_end() const {
  double end = smooth_ ? smooth_end_ : 0.0;
  if (!segments_.empty())
    end = std::max(end, segments_.back().start + segments_.back().length);
  return end;
}

SakhnovichSystem make_system(Eigen::VectorXd d, MatrixProfile a1,
                             MatrixProfile a2) {
  const int m = static_cast<int>(d.size());
  if (m < 1) throw std::invalid_argument("dimension must be >= 1");
  if (a1.dim() != m || a2.dim() != m)
    throw std::invalid_argument("profile dimension mismatch");
  for (int i = 0; i < m; ++i)
    if (!(d(i) > 0.0)) throw std::invalid_argument("D must be positive");
  const auto check_skew = [](const MatrixXcd& v) {
    if ((v + v.adjoint()).norm() > 1e-12 * (1.0 + v.norm()))
      throw std::invalid_argument("A1 must be skew-Hermitian");
  };
  for (const auto& s : a1.segments()) check_skew(s.value);
  if (a1.smooth_part()) {
    const double end = a1.smooth_support_end();
    for (int i = 0; i <= 16; ++i) check_skew(a1.smooth_part()(end * i / 16.0));
  }
  return SakhnovichSystem{m, std::move(d), std::move(a1), std::move(a2)};
}

SakhnovichSystem krein_embedding(const CoefficientProfile& a) {
  std::vector<MatrixSegment> segs;
  segs.reserve(a.segments().size());
  for (const auto& s : a.segments()) {
    MatrixXcd v(1, 1);
    v(0, 0) = -s.value;
    segs.push_back({s.start, s.length, v});
  }
  Eigen::VectorXd d(1);
  d(0) = 1.0;
  MatrixProfile a1(1);
  if (a.smooth_part()) {
    if (!segs.empty())
      throw std::invalid_argument(
          "embedding supports segments or smooth part, not both");
    const auto& sm = a.smooth_part();
    MatrixProfile a2(
        1,
        [sm](double r) {
          MatrixXcd v(1, 1);
          v(0, 0) = -sm(r);
          return v;
        },
        a.smooth_support_end());
    return make_system(d, a1, a2);
  }
  return make_system(d, a1, MatrixProfile(1, std::move(segs)));
}

namespace {

MatrixXcd generator(const Eigen::VectorXd& d, cplx lambda, const MatrixXcd& a1,
                    const MatrixXcd& a2) {
  const int m = static_cast<int>(d.size());
  MatrixXcd g = MatrixXcd::Zero(2 * m, 2 * m);
  g.topLeftCorner(m, m) = a1;
  for (int i = 0; i < m; ++i) g(i, i) += cplx(0.0, 1.0) * lambda * d(i);
  g.topRightCorner(m, m) = a2.adjoint();
  g.bottomLeftCorner(m, m) = a2;
  return g;
}

// int_0^delta e^{G* s} Chat e^{G s} ds, given t = e^{G delta}
MatrixXcd vanloan_weight(const MatrixXcd& g, const MatrixXcd& chat,
                         double delta, const MatrixXcd& t) {
  const auto n = g.rows();
  MatrixXcd z = MatrixXcd::Zero(2 * n, 2 * n);
  z.topLeftCorner(n, n) = -g.adjoint() * delta;
  z.topRightCorner(n, n) = chat * delta;
  z.bottomRightCorner(n, n) = g * delta;
  const MatrixXcd e = z.exp();
  return t.adjoint() * e.topRightCorner(n, n);
}

// mixed weight int_0^delta e^{G0* s} Chat e^{G1 s} ds, given t0 = e^{G0 delta}
MatrixXcd vanloan_weight_mixed(const MatrixXcd& g0, const MatrixXcd& g1,
                               const MatrixXcd& chat, double delta,
                               const MatrixXcd& t0) {
  const auto n = g0.rows();
  MatrixXcd z = MatrixXcd::Zero(2 * n, 2 * n);
  z.topLeftCorner(n, n) = -g0.adjoint() * delta;
  z.topRightCorner(n, n) = chat * delta;
  z.bottomRightCorner(n, n) = g1 * delta;
  const MatrixXcd e = z.exp();
  return t0.adjoint() * e.topRightCorner(n, n);
}

MatrixXcd chat_of(const Eigen::VectorXd& d) {
  const int m = static_cast<int>(d.size());
  MatrixXcd c = MatrixXcd::Zero(2 * m, 2 * m);
  for (int i = 0; i < m; ++i) c(i, i) = d(i);
  return c;
}

struct MState {
  double r = 0.0;
  MatrixXcd p1, p2, gram;
  double sigma = 0.0;
};

MState initial_state(int m) {
  MState s;
  s.p1 = MatrixXcd::Identity(m, m);
  s.p2 = MatrixXcd::Identity(m, m);
  s.gram = MatrixXcd::Zero(m, m);
  return s;
}

void renorm_mstate(MState& s, MatrixXcd* coupled) {
  const double m = std::max(s.p1.norm(), s.p2.norm());
  if (m == 0.0 || (m > kRenormLo && m < kRenormHi)) return;
  const double down = 1.0 / m;
  s.p1 *= down;
  s.p2 *= down;
  s.gram *= down * down;
  if (coupled) *coupled *= down;
  s.sigma += std::log(m);
}

void check_mstate(const MState& s) {
  if (!s.p1.allFinite() || !s.p2.allFinite() || !s.gram.allFinite())
    throw NumericalFault("non-finite matrix state at r = " +
                         std::to_string(s.r));
}

std::vector<double> matrix_events(const SakhnovichSystem& sys, double r0,
                                  double r_end,
                                  const std::vector<double>& checkpoints) {
  std::set<double> ev;
  ev.insert(r_end);
  for (const MatrixProfile* prof : {&sys.a1, &sys.a2}) {
    for (const auto& s : prof->segments()) {
      if (s.start > r0 && s.start < r_end) ev.insert(s.start);
      const double e = s.start + s.length;
      if (e > r0 && e < r_end) ev.insert(e);
    }
    if (prof->smooth_part()) {
      const double se = prof->smooth_support_end();
      if (se > r0 && se < r_end) ev.insert(se);
    }
  }
  for (double c : checkpoints)
    if (c > r0 && c < r_end) ev.insert(c);
  return {ev.begin(), ev.end()};
}

const MatrixXcd* interval_segment(const MatrixProfile& prof, double mid) {
  const auto& segs = prof.segments();
  auto it = std::upper_bound(
      segs.begin(), segs.end(), mid,
      [](double x, const MatrixSegment& g) { return x < g.start; });
  if (it != segs.begin()) {
    const MatrixSegment& g = *(it - 1);
    if (mid < g.start + g.length) return &g.value;
  }
  return nullptr;
}

bool smooth_active(const MatrixProfile& prof, double r) {
  return static_cast<bool>(prof.smooth_part()) && r < prof.smooth_support_end();
}

// ---- flattened adaptive Dormand-Prince over matrix blocks ----

struct Dopri {
  // blocks: count of m x m matrices packed into the state vector
  template <typename Rhs, typename ErrFn, typename StepHook>
  static void march(VectorXcd& y, double r_from, double r_to, Rhs rhs,
                    ErrFn err_norm, StepHook on_accept,
                    const AdaptiveOptions& opt) {
    double r = r_from;
    double h = std::min({opt.max_step, r_to - r, 0.1});
    while (r < r_to) {
      h = std::min(h, r_to - r);
      if (!(h > 1e-14 * (1.0 + std::abs(r))))
        throw NumericalFault("matrix step collapsed at r = " +
                             std::to_string(r));
      const VectorXcd k1 = rhs(r, y);
      const VectorXcd k2 = rhs(r + h / 5.0, y + (h / 5.0) * k1);
      const VectorXcd k3 =
          rhs(r + 0.3 * h, y + h * ((3.0 / 40.0) * k1 + (9.0 / 40.0) * k2));
      const VectorXcd k4 =
          rhs(r + 0.8 * h, y + h * ((44.0 / 45.0) * k1 + (-56.0 / 15.0) * k2 +
                                    (32.0 / 9.0) * k3));
      const VectorXcd k5 =
          rhs(r + (8.0 / 9.0) * h,
              y + h * ((19372.0 / 6561.0) * k1 + (-25360.0 / 2187.0) * k2 +
                       (64448.0 / 6561.0) * k3 + (-212.0 / 729.0) * k4));
      const VectorXcd k6 =
          rhs(r + h, y + h * ((9017.0 / 3168.0) * k1 + (-355.0 / 33.0) * k2 +
                              (46732.0 / 5247.0) * k3 + (49.0 / 176.0) * k4 +
                              (-5103.0 / 18656.0) * k5));
      const VectorXcd y5 =
          y + h * ((35.0 / 384.0) * k1 + (500.0 / 1113.0) * k3 +
                   (125.0 / 192.0) * k4 + (-2187.0 / 6784.0) * k5 +
                   (11.0 / 84.0) * k6);
      const VectorXcd k7 = rhs(r + h, y5);
      const VectorXcd y4 =
          y + h * ((5179.0 / 57600.0) * k1 + (7571.0 / 16695.0) * k3 +
                   (393.0 / 640.0) * k4 + (-92097.0 / 339200.0) * k5 +
                   (187.0 / 2100.0) * k6 + (1.0 / 40.0) * k7);
      const double err = err_norm(y5, VectorXcd(y5 - y4));
      if (err <= 1.0) {
        r += h;
        y = y5;
        if (!y.allFinite())
          throw NumericalFault("non-finite matrix state at r = " +
                               std::to_string(r));
        on_accept(y);
      }
      const double grow = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
      h *= std::clamp(grow, 0.2, 5.0);
      h = std::min(h, opt.max_step);
    }
  }
};

MatrixState snapshot(const MState& s, cplx lambda) {
  MatrixState out;
  out.r = s.r;
  out.lambda = lambda;
  out.p1 = s.p1;
  out.p2 = s.p2;
  out.gram = s.gram;
  out.log_scale = s.sigma;
  return out;
}

double growth_rate(const Eigen::VectorXd& d, cplx lambda, const MatrixXcd& a1,
                   const MatrixXcd& a2) {
  return std::abs(lambda.imag()) * d.maxCoeff() + a1.norm() + 2.0 * a2.norm();
}

}  // namespace

MatrixTrajectory propagate_matrix(const SakhnovichSystem& sys, cplx lambda,
                                  double r_end,
                                  const std::vector<double>& checkpoints) {
  if (r_end < 0.0) throw std::invalid_argument("r_end must be >= 0");
  const int m = sys.m;
  MatrixTrajectory traj;
  traj.lambda = lambda;
  traj.sys = &sys;

  std::set<double> marks(checkpoints.begin(), checkpoints.end());
  MState s = initial_state(m);
  if (marks.count(0.0)) traj.checkpoints.push_back(snapshot(s, lambda));

  const MatrixXcd chat = chat_of(sys.d);
  const AdaptiveOptions opt;
  double prev = 0.0;
  for (double stop : matrix_events(sys, 0.0, r_end, checkpoints)) {
    if (stop <= prev) continue;
    const double mid = 0.5 * (prev + stop);
    const bool smooth_here =
        smooth_active(sys.a1, prev) || smooth_active(sys.a2, prev);
    if (!smooth_here) {
      const MatrixXcd* a1p = interval_segment(sys.a1, mid);
      const MatrixXcd* a2p = interval_segment(sys.a2, mid);
      const MatrixXcd a1c = a1p ? *a1p : MatrixXcd::Zero(m, m);
      const MatrixXcd a2c = a2p ? *a2p : MatrixXcd::Zero(m, m);
      const MatrixXcd g = generator(sys.d, lambda, a1c, a2c);
      const double len = stop - prev;
      const double rate = growth_rate(sys.d, lambda, a1c, a2c);
      const long chunks =
          std::max(1L, static_cast<long>(std::ceil(len * rate / 100.0)));
      const double h = len / static_cast<double>(chunks);
      const MatrixXcd t = MatrixXcd(g * h).exp();
      const MatrixXcd w = vanloan_weight(g, chat, h, t);
      for (long k = 0; k < chunks; ++k) {
        MatrixXcd y0(2 * m, m);
        y0.topRows(m) = s.p1;
        y0.bottomRows(m) = s.p2;
        const MatrixXcd inc = y0.adjoint() * w * y0;
        s.gram += 0.5 * (inc + MatrixXcd(inc.adjoint()));
        const MatrixXcd y1 = t * y0;
        s.p1 = y1.topRows(m);
        s.p2 = y1.bottomRows(m);
        renorm_mstate(s, nullptr);
      }
      s.r = stop;
    } else {
      // flattened (P1, P2, gram) adaptive march
      const int mm = m * m;
      VectorXcd y(3 * mm);
      Eigen::Map<MatrixXcd>(y.data(), m, m) = s.p1;
      Eigen::Map<MatrixXcd>(y.data() + mm, m, m) = s.p2;
      Eigen::Map<MatrixXcd>(y.data() + 2 * mm, m, m) = s.gram;
      const Eigen::VectorXcd dc = sys.d.cast<cplx>();
      const auto rhs = [&](double r, const VectorXcd& v) {
        Eigen::Map<const MatrixXcd> p1(v.data(), m, m);
        Eigen::Map<const MatrixXcd> p2(v.data() + mm, m, m);
        const MatrixXcd a1r = sys.a1(r);
        const MatrixXcd a2r = sys.a2(r);
        VectorXcd dv(3 * mm);
        MatrixXcd dp1 = a1r * p1 + a2r.adjoint() * p2;
        for (int i = 0; i < m; ++i)
          dp1.row(i) += cplx(0.0, 1.0) * lambda * sys.d(i) * p1.row(i);
        Eigen::Map<MatrixXcd>(dv.data(), m, m) = dp1;
        Eigen::Map<MatrixXcd>(dv.data() + mm, m, m) = a2r * p1;
        Eigen::Map<MatrixXcd>(dv.data() + 2 * mm, m, m) =
            p1.adjoint() * dc.asDiagonal() * p1;
        return dv;
      };
      const auto err_norm = [&](const VectorXcd& ynew, const VectorXcd& diff) {
        const double state_norm =
            std::max({ynew.head(2 * mm).norm(), 1.0});
        const double scale = opt.abs_tol + opt.rel_tol * state_norm;
        return diff.head(2 * mm).norm() / scale;
      };
      const auto on_accept = [&](VectorXcd& v) {
        const double norm = v.head(2 * mm).norm();
        if (norm != 0.0 && (norm <= kRenormLo || norm >= kRenormHi)) {
          const double down = 1.0 / norm;
          v.head(2 * mm) *= down;
          v.tail(mm) *= down * down;
          s.sigma += std::log(norm);
        }
      };
      Dopri::march(y, prev, stop, rhs, err_norm, on_accept, opt);
      s.p1 = Eigen::Map<MatrixXcd>(y.data(), m, m);
      s.p2 = Eigen::Map<MatrixXcd>(y.data() + mm, m, m);
      s.gram = Eigen::Map<MatrixXcd>(y.data() + 2 * mm, m, m);
      s.r = stop;
    }
    check_mstate(s);
    renorm_mstate(s, nullptr);
    if (marks.count(stop) || stop == r_end)
      traj.checkpoints.push_back(snapshot(s, lambda));
    prev = stop;
  }
  if (traj.checkpoints.empty() || traj.checkpoints.back().r != r_end) {
    s.r = r_end;
    traj.checkpoints.push_back(snapshot(s, lambda));
  }
  return traj;
}

double self_identity_residual(const MatrixTrajectory& traj) {
  const double two_im = 2.0 * traj.lambda.imag();
  double worst = 0.0;
  for (const auto& s : traj.checkpoints) {
    const MatrixXcd lhs = s.p2.adjoint() * s.p2 - s.p1.adjoint() * s.p1;
    const MatrixXcd res = lhs - two_im * s.gram;
    worst = std::max(worst, res.norm() / (1.0 + s.p2.squaredNorm()));
  }
  return worst;
}

PairTrajectory propagate_pair(const SakhnovichSystem& sys, cplx lambda0,
                              cplx lambda, double r_end,
                              const std::vector<double>& checkpoints) {
  if (r_end < 0.0) throw std::invalid_argument("r_end must be >= 0");
  const int m = sys.m;
  PairTrajectory traj;
  traj.lambda0 = lambda0;
  traj.lambda = lambda;
  traj.sys = &sys;

  std::set<double> marks(checkpoints.begin(), checkpoints.end());
  MState sa = initial_state(m);  // at lambda0
  MState sb = initial_state(m);  // at lambda
  MatrixXcd mixed = MatrixXcd::Zero(m, m);
  const auto record = [&] {
    PairState ps;
    ps.at_lambda0 = snapshot(sa, lambda0);
    ps.at_lambda = snapshot(sb, lambda);
    ps.mixed = mixed;
    traj.checkpoints.push_back(std::move(ps));
  };
  if (marks.count(0.0)) record();

  const MatrixXcd chat = chat_of(sys.d);
  const AdaptiveOptions opt;
  double prev = 0.0;
  for (double stop : matrix_events(sys, 0.0, r_end, checkpoints)) {
    if (stop <= prev) continue;
    const double mid = 0.5 * (prev + stop);
    const bool smooth_here =
        smooth_active(sys.a1, prev) || smooth_active(sys.a2, prev);
    if (!smooth_here) {
      const MatrixXcd* a1p = interval_segment(sys.a1, mid);
      const MatrixXcd* a2p = interval_segment(sys.a2, mid);
      const MatrixXcd a1c = a1p ? *a1p : MatrixXcd::Zero(m, m);
      const MatrixXcd a2c = a2p ? *a2p : MatrixXcd::Zero(m, m);
      const MatrixXcd ga = generator(sys.d, lambda0, a1c, a2c);
      const MatrixXcd gb = generator(sys.d, lambda, a1c, a2c);
      const double len = stop - prev;
      const double rate = std::max(growth_rate(sys.d, lambda0, a1c, a2c),
                                   growth_rate(sys.d, lambda, a1c, a2c));
      const long chunks =
          std::max(1L, static_cast<long>(std::ceil(len * rate / 100.0)));
      const double h = len / static_cast<double>(chunks);
      const MatrixXcd ta = MatrixXcd(ga * h).exp();
      const MatrixXcd tb = MatrixXcd(gb * h).exp();
      const MatrixXcd wa = vanloan_weight(ga, chat, h, ta);
      const MatrixXcd wb = vanloan_weight(gb, chat, h, tb);
      const MatrixXcd wab = vanloan_weight_mixed(ga, gb, chat, h, ta);
      for (long k = 0; k < chunks; ++k) {
        MatrixXcd ya(2 * m, m), yb(2 * m, m);
        ya.topRows(m) = sa.p1;
        ya.bottomRows(m) = sa.p2;
        yb.topRows(m) = sb.p1;
        yb.bottomRows(m) = sb.p2;
        const MatrixXcd inca = ya.adjoint() * wa * ya;
        const MatrixXcd incb = yb.adjoint() * wb * yb;
        sa.gram += 0.5 * (inca + MatrixXcd(inca.adjoint()));
        sb.gram += 0.5 * (incb + MatrixXcd(incb.adjoint()));
        mixed += ya.adjoint() * wab * yb;
        const MatrixXcd za = ta * ya;
        const MatrixXcd zb = tb * yb;
        sa.p1 = za.topRows(m);
        sa.p2 = za.bottomRows(m);
        sb.p1 = zb.topRows(m);
        sb.p2 = zb.bottomRows(m);
        renorm_mstate(sa, &mixed);
        renorm_mstate(sb, &mixed);
      }
      sa.r = sb.r = stop;
    } else {
      // lockstep flatten: P1a, P2a, grama, P1b, P2b, gramb, mixed
      const int mm = m * m;
      VectorXcd y(7 * mm);
      Eigen::Map<MatrixXcd>(y.data() + 0 * mm, m, m) = sa.p1;
      Eigen::Map<MatrixXcd>(y.data() + 1 * mm, m, m) = sa.p2;
      Eigen::Map<MatrixXcd>(y.data() + 2 * mm, m, m) = sa.gram;
      Eigen::Map<MatrixXcd>(y.data() + 3 * mm, m, m) = sb.p1;
      Eigen::Map<MatrixXcd>(y.data() + 4 * mm, m, m) = sb.p2;
      Eigen::Map<MatrixXcd>(y.data() + 5 * mm, m, m) = sb.gram;
      Eigen::Map<MatrixXcd>(y.data() + 6 * mm, m, m) = mixed;
      const Eigen::VectorXcd dc = sys.d.cast<cplx>();
      const auto rhs = [&](double r, const VectorXcd& v) {
        Eigen::Map<const MatrixXcd> p1a(v.data() + 0 * mm, m, m);
        Eigen::Map<const MatrixXcd> p2a(v.data() + 1 * mm, m, m);
        Eigen::Map<const MatrixXcd> p1b(v.data() + 3 * mm, m, m);
        Eigen::Map<const MatrixXcd> p2b(v.data() + 4 * mm, m, m);
        const MatrixXcd a1r = sys.a1(r);
        const MatrixXcd a2r = sys.a2(r);
        VectorXcd dv(7 * mm);
        MatrixXcd dp1a = a1r * p1a + a2r.adjoint() * p2a;
        MatrixXcd dp1b = a1r * p1b + a2r.adjoint() * p2b;
        for (int i = 0; i < m; ++i) {
          dp1a.row(i) += cplx(0.0, 1.0) * lambda0 * sys.d(i) * p1a.row(i);
          dp1b.row(i) += cplx(0.0, 1.0) * lambda * sys.d(i) * p1b.row(i);
        }
        Eigen::Map<MatrixXcd>(dv.data() + 0 * mm, m, m) = dp1a;
        Eigen::Map<MatrixXcd>(dv.data() + 1 * mm, m, m) = a2r * p1a;
        Eigen::Map<MatrixXcd>(dv.data() + 2 * mm, m, m) =
            p1a.adjoint() * dc.asDiagonal() * p1a;
        Eigen::Map<MatrixXcd>(dv.data() + 3 * mm, m, m) = dp1b;
        Eigen::Map<MatrixXcd>(dv.data() + 4 * mm, m, m) = a2r * p1b;
        Eigen::Map<MatrixXcd>(dv.data() + 5 * mm, m, m) =
            p1b.adjoint() * dc.asDiagonal() * p1b;
        Eigen::Map<MatrixXcd>(dv.data() + 6 * mm, m, m) =
            p1a.adjoint() * dc.asDiagonal() * p1b;
        return dv;
      };
      const auto err_norm = [&](const VectorXcd& ynew, const VectorXcd& diff) {
        const double na = ynew.segment(0, 2 * mm).norm();
        const double nb = ynew.segment(3 * mm, 2 * mm).norm();
        const double scale = opt.abs_tol + opt.rel_tol * std::max({na, nb, 1.0});
        return std::max(diff.segment(0, 2 * mm).norm(),
                        diff.segment(3 * mm, 2 * mm).norm()) /
               scale;
      };
      const auto on_accept = [&](VectorXcd& v) {
        const double na = v.segment(0, 2 * mm).norm();
        if (na != 0.0 && (na <= kRenormLo || na >= kRenormHi)) {
          const double down = 1.0 / na;
          v.segment(0, 2 * mm) *= down;
          v.segment(2 * mm, mm) *= down * down;
          v.segment(6 * mm, mm) *= down;
          sa.sigma += std::log(na);
        }
        const double nb = v.segment(3 * mm, 2 * mm).norm();
        if (nb != 0.0 && (nb <= kRenormLo || nb >= kRenormHi)) {
          const double down = 1.0 / nb;
          v.segment(3 * mm, 2 * mm) *= down;
          v.segment(5 * mm, mm) *= down * down;
          v.segment(6 * mm, mm) *= down;
          sb.sigma += std::log(nb);
        }
      };
      Dopri::march(y, prev, stop, rhs, err_norm, on_accept, opt);
      sa.p1 = Eigen::Map<MatrixXcd>(y.data() + 0 * mm, m, m);
      sa.p2 = Eigen::Map<MatrixXcd>(y.data() + 1 * mm, m, m);
      sa.gram = Eigen::Map<MatrixXcd>(y.data() + 2 * mm, m, m);
      sb.p1 = Eigen::Map<MatrixXcd>(y.data() + 3 * mm, m, m);
      sb.p2 = Eigen::Map<MatrixXcd>(y.data() + 4 * mm, m, m);
      sb.gram = Eigen::Map<MatrixXcd>(y.data() + 5 * mm, m, m);
      mixed = Eigen::Map<MatrixXcd>(y.data() + 6 * mm, m, m);
      sa.r = sb.r = stop;
    }
    check_mstate(sa);
    check_mstate(sb);
    if (!mixed.allFinite())
      throw NumericalFault("non-finite mixed integral at r = " +
                           std::to_string(stop));
    if (marks.count(stop) || stop == r_end) record();
    prev = stop;
  }
  if (traj.checkpoints.empty() ||
      traj.checkpoints.back().at_lambda.r != r_end) {
    sa.r = sb.r = r_end;
    record();
  }
  return traj;
}

Eigen::MatrixXcd bilinear_residual(const PairState& state, cplx lambda0,
                                   cplx lambda) {
  const auto& a = state.at_lambda0;
  const auto& b = state.at_lambda;
  const double scale = std::exp(a.log_scale + b.log_scale);
  const MatrixXcd lhs =
      a.p2.adjoint() * b.p2 - a.p1.adjoint() * b.p1;
  const MatrixXcd rhs =
      cplx(0.0, 1.0) * (std::conj(lambda0) - lambda) * state.mixed;
  return scale * (lhs - rhs);
}

double lagrange_bilinear(const PairTrajectory& pair) {
  double worst = 0.0;
  for (const auto& ps : pair.checkpoints) {
    const MatrixXcd res = bilinear_residual(ps, pair.lambda0, pair.lambda);
    const double norm_a =
        ps.at_lambda0.p2.norm() * std::exp(ps.at_lambda0.log_scale);
    const double norm_b =
        ps.at_lambda.p2.norm() * std::exp(ps.at_lambda.log_scale);
    worst = std::max(worst, res.norm() / (1.0 + norm_a * norm_b));
  }
  return worst;
}

double lagrange_bilinear(const MatrixTrajectory& traj0,
                         const MatrixTrajectory& traj1) {
  if (traj0.sys != traj1.sys)
    throw std::invalid_argument("trajectories from different systems");
  if (traj0.checkpoints.size() != traj1.checkpoints.size())
    throw std::invalid_argument("mismatched checkpoints");
  std::vector<double> rs;
  rs.reserve(traj0.checkpoints.size());
  for (std::size_t i = 0; i < traj0.checkpoints.size(); ++i) {
    if (traj0.checkpoints[i].r != traj1.checkpoints[i].r)
      throw std::invalid_argument("mismatched checkpoints");
    rs.push_back(traj0.checkpoints[i].r);
  }
  const auto pair = propagate_pair(*traj0.sys, traj0.lambda, traj1.lambda,
                                   rs.back(), rs);
  return lagrange_bilinear(pair);
}

double log_norm_bound_check(const MatrixTrajectory& traj) {
  if (!traj.sys) throw std::invalid_argument("trajectory lacks a system");
  const auto& sys = *traj.sys;
  const auto& cps = traj.checkpoints;
  if (cps.size() < 2) return 0.0;
  const double r_last = cps.back().r;
  const auto events = matrix_events(sys, 0.0, r_last + 1.0, {});
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < cps.size(); ++i) {
    const double ra = cps[i].r, rb = cps[i + 1].r;
    if (!(rb > ra)) continue;
    // skip intervals that straddle a coefficient event
    auto lo = std::upper_bound(events.begin(), events.end(), ra);
    if (lo != events.end() && *lo < rb) continue;
    const double la = std::log(cps[i].p1.squaredNorm() +
                               cps[i].p2.squaredNorm()) +
                      2.0 * cps[i].log_scale;
    const double lb = std::log(cps[i + 1].p1.squaredNorm() +
                               cps[i + 1].p2.squaredNorm()) +
                      2.0 * cps[i + 1].log_scale;
    const double slope = (lb - la) / (rb - ra);
    const double bound = 4.0 * sys.a2(0.5 * (ra + rb)).norm();
    worst = std::min(worst, bound - slope);
  }
  return worst;
}

namespace {

double quad_norm_sq(const MatrixProfile& prof, double lo, double hi) {
  if (hi <= lo) return 0.0;
  const auto f = [&](double r) { return prof(r).squaredNorm(); };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, lo, hi, 12, 1e-12);
}

}  // namespace

PiEstimate pi_l2(const SakhnovichSystem& sys, cplx lambda, double r_end,
                 double tail_tol) {
  if (!(lambda.imag() > 0.0))
    throw std::invalid_argument("pi_l2 needs Im lambda > 0");
  if (!(r_end > 0.0)) throw std::invalid_argument("r_end must be > 0");
  const auto traj = propagate_matrix(
      sys, lambda, r_end, {r_end / 4.0, r_end / 2.0, r_end});
  const auto& end = traj.checkpoints.back();
  PiEstimate out;
  out.value = end.p2 * std::exp(end.log_scale);

  // Cauchy-Schwarz: tail <= sqrt(int_R^inf ||A2||^2) sqrt(int_R^inf ||P1||^2)
  double a2_tail_sq = 0.0;
  if (sys.a2.support_end() > r_end) {
    const double m1 = quad_norm_sq(sys.a2, r_end, 2.0 * r_end);
    const double m2 = quad_norm_sq(sys.a2, 2.0 * r_end, 4.0 * r_end);
    if (m1 > 0.0) {
      const double q = m2 / m1;
      a2_tail_sq = q < 1.0 ? m1 / (1.0 - q)
                           : std::numeric_limits<double>::infinity();
    }
  }
  double p1_tail = 0.0;
  if (a2_tail_sq > 0.0) {
    // geometric extrapolation of int ||P1||^2 <= Tr(gram)/d_min increments
    const double dmin = sys.d.minCoeff();
    std::vector<double> tr;
    for (const auto& cp : traj.checkpoints)
      tr.push_back(cp.gram.real().trace() * std::exp(2.0 * cp.log_scale) /
                   dmin);
    const std::size_t k = tr.size();
    const double i1 = tr[k - 2] - tr[k - 3];
    const double i2 = tr[k - 1] - tr[k - 2];
    if (i1 > 0.0 && i2 < i1)
      p1_tail = i2 * (i2 / i1) / (1.0 - i2 / i1);
    else if (i2 > 0.0)
      p1_tail = std::numeric_limits<double>::infinity();
  }
  out.tail_bound = std::sqrt(a2_tail_sq) * std::sqrt(p1_tail);
  if (!(out.tail_bound <= tail_tol))
    throw NumericalFault("pi_l2 tail bound above tolerance");
  return out;
}

PiEstimate pi_via_integral(const PairTrajectory& pair,
                           const Eigen::MatrixXcd& pi_at_lambda0,
                           double tail_tol) {
  if (pair.checkpoints.empty())
    throw std::invalid_argument("pair trajectory has no checkpoints");
  const Eigen::JacobiSVD<MatrixXcd> svd(
      pi_at_lambda0, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= 1e-12 * sv(0))
    throw std::invalid_argument("pi at lambda0 is not invertible");

  const auto& last = pair.checkpoints.back();
  const double scale =
      std::exp(last.at_lambda0.log_scale + last.at_lambda.log_scale);
  const MatrixXcd mixed_true = last.mixed * scale;
  const cplx factor =
      cplx(0.0, 1.0) * (std::conj(pair.lambda0) - pair.lambda);
  const MatrixXcd pi_adj_inv =
      MatrixXcd(pi_at_lambda0.adjoint()).inverse();
  PiEstimate out;
  out.value = factor * pi_adj_inv * mixed_true;

  out.tail_bound = std::numeric_limits<double>::infinity();
  const auto& cps = pair.checkpoints;
  if (cps.size() >= 3) {
    const auto true_mixed = [](const PairState& ps) {
      return MatrixXcd(ps.mixed * std::exp(ps.at_lambda0.log_scale +
                                           ps.at_lambda.log_scale));
    };
    const std::size_t k = cps.size();
    const double i1 =
        (true_mixed(cps[k - 2]) - true_mixed(cps[k - 3])).norm();
    const double i2 =
        (true_mixed(cps[k - 1]) - true_mixed(cps[k - 2])).norm();
    double mixed_tail;
    if (i2 == 0.0)
      mixed_tail = 0.0;
    else if (i1 > 0.0 && i2 < i1)
      mixed_tail = i2 * (i2 / i1) / (1.0 - i2 / i1);
    else
      mixed_tail = std::numeric_limits<double>::infinity();
    out.tail_bound = std::abs(factor) * pi_adj_inv.norm() * mixed_tail;
  }
  if (!(out.tail_bound <= tail_tol))
    throw NumericalFault("pi_via_integral tail bound above tolerance");
  return out;
}

}  // namespace krein
