#include "krein/profile.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace krein {

namespace {

double quad(const std::function<double(double)>& f, double lo, double hi) {
  if (hi <= lo) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, lo, hi, 12, 1e-13);
}

}  // namespace

PulseSegment make_segment(double start, double length, cplx value) {
  if (!(length > 0.0)) throw std::invalid_argument("segment length must be > 0");
  return PulseSegment{start, length, value, value * length};
}

CoefficientProfile::CoefficientProfile(std::vector<PulseSegment> segments)
    : segments_(std::move(segments)) {
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (!(segments_[i].length > 0.0))
      throw std::invalid_argument("segment length must be > 0");
    if (i > 0) {
      const auto& prev = segments_[i - 1];
      if (segments_[i].start < prev.start + prev.length - 1e-15)
        throw std::invalid_argument("segments must be sorted and disjoint");
    }
  }
}

CoefficientProfile::CoefficientProfile(std::vector<PulseSegment> segments,
                                       std::function<cplx(double)> smooth,
                                       double smooth_bound,
                                       double smooth_support_end)
    : CoefficientProfile(std::move(segments)) {
  smooth_ = std::move(smooth);
  smooth_bound_ = smooth_bound;
  smooth_support_end_ = smooth_support_end;
}

cplx CoefficientProfile::operator()(double r) const {
  cplx v{0.0, 0.0};
  // last segment with start <= r
  auto it = std::upper_bound(
      segments_.begin(), segments_.end(), r,
      [](double x, const PulseSegment& s) { return x < s.start; });
  if (it != segments_.begin()) {
    const PulseSegment& s = *(it - 1);
    if (r < s.start + s.length) v = s.value;
  }
  if (smooth_) v += smooth_(r);
  return v;
}

double CoefficientProfile::support_end() const {
  double end = smooth_support_end_;
  if (!segments_.empty())
    end = std::max(end, segments_.back().start + segments_.back().length);
  return end;
}

bool CoefficientProfile::real_valued() const {
  if (smooth_) return false;  // sampled callables are not certified real
  for (const auto& s : segments_)
    if (s.value.imag() != 0.0) return false;
  return true;
}

cplx CoefficientProfile::integral(double r_lo, double r_hi) const {
  cplx total{0.0, 0.0};
  for (const auto& s : segments_) {
    const double lo = std::max(r_lo, s.start);
    const double hi = std::min(r_hi, s.start + s.length);
    if (hi <= lo) continue;
    if (lo == s.start && hi == s.start + s.length)
      total += s.mass;  // whole segment: use the stored exact mass
    else
      total += s.value * (hi - lo);
  }
  if (smooth_) {
    const double hi = std::min(r_hi, smooth_support_end_);
    if (hi > r_lo) {
      total += cplx(
          quad([this](double r) { return smooth_(r).real(); }, r_lo, hi),
          quad([this](double r) { return smooth_(r).imag(); }, r_lo, hi));
    }
  }
  return total;
}

double BumpProfile::eval(double x) const {
  if (x < 0.0 || x >= 1.0) return 0.0;
  if (is_step()) {
    for (const auto& s : steps)
      if (x >= s.start && x < s.start + s.length) return s.value.real();
    return 0.0;
  }
  // linear interpolation on the uniform sample grid
  const double h = 1.0 / static_cast<double>(samples.size() - 1);
  const double u = x / h;
  const auto i = static_cast<std::size_t>(u);
  if (i + 1 >= samples.size()) return samples.back();
  const double w = u - static_cast<double>(i);
  return samples[i] * (1.0 - w) + samples[i + 1] * w;
}

BumpProfile make_bump(BumpKind kind, int sample_count) {
  BumpProfile b;
  if (kind == BumpKind::two_step) {
    b.steps = {make_segment(0.0, 0.5, cplx(1.0, 0.0)),
               make_segment(0.5, 0.5, cplx(-1.0, 0.0))};
    b.integral_total = 0.0;
    b.integral_half = 0.5;
    return b;
  }
  if (sample_count < 5) throw std::invalid_argument("sample_count too small");
  // positive mollifier lobe on (0, 1/2), mirrored negative lobe on (1/2, 1)
  const auto lobe = [](double u) {
    return std::abs(u) < 1.0 ? std::exp(-1.0 / (1.0 - u * u)) : 0.0;
  };
  b.samples.resize(static_cast<std::size_t>(sample_count));
  const double h = 1.0 / static_cast<double>(sample_count - 1);
  for (int i = 0; i < sample_count; ++i) {
    const double x = h * static_cast<double>(i);
    b.samples[static_cast<std::size_t>(i)] =
        lobe((x - 0.25) / 0.25) - lobe((x - 0.75) / 0.25);
  }
  const auto trapz = [&](std::size_t i_lo, std::size_t i_hi) {
    KahanSum acc;
    for (std::size_t i = i_lo; i < i_hi; ++i)
      acc.add(0.5 * h * (b.samples[i] + b.samples[i + 1]));
    return acc.value();
  };
  // the lobes cancel analytically; subtract the numerical mean so the
  // trapezoid total is zero to machine precision
  const double mean = trapz(0, b.samples.size() - 1);
  for (auto& v : b.samples) v -= mean;
  b.integral_total = trapz(0, b.samples.size() - 1);
  b.integral_half = trapz(0, (b.samples.size() - 1) / 2);
  return b;
}

namespace {

double lemma61_amplitude(double eps, AmpMode mode) {
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("eps must lie in (0,1)");
  if (mode.kind == AmpMode::fixed_m) {
    if (!(mode.m > 0.0)) throw std::invalid_argument("M must be > 0");
    return mode.m / eps;
  }
  return std::log(std::abs(std::log(eps))) / eps;
}

}  // namespace

CoefficientProfile lemma61_pulse(const BumpProfile& b, double eps,
                                 AmpMode mode) {
  const double amp = lemma61_amplitude(eps, mode);
  if (b.is_step()) {
    std::vector<PulseSegment> segs;
    segs.reserve(b.steps.size());
    for (const auto& s : b.steps)
      segs.push_back(
          make_segment(s.start * eps, s.length * eps, -amp * s.value));
    return CoefficientProfile(std::move(segs));
  }
  auto smooth = [b, eps, amp](double r) {
    return cplx(-amp * b.eval(r / eps), 0.0);
  };
  double peak = 0.0;
  for (double v : b.samples) peak = std::max(peak, std::abs(v));
  return CoefficientProfile({}, smooth, amp * peak, eps);
}

CoefficientProfile thm61_profile(int n_max, AmpMode mode) {
  if (n_max < 3 || n_max > 40)
    throw std::invalid_argument("n_max must lie in [3, 40]");
  std::vector<PulseSegment> segs;
  segs.reserve(2 * static_cast<std::size_t>(n_max - 2));
  for (int n = 3; n <= n_max; ++n) {
    const double width = std::ldexp(1.0, -n);  // 2^-n
    const double half = 0.5 * width;
    const double half_mass =
        mode.kind == AmpMode::fixed_m ? 0.5 * mode.m : 0.5 * std::log(n);
    const double amp = half_mass / half;  // exact: power-of-two scaling
    PulseSegment lead{static_cast<double>(n), half, cplx(-amp, 0.0),
                      cplx(-half_mass, 0.0)};
    PulseSegment trail{static_cast<double>(n) + half, half, cplx(amp, 0.0),
                       cplx(half_mass, 0.0)};
    segs.push_back(lead);
    segs.push_back(trail);
  }
  return CoefficientProfile(std::move(segs));
}

CoefficientProfile thm62_pulse(double b_amp, cplx xi, double eps,
                               double start) {
  if (!(b_amp > 0.0)) throw std::invalid_argument("b_amp must be > 0");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be > 0");
  if (std::abs(std::abs(xi) - 1.0) > 1e-12)
    throw std::invalid_argument("|xi| must equal 1");
  return CoefficientProfile(
      {make_segment(start, eps, cplx(-b_amp, 0.0)),
       make_segment(start + eps, eps, std::conj(xi) * b_amp)});
}

Thm62Params thm62_schedule_params(int n) {
  if (n < 3) throw std::invalid_argument("n must be >= 3");
  const double L = std::log(static_cast<double>(n));
  const double L2 = L * L;
  // unit-circle point with |1 - xi| = 1/L and Im xi > 0, solved exactly
  const double re = 1.0 - 0.5 / L2;
  const double im = (1.0 / L) * std::sqrt(1.0 - 0.25 / L2);
  return Thm62Params{1.0 / L2, L2 / std::sqrt(static_cast<double>(n)),
                     cplx(re, im)};
}

double thm62_delta_default(int n) {
  const double L = std::log(static_cast<double>(n));
  return 1.0 / (std::sqrt(static_cast<double>(n)) * L * L * L);
}

LpNorm lp_norm(const CoefficientProfile& profile, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("p must be >= 1");
  LpNorm out;
  if (!profile.piecewise_constant()) {
    out.exact = false;
    const auto f = [&](double r) { return std::pow(std::abs(profile(r)), p); };
    out.value = quad(f, 0.0, profile.support_end());
    return out;
  }
  const auto& segs = profile.segments();
  std::vector<double> terms;
  terms.reserve(segs.size());
  KahanSum acc;
  for (const auto& s : segs) {
    const double t = std::pow(std::abs(s.value), p) * s.length;
    terms.push_back(t);
    acc.add(t);
  }
  out.value = acc.value();

  // trailing Raabe test on per-pulse terms (adjacent segment pairs):
  // rho ~ k (1 - t_{k+1}/t_k); rho <= 1 marks a non-summable tail
  std::vector<double> pulse;
  if (segs.size() % 2 == 0) {
    for (std::size_t i = 0; i + 1 < terms.size(); i += 2)
      pulse.push_back(terms[i] + terms[i + 1]);
  } else {
    pulse = terms;
  }
  const std::size_t k = pulse.size();
  if (k >= 32) {
    KahanSum rho;
    std::size_t count = 0;
    for (std::size_t i = (3 * k) / 4; i + 1 < k; ++i) {
      if (pulse[i] <= 0.0 || pulse[i + 1] <= 0.0) continue;
      rho.add(static_cast<double>(i + 1) * (1.0 - pulse[i + 1] / pulse[i]));
      ++count;
    }
    if (count > 0) out.divergent = rho.value() / static_cast<double>(count) <= 1.0;
  }
  return out;
}

}  // namespace krein
