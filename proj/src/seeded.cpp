#include "krein/seeded.hpp"

#include <cmath>

namespace krein {

std::uint64_t substream_seed(std::uint64_t master, const std::string& name) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return master ^ h;
}

double SeededRng::uniform() {
  // top 53 bits, exact dyadic in [0, 1)
  return static_cast<double>(eng_() >> 11) * 0x1p-53;
}

double SeededRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

std::int64_t SeededRng::uniform_int(std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_);
}

cplx SeededRng::in_disk(double radius) {
  for (;;) {
    const double x = uniform(-1.0, 1.0);
    const double y = uniform(-1.0, 1.0);
    if (x * x + y * y <= 1.0) return radius * cplx(x, y);
  }
}

CoefficientProfile random_profile(SeededRng& rng, int max_segments,
                                  double max_abs) {
  const int n = static_cast<int>(rng.uniform_int(1, max_segments));
  std::vector<PulseSegment> segs;
  segs.reserve(n);
  double r = rng.uniform(0.0, 0.5);
  for (int i = 0; i < n; ++i) {
    const double len = rng.uniform(0.05, 1.0);
    segs.push_back(make_segment(r, len, rng.in_disk(max_abs)));
    r += len + rng.uniform(0.0, 0.5);
  }
  return CoefficientProfile(std::move(segs));
}

Eigen::MatrixXcd random_matrix(SeededRng& rng, int m, double max_abs) {
  Eigen::MatrixXcd out(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) out(i, j) = rng.in_disk(max_abs);
  return out;
}

Eigen::MatrixXcd random_skew_hermitian(SeededRng& rng, int m, double max_abs) {
  const Eigen::MatrixXcd a = random_matrix(rng, m, max_abs);
  return 0.5 * (a - a.adjoint());
}

SakhnovichSystem random_system(SeededRng& rng, int m) {
  Eigen::VectorXd d(m);
  for (int i = 0; i < m; ++i) d(i) = rng.uniform(0.5, 2.0);
  const int n = static_cast<int>(rng.uniform_int(2, 6));
  std::vector<MatrixSegment> s1, s2;
  double r = rng.uniform(0.0, 0.3);
  for (int i = 0; i < n; ++i) {
    const double len = rng.uniform(0.2, 1.0);
    s1.push_back({r, len, random_skew_hermitian(rng, m)});
    s2.push_back({r, len, random_matrix(rng, m)});
    r += len + rng.uniform(0.0, 0.4);
  }
  return make_system(d, MatrixProfile(m, std::move(s1)),
                     MatrixProfile(m, std::move(s2)));
}

}  // namespace krein
