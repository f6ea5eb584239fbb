#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace krein {

using cplx = std::complex<double>;

// propagation produced a non-finite state; .what() names the offending r
struct NumericalFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Neumaier-compensated accumulator; keeps long sums near working precision
class KahanSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline bool finite(const cplx& z) {
  return std::isfinite(z.real()) && std::isfinite(z.imag());
}

enum class RunMode { serial, parallel };

// index loop used by the lambda-grid sweeps; identical iteration order and
// per-index work in both modes, so results are bitwise mode-independent
template <typename Fn>
void for_each_index(std::int64_t n, RunMode mode, Fn&& fn) {
  if (mode == RunMode::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) fn(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
  }
}

}  // namespace krein
