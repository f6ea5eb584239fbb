#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "krein/seeded.hpp"
#include "krein/spectral.hpp"

// times the lambda-grid density sweep in serial and parallel mode on the
// same profile and asserts the two sweeps agree bitwise; grid size and
// repeat count come from argv so CI can keep the run short

namespace {

double time_once(const krein::CoefficientProfile& profile, double r_end,
                 const std::vector<double>& grid, krein::RunMode mode,
                 krein::SpectralReport& out) {
  const auto t0 = std::chrono::steady_clock::now();
  out = krein::density_at(profile, r_end, grid, mode);
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  const int points = argc > 1 ? std::atoi(argv[1]) : 2000;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 3;
  if (points < 2 || repeats < 1) {
    std::fprintf(stderr, "usage: %s [grid-points >= 2] [repeats >= 1]\n",
                 argv[0]);
    return 2;
  }

  krein::SeededRng rng(20260819u, "bench");
  const auto profile = krein::random_profile(rng, 60, 1.5);
  const double r_end = profile.support_end() + 1.0;
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i)
    grid[i] = -10.0 + 20.0 * i / (points - 1);

  std::printf("%-10s %-12s %-12s\n", "mode", "best [s]", "mean [s]");
  krein::SpectralReport serial_rep, parallel_rep;
  for (const auto mode : {krein::RunMode::serial, krein::RunMode::parallel}) {
    auto& rep = mode == krein::RunMode::serial ? serial_rep : parallel_rep;
    double best = 1e99, total = 0.0;
    for (int k = 0; k < repeats; ++k) {
      const double t = time_once(profile, r_end, grid, mode, rep);
      best = best < t ? best : t;
      total += t;
    }
    std::printf("%-10s %-12.4f %-12.4f\n",
                mode == krein::RunMode::serial ? "serial" : "parallel", best,
                total / repeats);
  }

  for (int i = 0; i < points; ++i)
    if (serial_rep.density[i] != parallel_rep.density[i]) {
      std::fprintf(stderr,
                   "density mismatch at grid index %d: %.17g vs %.17g\n", i,
                   serial_rep.density[i], parallel_rep.density[i]);
      return 1;
    }
  std::printf("serial and parallel densities agree bitwise (%d points)\n",
              points);
  return 0;
}
