#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "krein/profile.hpp"
#include "krein/sakhnovich.hpp"
#include "krein/util.hpp"

namespace krein {

// FNV-1a of the name XORed into the master seed; distinct names give
// independent substreams under one master seed
std::uint64_t substream_seed(std::uint64_t master, const std::string& name);

class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : eng_(seed) {}
  SeededRng(std::uint64_t master, const std::string& name)
      : eng_(substream_seed(master, name)) {}

  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);  // inclusive
  cplx in_disk(double radius);             // |z| <= radius, rejection

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

// disjoint segments, lengths in [0.05, 1], gaps in [0, 0.5], values in the
// closed disk of radius max_abs
CoefficientProfile random_profile(SeededRng& rng, int max_segments = 100,
                                  double max_abs = 2.0);

Eigen::MatrixXcd random_matrix(SeededRng& rng, int m, double max_abs = 1.0);
Eigen::MatrixXcd random_skew_hermitian(SeededRng& rng, int m,
                                       double max_abs = 1.0);

// piecewise-constant A1 (skew-Hermitian) and A2 on a handful of segments,
// D entries in [0.5, 2]
SakhnovichSystem random_system(SeededRng& rng, int m);

}  // namespace krein
