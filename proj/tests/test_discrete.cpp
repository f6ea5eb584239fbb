#include "krein/discrete.hpp"

#include <cmath>
#include <complex>

#include "doctest.h"
#include "krein/seeded.hpp"

using namespace krein;

namespace {

constexpr std::uint64_t kMaster = 0x6f70756321ULL;

double true_abs(cplx hat, double log_scale) {
  return std::abs(hat) * std::exp(log_scale);
}

}  // namespace

TEST_CASE("zero coefficients give monomials") {
  const auto seq = verblunsky_zero();
  const cplx z(0.3, 0.4);
  const auto polys = evaluate_polys(seq, z, 50);
  for (const auto& pt : polys.points) {
    CHECK(pt.log_scale == 0.0);
    CHECK(std::abs(pt.phi - std::pow(z, static_cast<double>(pt.n))) < 1e-13);
    CHECK(std::abs(pt.phi_star - 1.0) == 0.0);
  }
}

TEST_CASE("first step closed form at z = 0") {
  const double a0 = 0.6;
  PolyPair p;
  p.z = cplx(0.0, 0.0);
  const auto q = szego_step(p, cplx(a0, 0.0));
  const double g = 1.0 / std::sqrt(1.0 - a0 * a0);
  CHECK(std::abs(q.phi - cplx(-a0 * g, 0.0)) < 1e-15);
  CHECK(std::abs(q.phi_star - cplx(g, 0.0)) < 1e-15);
  CHECK(q.n == 1);
}

TEST_CASE("step rejects coefficients outside the open disk") {
  PolyPair p;
  p.z = cplx(0.5, 0.0);
  CHECK_THROWS_AS(szego_step(p, cplx(1.0, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(szego_step(p, cplx(0.8, 0.7)), std::invalid_argument);
}

TEST_CASE("energy identity after one step, both sides exact") {
  const cplx z(0.3, -0.2);
  const cplx a0(0.25, 0.45);
  PolyPair p;
  p.z = z;
  const auto q = szego_step(p, a0);
  const double lhs = std::norm(q.phi_star) - std::norm(q.phi);
  const double rhs = (1.0 - std::norm(z)) * 1.0;  // sum_{k<1} |phi_k|^2 = 1
  CHECK(std::abs(lhs - rhs) < 1e-15);
}

TEST_CASE("unimodular spectral points balance phi and phi*") {
  SeededRng rng(kMaster, "balance");
  const auto seq = verblunsky_geometric(cplx(0.4, 0.3), 0.98);
  for (double theta : {0.0, 1.1, 2.9}) {
    const cplx z = std::polar(1.0, theta);
    const auto polys = evaluate_polys(seq, z, 10000, 100);
    for (const auto& pt : polys.points) {
      if (pt.n == 0) continue;
      const double a = std::abs(pt.phi), b = std::abs(pt.phi_star);
      CHECK(std::abs(a - b) <= 1e-10 * (a + b));
    }
  }
}

TEST_CASE("zero coefficients at |z| = 1/2: geometric running sum") {
  const auto seq = verblunsky_zero();
  const auto polys = evaluate_polys(seq, cplx(0.5, 0.0), 40);
  for (const auto& pt : polys.points) {
    const double want =
        (1.0 - std::pow(0.25, static_cast<double>(pt.n))) / 0.75;
    CHECK(std::abs(pt.sum_sq - want) < 1e-14);
  }
  // (1 - |z|^2) sum -> 1 as the tail vanishes: sum -> 4/3
  CHECK(std::abs(polys.points.back().sum_sq - 4.0 / 3.0) < 1e-12);
}

TEST_CASE("seeded sequences satisfy the energy identity") {
  SeededRng rng(kMaster, "energy");
  SUBCASE("short runs, random z inside the disk") {
    for (int trial = 0; trial < 8; ++trial) {
      const cplx a0 = rng.in_disk(0.8);
      const double q = rng.uniform(0.3, 0.95);
      const auto seq = verblunsky_geometric(a0, q);
      const cplx z = rng.in_disk(0.7);
      const auto polys = evaluate_polys(seq, z, 200);
      CHECK(discrete_energy_check(polys) < 1e-10);
    }
  }
  SUBCASE("long run near the boundary") {
    const auto seq = verblunsky_power(0.5);
    const auto polys = evaluate_polys(seq, cplx(0.63, 0.64), 10000, 50);
    CHECK(discrete_energy_check(polys) < 1e-10);
  }
}

TEST_CASE("square-summable dichotomy at an interior point") {
  const cplx z(0.5, 0.3);
  SUBCASE("summable tail: phi* settles (Cauchy differences shrink)") {
    const auto seq = verblunsky_power(2.0);
    const auto polys = evaluate_polys(seq, z, 3200, 1);
    const auto at = [&](std::int64_t n) {
      const auto& pt = polys.points[static_cast<std::size_t>(n)];
      return pt.phi_star * std::exp(pt.log_scale);
    };
    double prev = std::abs(at(800) - at(400));
    for (std::int64_t n : {800L, 1600L}) {
      const double next = std::abs(at(2 * n) - at(n));
      CHECK(next < prev);
      prev = next;
    }
    CHECK(std::abs(at(3200) - at(1600)) < 1e-3);
  }
  SUBCASE("non-summable tail: the energy sum grows without settling") {
    const auto seq = verblunsky_power(0.5);
    const auto polys = evaluate_polys(seq, z, 10000, 1000);
    std::vector<double> sums;
    for (const auto& pt : polys.points)
      sums.push_back(pt.sum_sq * std::exp(2.0 * pt.log_scale));
    CHECK(sums.back() > 10.0 * sums[1]);
    // |phi*| is forced upward by the identity once the sum diverges
    const auto& last = polys.points.back();
    CHECK(true_abs(last.phi_star, last.log_scale) >
          3.0 * true_abs(polys.points[1].phi_star, polys.points[1].log_scale));
  }
}

TEST_CASE("phi* never vanishes inside the disk") {
  SeededRng rng(kMaster, "nonvanish");
  for (int trial = 0; trial < 6; ++trial) {
    const cplx z = rng.in_disk(0.9);
    const auto seq = verblunsky_geometric(rng.in_disk(0.7), 0.9);
    const auto polys = evaluate_polys(seq, z, 500, 25);
    const double floor = std::sqrt(1.0 - std::norm(z));
    for (const auto& pt : polys.points) {
      if (pt.n == 0) continue;
      CHECK(true_abs(pt.phi_star, pt.log_scale) >= floor * (1.0 - 1e-12));
    }
  }
}

TEST_CASE("renormalization keeps the identity through huge growth") {
  VerblunskySeq seq;
  seq.a = [](std::int64_t) { return cplx(0.0, 0.9); };
  seq.square_summable = false;
  seq.name = "constant-0.9i";
  // (1,1) straddles both eigendirections here, so the state grows ~4.4x/step
  const auto polys = evaluate_polys(seq, cplx(1.0, 0.0), 2000, 100);
  CHECK(polys.points.back().log_scale > 100.0);
  CHECK(discrete_energy_check(polys) < 1e-10);
  // |z| = 1 balance survives the rescales
  const auto& last = polys.points.back();
  CHECK(std::abs(std::abs(last.phi) - std::abs(last.phi_star)) <
        1e-10 * std::abs(last.phi_star));
}

TEST_CASE("family constructors validate their parameters") {
  CHECK_THROWS_AS(verblunsky_geometric(cplx(1.2, 0.0), 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(verblunsky_geometric(cplx(0.5, 0.0), 1.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(verblunsky_power(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(verblunsky_power(0.5, 3.0), std::invalid_argument);
  CHECK_NOTHROW(verblunsky_power(0.5));
  CHECK_NOTHROW(verblunsky_phase_drift(0.5));
  const auto pd = verblunsky_phase_drift(0.5);
  // modulus decays like n^{-1/2}, phase drifts logarithmically
  CHECK(std::abs(std::abs(pd.a(14)) - std::pow(16.0, -0.5)) < 1e-14);
  CHECK(!pd.square_summable);
  const auto pw = verblunsky_power(2.0);
  CHECK(pw.square_summable);
}

TEST_CASE("evaluate_polys argument validation") {
  const auto seq = verblunsky_zero();
  CHECK_THROWS_AS(evaluate_polys(seq, cplx(1.5, 0.0), 10),
                  std::invalid_argument);
  CHECK_THROWS_AS(evaluate_polys(seq, cplx(0.5, 0.0), 10, 0),
                  std::invalid_argument);
  const auto polys = evaluate_polys(seq, cplx(0.5, 0.0), 10, 3);
  // records n = 0, 3, 6, 9 and the final point 10
  REQUIRE(polys.points.size() == 5);
  CHECK(polys.points.back().n == 10);
}

TEST_CASE("analogy table pairs the two solvers") {
  const CoefficientProfile zero_profile;
  const auto seq = verblunsky_zero();
  AnalogyParams params;
  params.r_end = 40.0;
  params.n_steps = 2000;
  const auto rows = analogy_table(zero_profile, seq, params);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].side == "continuous");
  CHECK(rows[1].side == "discrete");
  for (const auto& row : rows) {
    CHECK(row.energy_residual < 1e-9);
    CHECK(row.classification == "converges");
    CHECK(std::abs(row.limit_modulus - 1.0) < 1e-10);
  }
}
