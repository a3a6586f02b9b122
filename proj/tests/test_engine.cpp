#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include "brw/detail/walker.hpp"
#include "brw/engine.hpp"
#include "brw/laws.hpp"

using namespace brw;

namespace {

constexpr double kRefExtinctionQ = 0.136095426820732;  // q = e^{s(q-1)}

unsigned hw_threads() {
  return std::max(1u, std::thread::hardware_concurrency());
}

BrwParams default_params(int n) {
  BrwParams p;
  p.displacement = default_displacement_spec();
  p.offspring = poisson_offspring(p.displacement);
  p.horizon_n = n;
  return p;
}

BrwParams point_params(int children, double disp, int n) {
  BrwParams p;
  p.displacement = default_displacement_spec();  // unused under point mode
  p.offspring = deterministic_offspring(children);
  p.horizon_n = n;
  p.test_point_displacement = disp;
  return p;
}

}  // namespace

TEST_CASE("parameter validation") {
  BrwParams p = default_params(0);
  CHECK_THROWS_AS(simulate_tree(p, 1), std::invalid_argument);
  p.horizon_n = 4;
  p.caps.max_particles = 0;
  CHECK_THROWS_AS(simulate_tree(p, 1), std::invalid_argument);
  p.caps = PopulationCaps{};
  CHECK_THROWS_AS(simulate_many(p, 1, 0, 1), std::invalid_argument);
}

TEST_CASE("single-path tree: one child, constant displacement") {
  const BrwParams p = point_params(1, 0.7, 9);
  const MinimumReport rep = simulate_tree(p, 12345);
  CHECK(rep.survived);
  CHECK(rep.eta_n == 1);
  CHECK(rep.particles_visited == 10);
  CHECK(rep.m_n == doctest::Approx(6.3).epsilon(1e-12));
  CHECK(rep.w_n == doctest::Approx(std::exp(-6.3)).epsilon(1e-12));
  REQUIRE(rep.min_path.size() == 10);
  CHECK(rep.min_path[0] == 0.0);
  CHECK(rep.min_path[9] == rep.m_n);
  for (int k = 0; k < 10; ++k)
    CHECK(rep.min_path[k] == doctest::Approx(0.7 * k).epsilon(1e-12));
  CHECK_FALSE(rep.drops.tau.has_value());  // all increments positive
  CHECK(rep.tie_path.empty());

  // Negative constant displacement: every step is a drop.
  BrwParams pneg = point_params(1, -5.0, 4);
  pneg.drop_zeta = 4.0;
  const MinimumReport rn = simulate_tree(pneg, 7);
  CHECK(rn.drops.tau == 1);
  CHECK(rn.drops.tau2 == 2);
  CHECK(rn.drops.drop_size == doctest::Approx(-5.0));
}

TEST_CASE("degenerate full binary tree: all positions zero") {
  const BrwParams p = point_params(2, 0.0, 10);
  const MinimumReport rep = simulate_tree(p, 99);
  CHECK(rep.survived);
  CHECK(rep.m_n == 0.0);
  CHECK(rep.eta_n == 1024);                 // 2^10 leaves all tie
  CHECK(rep.w_n == 1024.0);                 // exact sum of ones
  CHECK(rep.particles_visited == 2047);     // 2^11 - 1 nodes
  CHECK_FALSE(rep.tie_path.empty());        // ties are logged
  for (double v : rep.min_path) CHECK(v == 0.0);
}

TEST_CASE("martingale trace: closed forms and exact agreement at the horizon") {
  const std::vector<double> w2 = martingale_trace(point_params(2, 0.0, 12), 5);
  REQUIRE(w2.size() == 12);
  for (int k = 1; k <= 12; ++k) CHECK(w2[k - 1] == std::pow(2.0, k));

  const std::vector<double> w1 = martingale_trace(point_params(1, 0.4, 8), 5);
  for (int k = 1; k <= 8; ++k)
    CHECK(w1[k - 1] == doctest::Approx(std::exp(-0.4 * k)).epsilon(1e-12));

  // Same seed => same tree => the trace ends exactly at simulate_tree's w_n.
  const BrwParams p = default_params(8);
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 42ull, 1234567ull}) {
    const std::vector<double> tr = martingale_trace(p, seed);
    const MinimumReport rep = simulate_tree(p, seed);
    CHECK(tr.back() == rep.w_n);  // bitwise
  }
}

TEST_CASE("two-way check against materialized generations at small horizon") {
  const BrwParams p = default_params(6);
  int surviving = 0;
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    const MinimumReport rep = simulate_tree(p, seed);
    const auto gens = materialize_generations(p, seed);
    REQUIRE(gens.size() == 7);

    std::uint64_t total = 0;
    for (const auto& g : gens) total += g.size();
    CHECK(total == rep.particles_visited);

    if (!rep.survived) {
      CHECK(gens[6].empty());
      CHECK(rep.w_n == 0.0);
      CHECK(rep.eta_n == 0);
      CHECK(std::isinf(rep.m_n));
      continue;
    }
    ++surviving;

    // Recompute W_n from the materialized generation, same order, same
    // compensated summation: must agree bit-for-bit.
    detail::CompensatedSum w;
    double best = std::numeric_limits<double>::infinity();
    std::uint64_t eta = 0;
    for (double v : gens[6]) {
      w.add(std::exp(-v));
      if (v < best) {
        best = v;
        eta = 1;
      } else if (v == best) {
        ++eta;
      }
    }
    CHECK(w.sum == rep.w_n);
    CHECK(best == rep.m_n);
    CHECK(eta == rep.eta_n);

    // The minimizing ray is a real ray of this tree: every position appears
    // in its generation (bitwise) and the endpoints match the contract.
    REQUIRE(rep.min_path.size() == 7);
    CHECK(rep.min_path[0] == 0.0);
    CHECK(rep.min_path[6] == rep.m_n);
    for (int k = 0; k <= 6; ++k) {
      const auto& g = gens[k];
      CHECK(std::find(g.begin(), g.end(), rep.min_path[k]) != g.end());
    }
  }
  CHECK(surviving > 0);  // the seed sweep must exercise the surviving branch
}

TEST_CASE("offspring fixed point: extinction probability oracle") {
  // Fast generation-size recursion (sums of independent Poisson counts are
  // Poisson of the summed mean), independent of the tree walker; validates
  // the frozen root of q = exp(s (q - 1)).
  const double s = default_displacement_spec().s;
  std::mt19937_64 gen(2026);
  const int reps = 20000;
  int extinct = 0;
  for (int r = 0; r < reps; ++r) {
    std::uint64_t pop = 1;
    for (int k = 0; k < 20 && pop > 0; ++k) {
      if (pop > 200) break;  // extinction from 200 particles is ~q^200 -- negligible
      std::poisson_distribution<std::uint64_t> next(s * double(pop));
      pop = next(gen);
    }
    extinct += (pop == 0);
  }
  const double qhat = double(extinct) / reps;
  const double se = std::sqrt(kRefExtinctionQ * (1 - kRefExtinctionQ) / reps);
  CHECK(std::abs(qhat - kRefExtinctionQ) < 3.0 * se);
}

// Exact probability of extinction by generation n for Poisson(s) offspring:
// q_0 = 0, q_{k+1} = exp(s (q_k - 1)).
static double extinction_by(int n, double s) {
  double q = 0.0;
  for (int k = 0; k < n; ++k) q = std::exp(s * (q - 1.0));
  return q;
}

TEST_CASE("engine survival matches the exact finite-depth extinction iterate") {
  const double s = default_displacement_spec().s;
  // The iterate converges geometrically (contraction factor s*q ~ 0.31) to
  // the fixed point, so by depth 24 it sits on top of the frozen root.
  CHECK(std::abs(extinction_by(24, s) - kRefExtinctionQ) < 1e-9);

  {  // Depth 10, tight band.
    const BrwParams p = default_params(10);
    const std::uint64_t reps = 3000;
    const ReplicaSet rs = simulate_many(p, 0xabcdef, reps, hw_threads());
    CHECK(rs.aborted == 0);
    std::uint64_t survived = 0;
    for (const auto& r : rs.results) survived += (r && r->survived);
    const double phat = double(survived) / double(reps);
    const double target = 1.0 - extinction_by(10, s);
    const double se = std::sqrt(target * (1 - target) / double(reps));
    CHECK(std::abs(phat - target) < 3.0 * se);
  }

  {  // Depth 16 smoke: deep trees are expensive, so few replicas, wide band.
    const BrwParams p = default_params(16);
    const std::uint64_t reps = 60;
    const ReplicaSet rs = simulate_many(p, 0xfeed5, reps, hw_threads());
    CHECK(rs.aborted == 0);
    std::uint64_t survived = 0;
    for (const auto& r : rs.results) survived += (r && r->survived);
    const double phat = double(survived) / double(reps);
    const double target = 1.0 - extinction_by(16, s);
    const double se = std::sqrt(target * (1 - target) / double(reps));
    CHECK(std::abs(phat - target) < 3.0 * se);
  }
}

TEST_CASE("martingale mean and minimum-multiplicity") {
  // E[W_n] = 1 exactly, but W_n has an index-one power tail (infinite
  // variance): the sample standard error can understate the error of the
  // sample mean when a replica draws a mid-size excursion, so the band is
  // the wider of 3*se and a fixed absolute margin.
  for (int n : {4, 8}) {
    const BrwParams p = default_params(n);
    const std::uint64_t reps = 10000;
    const ReplicaSet rs = simulate_many(p, 0x77d311207741ULL, reps, hw_threads());
    double sum = 0, sum2 = 0;
    std::uint64_t survivors = 0, unique_min = 0;
    for (const auto& r : rs.results) {
      REQUIRE(r.has_value());
      sum += r->w_n;
      sum2 += r->w_n * r->w_n;
      if (r->survived) {
        ++survivors;
        unique_min += (r->eta_n == 1);
        CHECK((r->eta_n == 1) == r->tie_path.empty());
      } else {
        CHECK(r->w_n == 0.0);
      }
    }
    const double mean = sum / double(reps);
    const double se = std::sqrt((sum2 / reps - mean * mean) / double(reps));
    CHECK(std::abs(mean - 1.0) < std::max(3.0 * se, 0.10));

    // Ties under a continuous displacement law are measure-zero.
    CHECK(double(unique_min) / double(survivors) >= 0.9999);
  }
}

TEST_CASE("replica batches: determinism, thread independence, single-replica") {
  const BrwParams p = default_params(6);
  const ReplicaSet a = simulate_many(p, 31337, 64, 1);
  const ReplicaSet b = simulate_many(p, 31337, 64, 8);
  const ReplicaSet c = simulate_many(p, 31337, 64, 3);
  for (int r = 0; r < 64; ++r) {
    REQUIRE(a.results[r].has_value());
    REQUIRE(b.results[r].has_value());
    CHECK(a.results[r]->m_n == b.results[r]->m_n);
    CHECK(a.results[r]->w_n == b.results[r]->w_n);
    CHECK(a.results[r]->eta_n == b.results[r]->eta_n);
    CHECK(a.results[r]->particles_visited == c.results[r]->particles_visited);
    CHECK(a.results[r]->min_path == c.results[r]->min_path);
  }
  const MinimumReport solo = simulate_tree(p, derive_seed(31337, 0, 0));
  CHECK(solo.w_n == a.results[0]->w_n);
  CHECK(solo.m_n == a.results[0]->m_n);

  // Changing the task namespace changes the streams.
  const ReplicaSet d = simulate_many(p, 31337, 4, 1, /*task=*/9);
  CHECK(d.results[0]->w_n != a.results[0]->w_n);
}

TEST_CASE("population cap aborts the replica, never truncates") {
  BrwParams p = point_params(2, 0.0, 16);  // deterministic 2^17-1 nodes
  p.caps.max_particles = 1000;
  bool thrown = false;
  try {
    simulate_tree(p, 5);
  } catch (const AbortedReplica& a) {
    thrown = true;
    CHECK(a.particles_visited == 1001);
  }
  CHECK(thrown);

  const ReplicaSet rs = simulate_many(p, 1, 5, 2);
  CHECK(rs.aborted == 5);
  for (int r = 0; r < 5; ++r) {
    CHECK_FALSE(rs.results[r].has_value());
    CHECK(rs.abort_visits[r] == 1001);
  }
}

TEST_CASE("drop decomposition of a hand-built ray") {
  MinimumReport rep;
  rep.survived = true;
  rep.min_path = {0.0, 1.0, -4.0, -2.0, -9.0};  // increments 1, -5, 2, -7
  rep.m_n = -9.0;

  const DropDecomposition d4 = minimizing_path_diagnostics(rep, 4.0);
  CHECK(d4.tau == 2);
  CHECK(d4.tau2 == 4);
  CHECK(d4.drop_size == doctest::Approx(-5.0));

  const DropDecomposition d10 = minimizing_path_diagnostics(rep, 10.0);
  CHECK_FALSE(d10.tau.has_value());
  CHECK_FALSE(d10.tau2.has_value());
  CHECK_FALSE(d10.drop_size.has_value());

  MinimumReport dead;
  dead.survived = false;
  CHECK_THROWS_AS(minimizing_path_diagnostics(dead, 1.0), std::domain_error);
}
