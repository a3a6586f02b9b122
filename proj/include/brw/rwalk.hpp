#pragma once
// One-dimensional random walk under the displacement law: path simulation,
// drop times, the renewal function of the running maximum, local (interval)
// probabilities, and profiling of walks conditioned to end far below their
// drift.  These are the single-path counterparts of the tree simulators:
// the minimum of the branching system is governed by one walk making one
// macroscopic downward jump, and this module measures exactly those walk
// quantities.
//
// Determinism contract: multi-replica operations derive the seed of replica
// r as derive_seed(root_seed, task, r) with a fixed per-operation task id
// (renewal 31, local probabilities 32, conditioned profiles 33), write into
// per-replica slots, and reduce in index order; results are bit-identical
// across thread counts.

#include <cstdint>
#include <optional>
#include <vector>

#include "brw/laws.hpp"

namespace brw {

// A realized walk: positions[k] is the partial sum after k increments,
// positions[0] == start == 0.
struct WalkPath {
  double start = 0.0;
  std::vector<double> increments;  // X_1..X_n
  std::vector<double> positions;   // S_0..S_n
};

// Simulates n i.i.d. increments from the displacement law (or a point mass,
// for deterministic test walks).  n >= 0; deterministic in `seed`.
WalkPath simulate_walk(const DisplacementSpec& spec, std::int64_t n,
                       std::uint64_t seed,
                       std::optional<double> test_point_increment = {});

// First and second indices j (1-based) with X_j < -zeta; absent when the
// walk never drops that far.  Pure function of (increments, zeta).
struct DropTimes {
  std::optional<std::int64_t> tau;
  std::optional<std::int64_t> tau2;
};
DropTimes drop_times(const std::vector<double>& increments, double zeta);
DropTimes drop_times(const WalkPath& path, double zeta);

// Which classical reading the renewal plateau R(x)/x supports: the
// reciprocal drift 1/m (first-passage count ~ x/m) or the drift m itself.
enum class RenewalReading { ReciprocalDrift, Drift };
const char* to_string(RenewalReading reading);

// Renewal function of the running maximum: R(x) = expected number of
// indices n >= 0 whose running maximum max_{k<=n} S_k lies at or below x.
// Estimated path-exactly: the positive drift sends the maximum above
// max(x_grid) after an a.s. finite number of steps, so each replica yields
// the exact count for every grid point with no truncation bias.
struct RenewalEstimate {
  std::vector<double> x_grid;
  std::vector<double> r_values;  // nondecreasing in x by construction
  std::vector<double> ratios;    // r_values / x
  std::vector<double> stderrs;   // standard error of each r_value
  double plateau = 0.0;          // ratio at the largest grid point
  bool plateau_converged = false;  // last two ratios within 10%
  RenewalReading reading = RenewalReading::ReciprocalDrift;
  std::uint64_t aborted_replicas = 0;  // hit the safety horizon (censored)
};
// x_grid must be positive and strictly increasing; replicas >= 2.  The
// safety horizon bounds the per-replica step count; a replica that hits it
// is kept (censored low) and counted in aborted_replicas.
RenewalEstimate renewal_R(const DisplacementSpec& spec,
                          std::vector<double> x_grid, std::uint64_t replicas,
                          std::uint64_t root_seed, unsigned threads = 1,
                          std::optional<double> test_point_increment = {},
                          std::uint64_t safety_horizon = 10'000'000);

// Direct Monte Carlo estimate of P(S_n - y in [0, h]).  `reliable` demands
// at least 100 observed hits; below that the estimate is still reported but
// flagged.
struct LocalProbEstimate {
  double estimate = 0.0;
  double stderr_est = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t replicas = 0;
  bool reliable = false;
};
LocalProbEstimate local_prob(const DisplacementSpec& spec, std::int64_t n,
                             double y, double h, std::uint64_t replicas,
                             std::uint64_t root_seed, unsigned threads = 1);

// Companion diagnostic for local_prob: the scaled quantity
// estimate * n^alpha / c across an n-grid, expected to stay bounded for
// fixed y well below the drift line (the interval is then reached by one
// big jump whose density contributes the n^-alpha factor).
struct ScaledLocalPoint {
  std::int64_t n = 0;
  LocalProbEstimate prob;
  double scaled = 0.0;
};
std::vector<ScaledLocalPoint> scaled_local_profile(
    const DisplacementSpec& spec, const std::vector<std::int64_t>& n_grid,
    double y, double h, std::uint64_t replicas, std::uint64_t root_seed,
    unsigned threads = 1);

// Profile of walks conditioned on the rare event
//   S_n <= alpha_n(n) - x,   min_{tau <= j <= n} S_j >= alpha_n(n) - x - L,
// where tau is the first drop below -zeta_n(n) (required to exist).  Among
// such paths the drop should be unique, late, and of macroscopic size
// close to -m*n: the profile reports exactly those three statistics.
struct BigJumpHit {
  std::uint64_t replica = 0;
  std::int64_t tau = 0;
  std::optional<std::int64_t> tau2;
  double jump_over_n = 0.0;  // X_tau / n
};
struct BigJumpProfile {
  std::uint64_t replicas = 0;
  std::uint64_t hits = 0;
  bool conclusive = false;  // at least 100 hits
  double threshold = 0.0;   // alpha_n(n) - x
  double zeta = 0.0;        // drop size zeta_n(n)
  double floor_l = 0.0;
  std::vector<BigJumpHit> sample;     // one record per hit, replica order
  double fraction_single_drop = 0.0;  // hits with no second drop
  double fraction_second_drop = 0.0;
  double median_tau_lag = 0.0;       // median of n - tau over hits
  double median_jump_over_n = 0.0;   // median of X_tau / n over hits
};
// n >= 2 (the default drop threshold needs it); floor_l > 0; replicas >= 1.
// drop_zeta overrides the drop threshold (default: zeta_n(n)).  The default
// sequence grows only like n/(log n)^3, so at simulable n it still counts
// ordinary fluctuations as drops and the first drop lands early, where the
// floor constraint cannot hold; a larger override isolates the macroscopic
// jump the conditioning produces.
BigJumpProfile big_jump_profile(const DisplacementSpec& spec, std::int64_t n,
                                double x, std::uint64_t replicas,
                                std::uint64_t root_seed, unsigned threads = 1,
                                double floor_l = 5.0,
                                std::optional<double> drop_zeta = {});

}  // namespace brw
