#pragma once
// Streaming simulation of the branching random walk.
//
// One tree of depth n is walked depth-first at memory O(n * family size),
// producing the exact generation-n minimum M_n, the additive martingale
// value W_n = sum over |u|=n of e^-V(u), the number of minimizing particles
// eta_n, one minimizing ray, and a drop decomposition of that ray.  Replica
// batches derive one seed per replica from a root seed, so results never
// depend on thread count or completion order.

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "brw/laws.hpp"

namespace brw {

struct PopulationCaps {
  // Total nodes visited per tree, root included.
  std::uint64_t max_particles = std::uint64_t(1) << 40;
  // On overflow the replica is aborted and reported, never truncated into an
  // average (a truncated tree would bias every statistic silently).
};

struct BrwParams {
  DisplacementSpec displacement;
  OffspringSpec offspring;
  int horizon_n = 1;
  PopulationCaps caps;
  // Threshold for the drop decomposition attached to reports; <= 0 selects
  // the default n/(ln n)^3 (no decomposition for horizon_n < 2).
  double drop_zeta = 0.0;
  // Test-only: displace every child by this constant instead of a tilted
  // draw (degenerate laws for closed-form checks).
  std::optional<double> test_point_displacement;
};

// First and second crossing of the minimizing ray's increments below -zeta.
struct DropDecomposition {
  double zeta = std::numeric_limits<double>::infinity();
  std::optional<int> tau;          // first i >= 1 with path[i]-path[i-1] < -zeta
  std::optional<int> tau2;         // second such index
  std::optional<double> drop_size; // the increment at tau
};

struct MinimumReport {
  bool survived = false;
  double m_n = std::numeric_limits<double>::infinity();
  double w_n = 0.0;
  std::uint64_t eta_n = 0;
  // Positions V(u_0)..V(u_n) along one minimizing ray (empty if extinct).
  std::vector<double> min_path;
  // Second minimizing ray if an exact floating-point tie occurred (ties are
  // measure-zero for continuous displacements; kept as the tie log).
  std::vector<double> tie_path;
  std::uint64_t particles_visited = 0;
  DropDecomposition drops;
};

class AbortedReplica : public std::runtime_error {
 public:
  explicit AbortedReplica(std::uint64_t visited)
      : std::runtime_error("engine: population cap exceeded"),
        particles_visited(visited) {}
  std::uint64_t particles_visited;
};

// Walks one full tree; deterministic in (params, seed).  Throws
// AbortedReplica past the population cap and std::invalid_argument on bad
// params (horizon_n < 1 or zero cap).
MinimumReport simulate_tree(const BrwParams& params, std::uint64_t seed);

// W_1..W_n for the same tree simulate_tree(params, seed) walks (index k-1
// holds W_k).  The final entry equals that report's w_n bit-for-bit: both
// accumulate the same leaf terms in the same order with compensated sums.
std::vector<double> martingale_trace(const BrwParams& params,
                                     std::uint64_t seed);

// Pure rescan of a minimizing ray at an arbitrary threshold.  Throws
// std::domain_error if the report did not survive.
DropDecomposition minimizing_path_diagnostics(const MinimumReport& report,
                                              double zeta);

struct ReplicaSet {
  // results[r] is replica r's report, or empty if that replica aborted.
  std::vector<std::optional<MinimumReport>> results;
  // abort_visits[r] carries particles_visited at the abort (0 otherwise).
  std::vector<std::uint64_t> abort_visits;
  std::uint64_t aborted = 0;
};

// Replica r uses seed derive_seed(root_seed, task, r).  Slots are indexed by
// replica, so the result is a pure function of (params, root_seed, task,
// replicas) regardless of `threads`.
ReplicaSet simulate_many(const BrwParams& params, std::uint64_t root_seed,
                         std::uint64_t replicas, unsigned threads,
                         std::uint64_t task = 0);

// Debug helper (horizon_n <= 14): positions of every generation of the very
// tree simulate_tree(params, seed) walks, in visitation order.
std::vector<std::vector<double>> materialize_generations(
    const BrwParams& params, std::uint64_t seed);

}  // namespace brw
