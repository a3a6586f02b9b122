#pragma once
// Finite-volume thermodynamics of the branching system: partition functions
//
//   F_n(beta) = (1/n) log sum over generation-n particles of e^{-beta V(u)},
//
// their limit counterpart from the laws module, and statistics of the Gibbs
// measure mu(u) proportional to e^{-beta V(u)} on generation n.  Under the
// first-order transition the free energy is linear (zero) past beta = 1 and
// the Gibbs measure freezes: at large beta it concentrates on the few
// particles near the minimum, which the participation ratio detects.
//
// Both operations walk one tree per call, deterministically in the seed;
// replica parallelism is the caller's loop (same contract as the engine).

#include <cstdint>
#include <vector>

#include "brw/engine.hpp"

namespace brw {

// Partition-function trace over an inverse-temperature grid on one tree.
struct ThermoTrace {
  int n = 0;
  std::vector<double> beta_grid;
  std::vector<double> f_n_values;  // (1/n) log Z_n(beta); NaN if not survived
  std::vector<double> f_limit;     // limiting free energy per grid point
  bool survived = false;
};

// Walks one tree and accumulates every beta in a single pass, each with a
// compensated sum, log-sum-exp-anchored at the running minimum of V(u) (the
// anchor keeps every term at or below one, so no beta can overflow).
// beta_grid must be nonempty, nonnegative, strictly increasing.  Throws
// AbortedReplica if the tree exceeds the population cap.
ThermoTrace partition_trace(const BrwParams& params,
                            std::vector<double> beta_grid, std::uint64_t seed);

// Gibbs-measure concentration statistics at one beta on one tree.
struct GibbsStats {
  double beta = 0.0;
  double participation_ratio = 0.0;  // sum of mu(u)^2, in (0,1]
  double max_atom = 0.0;             // largest mu(u), in (0,1]
  double support_size_eff = 0.0;     // 1 / participation_ratio
  double mass_sum = 0.0;             // sum of mu(u), re-added per atom (~1)
  std::uint64_t leaves = 0;          // generation-n population
};

// beta > 0; throws std::domain_error if the tree dies before the horizon
// (the Gibbs measure needs at least one particle).  Stores the generation-n
// positions, so memory is O(|T_n|).
GibbsStats gibbs_stats(const BrwParams& params, double beta,
                       std::uint64_t seed);

}  // namespace brw
