#pragma once
// Size-biased (spinal) view of the branching random walk.
//
// The size-biased measure reweights a tree by W_n and marks one distinguished
// ray, the spine, chosen leaf-by-leaf proportionally to e^-V(u).  Every
// expectation under that measure is computed here as a plain expectation
// under the original law with importance weights: one family contributes one
// candidate step per child, the candidate carrying displacement xi getting
// weight e^-xi, so the weighted mixture over candidates represents one
// spine step exactly.  Growing a spine for k steps therefore multiplies the
// family normalizers W_1(family) while the spine child is picked with
// probability e^-xi / W_1(family); a childless family ends the spine with
// weight zero.
//
// Replica seeding: every operation derives per-replica seeds as
// derive_seed(root_seed, task, replica) with fixed task ids:
//   11 spine paths / 12 direct walks   (spine_marginal_check)
//   13 tree side   / 14 walk side      (many_to_one_check)
//   20 + j                             (series term j)
// so results are pure functions of (inputs, root_seed) at any thread count.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "brw/engine.hpp"
#include "brw/laws.hpp"
#include "brw/rng.hpp"

namespace brw {

// One candidate spine step cut out of a sampled family: the candidate's own
// displacement, its siblings' displacements, and the weight e^-spine_disp.
struct SpineStep {
  double spine_disp = 0.0;
  std::vector<double> sibling_disps;
  double weight = 0.0;
};

// Samples one family (child count, then tilted child displacements) and
// returns one SpineStep per candidate child.  A childless family returns an
// empty vector (a weight-zero event for the spine).  The sum of the returned
// weights equals W_1 of the family by construction.
std::vector<SpineStep> sample_spine_family(const DisplacementSpec& spec,
                                           const OffspringSpec& offspring,
                                           Rng& rng);

struct SpineMarginalReport {
  double ks = 1.0;                  // weighted-vs-direct sup distance
  double effective_samples = 0.0;   // (sum w)^2 / sum w^2 of spine weights
  std::uint64_t replicas = 0;       // raw replicas per side
  double threshold = 0.01;
  bool pass = false;        // ks < threshold
  bool conclusive = false;  // effective_samples >= 1000
};

// Kolmogorov-Smirnov distance between the weighted empirical law of the
// spine position after n steps and the plain empirical law of an n-step walk
// with sample_x increments.  The two laws agree exactly (per-step tilt
// identity), so the statistic measures pure Monte Carlo noise.  n in [0, 12].
SpineMarginalReport spine_marginal_check(const DisplacementSpec& spec,
                                         const OffspringSpec& offspring, int n,
                                         std::uint64_t replicas,
                                         std::uint64_t root_seed,
                                         unsigned threads = 1);

// Path functional over positions S_0..S_n (S_0 = 0).
using PathFunctional = std::function<double(const std::vector<double>&)>;

struct ManyToOneReport {
  double tree_value = 0.0, tree_stderr = 0.0;
  double walk_value = 0.0, walk_stderr = 0.0;
  double gap_over_se = 0.0;  // |tree - walk| / combined stderr
};

// Checks E[ sum over |u|=n of g(V(u_1)..V(u_n)) ] (full tree enumeration)
// against E[ e^{S_n} g(S_1..S_n) ] (plain walk, exponentially reweighted).
// n in [1, 6]: the tree side is exhaustively enumerated per replica.
ManyToOneReport many_to_one_check(const DisplacementSpec& spec,
                                  const OffspringSpec& offspring, int n,
                                  const PathFunctional& g,
                                  std::uint64_t replicas,
                                  std::uint64_t root_seed,
                                  unsigned threads = 1);

struct CstarTerm {
  int j = 0;
  double estimate = 0.0;
  double stderr_est = 0.0;
};

struct CstarEstimate {
  std::vector<CstarTerm> j_terms;
  int truncation_j = 0;    // last term index actually computed
  bool truncated = false;  // stopping rule never met up to j_max
  double cstar = 0.0;      // m^-(alpha+1) * sum of term estimates
  double stderr_est = 0.0;
  std::uint64_t aborted_replicas = 0;
  std::string to_json() const;
};

// Series estimate of the tail prefactor: term j is the weighted probability
// that the spine is the unique generation-j minimum of its spine system
// (spine path plus full independent subtrees attached to every sibling),
// divided by the minimum's multiplicity.  Term 0 is exactly 1.  Terms are
// estimated in increasing j until term_j < max(tolerance, 2*stderr_j) or
// j_max is hit (then the estimate is flagged truncated).
//
// `base` supplies displacement, offspring, caps, and the test-only point
// displacement; base.horizon_n and base.drop_zeta are ignored (the horizon
// is the term index).  Sibling subtrees run on the engine with base.caps;
// a replica that overflows the cap is dropped and counted, never averaged.
CstarEstimate estimate_cstar_series(const BrwParams& base, int j_max,
                                    std::uint64_t replicas,
                                    std::uint64_t root_seed,
                                    unsigned threads = 1,
                                    double tolerance = 1e-3);

}  // namespace brw
