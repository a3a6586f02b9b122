#pragma once
// Streaming depth-first enumeration of one branching-random-walk tree.
//
// The walker materializes only the current root-to-node path plus one child
// family per depth, so memory is O(horizon * family size) while the tree
// itself has ~s^n nodes.  Draw order is fixed: a node's family (child count,
// then each child displacement, in child order) is drawn when the node is
// entered, and children are explored left to right.  That makes the whole
// traversal a pure function of (params, seed), which every higher-level
// routine relies on for reproducibility.

#include <cmath>
#include <cstdint>
#include <vector>

#include "brw/engine.hpp"
#include "brw/laws.hpp"
#include "brw/rng.hpp"

namespace brw::detail {

// Compensated (Kahan) accumulator for long sums of small positive terms.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double y = x - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

// Visitor contract:
//   vis.node(depth, position)  -- every node at entry, root included (depth 0)
//   vis.leaf(path)             -- horizon-depth nodes; path = positions[0..n]
// Returns the number of nodes visited; throws AbortedReplica when the cap is
// exceeded (carrying the count at the moment of the overflow).
template <class Visitor>
std::uint64_t walk_tree(const BrwParams& p, std::uint64_t seed, Visitor&& vis) {
  const int n = p.horizon_n;
  const DisplacementSpec& law = p.displacement;
  const std::uint64_t cap = p.caps.max_particles;
  Rng rng(seed);

  std::uint64_t visited = 1;  // the root
  std::vector<double> pos(static_cast<std::size_t>(n) + 1, 0.0);
  vis.node(0, 0.0);

  std::vector<std::vector<double>> fam(n);
  std::vector<std::size_t> idx(n, 0);
  const bool point_mode = p.test_point_displacement.has_value();
  const double point = point_mode ? *p.test_point_displacement : 0.0;

  auto fill_family = [&](int depth) {
    auto& f = fam[depth];
    f.clear();
    const unsigned nu = sample_offspring(p.offspring, rng);
    if (point_mode) {
      f.assign(nu, point);
    } else {
      f.reserve(nu);
      for (unsigned i = 0; i < nu; ++i)
        f.push_back(sample_child_displacement(law, rng));
    }
    idx[depth] = 0;
  };

  fill_family(0);
  int depth = 0;  // depth of the parent whose family is being consumed
  for (;;) {
    if (idx[depth] == fam[depth].size()) {
      if (depth == 0) break;
      --depth;
      continue;
    }
    const double child_pos = pos[depth] + fam[depth][idx[depth]++];
    pos[depth + 1] = child_pos;
    if (++visited > cap) throw AbortedReplica(visited);
    vis.node(depth + 1, child_pos);
    if (depth + 1 == n) {
      vis.leaf(pos.data());
    } else {
      fill_family(depth + 1);
      ++depth;
    }
  }
  return visited;
}

}  // namespace brw::detail
