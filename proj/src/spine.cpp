#include "brw/spine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "brw/detail/parallel.hpp"
#include "brw/detail/walker.hpp"

namespace brw {

namespace {

using detail::for_replicas;
using detail::MeanSe;
using detail::reduce_mean_se;

constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr std::uint64_t kTaskSpinePath = 11;
constexpr std::uint64_t kTaskDirectWalk = 12;
constexpr std::uint64_t kTaskTreeSide = 13;
constexpr std::uint64_t kTaskWalkSide = 14;
constexpr std::uint64_t kTaskSeriesBase = 20;

// One family drawn for spine growth: displacements (possibly a test point
// mass) and the left-to-right sum of e^-xi.
struct GrownStep {
  double spine_disp = 0.0;
  double w1 = 0.0;
  bool dead = false;  // childless family
};

// Advances a spine by one family: draws (nu, xi_1..xi_nu), picks the spine
// child with probability e^-xi_i / W_1, and hands every sibling to
// `on_sibling(displacement)`.  Point-mass displacements replace the tilted
// draw when `point` is set (test laws).
template <class SiblingFn>
GrownStep grow_one_step(const DisplacementSpec& spec,
                        const OffspringSpec& offspring,
                        const std::optional<double>& point, Rng& rng,
                        std::vector<double>& xi_buf, SiblingFn&& on_sibling) {
  GrownStep out;
  const unsigned nu = sample_offspring(offspring, rng);
  if (nu == 0) {
    out.dead = true;
    return out;
  }
  xi_buf.clear();
  double w1 = 0.0;
  for (unsigned i = 0; i < nu; ++i) {
    const double x =
        point ? *point : sample_child_displacement(spec, rng);
    xi_buf.push_back(x);
    w1 += std::exp(-x);
  }
  // Select the spine child by a cumulative scan of the weights.
  const double u = rng.uniform() * w1;
  double acc = 0.0;
  unsigned pick = nu - 1;  // FP guard: overshoot lands on the last child
  for (unsigned i = 0; i < nu; ++i) {
    acc += std::exp(-xi_buf[i]);
    if (u < acc) {
      pick = i;
      break;
    }
  }
  for (unsigned i = 0; i < nu; ++i)
    if (i != pick) on_sibling(xi_buf[i]);
  out.spine_disp = xi_buf[pick];
  out.w1 = w1;
  return out;
}

// Sup distance between the weighted ECDF of (va, wa) and the plain ECDF of
// vb.  Both inputs are consumed (sorted in place).
double weighted_ks(std::vector<double>& va, std::vector<double>& wa,
                   std::vector<double>& vb, double total_weight) {
  // Sort the weighted sample by value, carrying weights along.
  std::vector<std::size_t> order(va.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return va[a] < va[b]; });
  std::sort(vb.begin(), vb.end());

  double fa = 0.0, ks = 0.0;
  std::size_t i = 0, j = 0;
  const double nb = double(vb.size());
  while (i < order.size() || j < vb.size()) {
    const double x = [&] {
      if (i >= order.size()) return vb[j];
      if (j >= vb.size()) return va[order[i]];
      return std::min(va[order[i]], vb[j]);
    }();
    while (i < order.size() && va[order[i]] == x) fa += wa[order[i++]];
    while (j < vb.size() && vb[j] == x) ++j;
    const double gap = std::abs(fa / total_weight - double(j) / nb);
    if (gap > ks) ks = gap;
  }
  return ks;
}

}  // namespace

std::vector<SpineStep> sample_spine_family(const DisplacementSpec& spec,
                                           const OffspringSpec& offspring,
                                           Rng& rng) {
  const unsigned nu = sample_offspring(offspring, rng);
  std::vector<double> xi(nu);
  for (unsigned i = 0; i < nu; ++i)
    xi[i] = sample_child_displacement(spec, rng);
  std::vector<SpineStep> steps;
  steps.reserve(nu);
  for (unsigned i = 0; i < nu; ++i) {
    SpineStep st;
    st.spine_disp = xi[i];
    st.weight = std::exp(-xi[i]);
    st.sibling_disps.reserve(nu - 1);
    for (unsigned t = 0; t < nu; ++t)
      if (t != i) st.sibling_disps.push_back(xi[t]);
    steps.push_back(std::move(st));
  }
  return steps;
}

SpineMarginalReport spine_marginal_check(const DisplacementSpec& spec,
                                         const OffspringSpec& offspring, int n,
                                         std::uint64_t replicas,
                                         std::uint64_t root_seed,
                                         unsigned threads) {
  if (n < 0 || n > 12)
    throw std::invalid_argument("spine: marginal check needs 0 <= n <= 12");
  if (replicas < 1)
    throw std::invalid_argument("spine: replicas must be >= 1");

  std::vector<double> sv(replicas), sw(replicas), dv(replicas);
  for_replicas(replicas, threads, [&](std::uint64_t r) {
    Rng rng(derive_seed(root_seed, kTaskSpinePath, r));
    std::vector<double> xi_buf;
    double v = 0.0, w = 1.0;
    for (int k = 0; k < n; ++k) {
      const GrownStep st = grow_one_step(spec, offspring, std::nullopt, rng,
                                         xi_buf, [](double) {});
      if (st.dead) {
        w = 0.0;
        break;
      }
      v += st.spine_disp;
      w *= st.w1;
    }
    sv[r] = v;
    sw[r] = w;
  });
  for_replicas(replicas, threads, [&](std::uint64_t r) {
    Rng rng(derive_seed(root_seed, kTaskDirectWalk, r));
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += sample_x(spec, rng);
    dv[r] = s;
  });

  detail::CompensatedSum w1, w2;
  for (std::uint64_t r = 0; r < replicas; ++r) {
    w1.add(sw[r]);
    w2.add(sw[r] * sw[r]);
  }

  SpineMarginalReport rep;
  rep.replicas = replicas;
  rep.effective_samples = w2.sum > 0.0 ? w1.sum * w1.sum / w2.sum : 0.0;
  if (w1.sum <= 0.0) {
    rep.ks = 1.0;  // every spine died: nothing to compare
  } else {
    rep.ks = weighted_ks(sv, sw, dv, w1.sum);
  }
  rep.pass = rep.ks < rep.threshold;
  rep.conclusive = rep.effective_samples >= 1000.0;
  return rep;
}

ManyToOneReport many_to_one_check(const DisplacementSpec& spec,
                                  const OffspringSpec& offspring, int n,
                                  const PathFunctional& g,
                                  std::uint64_t replicas,
                                  std::uint64_t root_seed, unsigned threads) {
  if (n < 1 || n > 6)
    throw std::invalid_argument(
        "spine: many-to-one check enumerates trees, needs 1 <= n <= 6");
  if (replicas < 1)
    throw std::invalid_argument("spine: replicas must be >= 1");
  if (!g) throw std::invalid_argument("spine: path functional is empty");

  BrwParams params;
  params.displacement = spec;
  params.offspring = offspring;
  params.horizon_n = n;

  struct SumVisitor {
    int n;
    const PathFunctional* g;
    std::vector<double> buf;
    double acc = 0.0;
    void node(int, double) {}
    void leaf(const double* path) {
      buf.assign(path, path + n + 1);
      acc += (*g)(buf);
    }
  };

  std::vector<double> tree_slots(replicas), walk_slots(replicas);
  for_replicas(replicas, threads, [&](std::uint64_t r) {
    SumVisitor vis{n, &g, {}, 0.0};
    detail::walk_tree(params, derive_seed(root_seed, kTaskTreeSide, r), vis);
    tree_slots[r] = vis.acc;
  });
  for_replicas(replicas, threads, [&](std::uint64_t r) {
    Rng rng(derive_seed(root_seed, kTaskWalkSide, r));
    std::vector<double> path(std::size_t(n) + 1, 0.0);
    for (int k = 1; k <= n; ++k) path[k] = path[k - 1] + sample_x(spec, rng);
    walk_slots[r] = std::exp(path[n]) * g(path);
  });

  const MeanSe t = reduce_mean_se(tree_slots);
  const MeanSe w = reduce_mean_se(walk_slots);
  ManyToOneReport rep;
  rep.tree_value = t.mean;
  rep.tree_stderr = t.se;
  rep.walk_value = w.mean;
  rep.walk_stderr = w.se;
  const double comb = std::sqrt(t.se * t.se + w.se * w.se);
  const double gap = std::abs(t.mean - w.mean);
  rep.gap_over_se = gap == 0.0 ? 0.0 : (comb > 0.0 ? gap / comb : kInf);
  return rep;
}

CstarEstimate estimate_cstar_series(const BrwParams& base, int j_max,
                                    std::uint64_t replicas,
                                    std::uint64_t root_seed, unsigned threads,
                                    double tolerance) {
  if (j_max < 1)
    throw std::invalid_argument("spine: j_max must be >= 1");
  if (replicas < 2)
    throw std::invalid_argument("spine: series needs replicas >= 2");

  CstarEstimate est;
  est.j_terms.push_back({0, 1.0, 0.0});  // the spine root is its own minimum
  est.truncation_j = 0;
  std::atomic<std::uint64_t> aborted{0};

  for (int j = 1; j <= j_max; ++j) {
    std::vector<double> slots(replicas,
                              std::numeric_limits<double>::quiet_NaN());
    for_replicas(replicas, threads, [&](std::uint64_t r) {
      Rng rng(derive_seed(root_seed, kTaskSeriesBase + std::uint64_t(j), r));
      std::vector<double> xi_buf;
      double v = 0.0, weight = 1.0;
      double best_sib = kInf;
      std::uint64_t eta_sib = 0;
      try {
        for (int k = 1; k <= j; ++k) {
          const int sub_depth = j - k;
          const GrownStep st = grow_one_step(
              base.displacement, base.offspring, base.test_point_displacement,
              rng, xi_buf, [&](double sib_disp) {
                const double sib_root = v + sib_disp;
                double cand_min;
                std::uint64_t cand_eta;
                if (sub_depth == 0) {
                  cand_min = sib_root;
                  cand_eta = 1;
                } else {
                  BrwParams sub = base;
                  sub.horizon_n = sub_depth;
                  sub.drop_zeta = kInf;  // no decomposition needed
                  const MinimumReport rep = simulate_tree(sub, rng.raw());
                  if (!rep.survived) return;
                  cand_min = sib_root + rep.m_n;
                  cand_eta = rep.eta_n;
                }
                if (cand_min < best_sib) {
                  best_sib = cand_min;
                  eta_sib = cand_eta;
                } else if (cand_min == best_sib) {
                  eta_sib += cand_eta;
                }
              });
          if (st.dead) {
            weight = 0.0;
            break;
          }
          v += st.spine_disp;
          weight *= st.w1;
        }
      } catch (const AbortedReplica&) {
        aborted.fetch_add(1);
        return;  // slot stays NaN and is excluded from the term estimate
      }
      double value = 0.0;
      if (weight > 0.0) {
        if (v < best_sib) {
          value = weight;  // unique minimum on the spine
        } else if (v == best_sib) {
          value = weight / double(1 + eta_sib);  // exact floating-point tie
        }
      }
      slots[r] = value;
    });

    const MeanSe ms = reduce_mean_se(slots, /*skip_nan=*/true);
    est.j_terms.push_back({j, ms.mean, ms.se});
    est.truncation_j = j;
    if (ms.mean < std::max(tolerance, 2.0 * ms.se)) break;
    if (j == j_max) est.truncated = true;
  }

  const double prefactor =
      std::pow(base.displacement.m, -(base.displacement.alpha + 1.0));
  detail::CompensatedSum total, var;
  for (const CstarTerm& t : est.j_terms) {
    total.add(t.estimate);
    var.add(t.stderr_est * t.stderr_est);
  }
  est.cstar = prefactor * total.sum;
  est.stderr_est = prefactor * std::sqrt(var.sum);
  est.aborted_replicas = aborted.load();
  return est;
}

std::string CstarEstimate::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\n  \"terms\": [";
  for (std::size_t i = 0; i < j_terms.size(); ++i) {
    if (i) os << ", ";
    os << "{\"j\": " << j_terms[i].j << ", \"estimate\": " << j_terms[i].estimate
       << ", \"stderr\": " << j_terms[i].stderr_est << "}";
  }
  os << "],\n  \"truncation_j\": " << truncation_j
     << ",\n  \"truncated\": " << (truncated ? "true" : "false")
     << ",\n  \"cstar\": " << cstar << ",\n  \"stderr\": " << stderr_est
     << ",\n  \"aborted_replicas\": " << aborted_replicas << "\n}";
  return os.str();
}

}  // namespace brw
