#include "brw/engine.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "brw/detail/walker.hpp"

namespace brw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate(const BrwParams& p) {
  if (p.horizon_n < 1)
    throw std::invalid_argument("engine: horizon_n must be >= 1");
  if (p.caps.max_particles < 1)
    throw std::invalid_argument("engine: max_particles must be >= 1");
}

double default_drop_zeta(const BrwParams& p) {
  if (p.drop_zeta > 0.0) return p.drop_zeta;
  return p.horizon_n >= 2 ? zeta_n(p.horizon_n) : kInf;
}

DropDecomposition scan_drops(const std::vector<double>& path, double zeta) {
  DropDecomposition dd;
  dd.zeta = zeta;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const double inc = path[i] - path[i - 1];
    if (inc < -zeta) {
      if (!dd.tau) {
        dd.tau = static_cast<int>(i);
        dd.drop_size = inc;
      } else if (!dd.tau2) {
        dd.tau2 = static_cast<int>(i);
        break;
      }
    }
  }
  return dd;
}

// Leaf-level visitor: minimum, tie count, minimizing ray, martingale sum.
struct MinVisitor {
  explicit MinVisitor(int n_) : n(n_) {}
  int n;
  detail::CompensatedSum w;
  double best = kInf;
  std::uint64_t eta = 0;
  std::vector<double> min_path;
  std::vector<double> tie_path;

  void node(int, double) {}
  void leaf(const double* path) {
    const double v = path[n];
    w.add(std::exp(-v));
    if (v < best) {
      best = v;
      eta = 1;
      min_path.assign(path, path + n + 1);
    } else if (v == best) {
      ++eta;
      tie_path.assign(path, path + n + 1);
    }
  }
};

}  // namespace

MinimumReport simulate_tree(const BrwParams& params, std::uint64_t seed) {
  validate(params);
  MinVisitor vis(params.horizon_n);
  MinimumReport rep;
  rep.particles_visited = detail::walk_tree(params, seed, vis);
  const double zeta = default_drop_zeta(params);
  if (vis.eta > 0) {
    rep.survived = true;
    rep.m_n = vis.best;
    rep.w_n = vis.w.sum;
    rep.eta_n = vis.eta;
    rep.min_path = std::move(vis.min_path);
    rep.tie_path = std::move(vis.tie_path);
    rep.drops = scan_drops(rep.min_path, zeta);
  } else {
    rep.drops.zeta = zeta;
  }
  return rep;
}

std::vector<double> martingale_trace(const BrwParams& params,
                                     std::uint64_t seed) {
  validate(params);
  struct TraceVisitor {
    std::vector<detail::CompensatedSum> acc;
    void node(int depth, double pos) {
      if (depth > 0) acc[depth].add(std::exp(-pos));
    }
    void leaf(const double*) {}
  } vis;
  vis.acc.resize(params.horizon_n + 1);
  detail::walk_tree(params, seed, vis);
  std::vector<double> out(params.horizon_n);
  for (int k = 1; k <= params.horizon_n; ++k) out[k - 1] = vis.acc[k].sum;
  return out;
}

DropDecomposition minimizing_path_diagnostics(const MinimumReport& report,
                                              double zeta) {
  if (!report.survived)
    throw std::domain_error("drop diagnostics: replica did not survive");
  return scan_drops(report.min_path, zeta);
}

ReplicaSet simulate_many(const BrwParams& params, std::uint64_t root_seed,
                         std::uint64_t replicas, unsigned threads,
                         std::uint64_t task) {
  validate(params);
  if (replicas < 1)
    throw std::invalid_argument("engine: replicas must be >= 1");
  ReplicaSet out;
  out.results.resize(replicas);
  out.abort_visits.assign(replicas, 0);

  std::atomic<std::uint64_t> next{0};
  std::atomic<std::uint64_t> aborted{0};
  auto worker = [&]() {
    for (;;) {
      const std::uint64_t r = next.fetch_add(1, std::memory_order_relaxed);
      if (r >= replicas) return;
      try {
        out.results[r] =
            simulate_tree(params, derive_seed(root_seed, task, r));
      } catch (const AbortedReplica& a) {
        out.abort_visits[r] = a.particles_visited;
        aborted.fetch_add(1, std::memory_order_relaxed);
      }
    }
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  out.aborted = aborted.load();
  return out;
}

std::vector<std::vector<double>> materialize_generations(
    const BrwParams& params, std::uint64_t seed) {
  validate(params);
  if (params.horizon_n > 14)
    throw std::invalid_argument(
        "materialize_generations: debug mode is capped at horizon 14");
  struct GenVisitor {
    std::vector<std::vector<double>> gens;
    void node(int depth, double pos) { gens[depth].push_back(pos); }
    void leaf(const double*) {}
  } vis;
  vis.gens.resize(params.horizon_n + 1);
  detail::walk_tree(params, seed, vis);
  return vis.gens;
}

}  // namespace brw
