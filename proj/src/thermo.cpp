#include "brw/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "brw/detail/walker.hpp"
#include "brw/laws.hpp"

namespace brw {

namespace {

// Streaming log-sum-exp accumulator bank: one compensated sum per beta, all
// anchored at the running minimum of the leaf positions.  Terms are
// e^{-beta (V - anchor)} <= 1, so arbitrarily large beta stays finite; when
// the minimum drops, previously accumulated sums shrink by the matching
// factor (a linear rescale, valid for sum and compensation alike).
struct LseBank {
  const std::vector<double>& betas;
  std::vector<detail::CompensatedSum> acc;
  double anchor = 0.0;
  bool any = false;

  explicit LseBank(const std::vector<double>& b) : betas(b), acc(b.size()) {}

  void add_leaf(double v) {
    if (!any) {
      anchor = v;
      any = true;
      for (auto& a : acc) a.add(1.0);
      return;
    }
    if (v < anchor) {
      const double shift = anchor - v;  // > 0
      for (std::size_t i = 0; i < acc.size(); ++i) {
        const double f = std::exp(-betas[i] * shift);
        acc[i].sum *= f;
        acc[i].comp *= f;
        acc[i].add(1.0);  // the new leaf is the new anchor
      }
      anchor = v;
      return;
    }
    for (std::size_t i = 0; i < acc.size(); ++i)
      acc[i].add(std::exp(-betas[i] * (v - anchor)));
  }

  // log sum over leaves of e^{-beta_i V(u)}
  double log_z(std::size_t i) const {
    return -betas[i] * anchor + std::log(acc[i].sum);
  }
};

struct LeafPositions {
  int n = 0;
  std::vector<double>* out = nullptr;
  void node(int, double) {}
  void leaf(const double* path) { out->push_back(path[n]); }
};

}  // namespace

ThermoTrace partition_trace(const BrwParams& params,
                            std::vector<double> beta_grid,
                            std::uint64_t seed) {
  if (beta_grid.empty())
    throw std::invalid_argument("thermo: empty beta grid");
  for (std::size_t i = 0; i < beta_grid.size(); ++i) {
    if (!(beta_grid[i] >= 0.0))
      throw std::invalid_argument("thermo: beta must be >= 0");
    if (i > 0 && !(beta_grid[i] > beta_grid[i - 1]))
      throw std::invalid_argument("thermo: beta grid must increase strictly");
  }

  struct Vis {
    int n;
    LseBank* bank;
    void node(int, double) {}
    void leaf(const double* path) { bank->add_leaf(path[n]); }
  };

  LseBank bank(beta_grid);
  Vis vis{params.horizon_n, &bank};
  detail::walk_tree(params, seed, vis);

  ThermoTrace trace;
  trace.n = params.horizon_n;
  trace.survived = bank.any;
  trace.f_n_values.reserve(beta_grid.size());
  trace.f_limit.reserve(beta_grid.size());
  const double inv_n = 1.0 / double(params.horizon_n);
  for (std::size_t i = 0; i < beta_grid.size(); ++i) {
    trace.f_n_values.push_back(
        bank.any ? inv_n * bank.log_z(i)
                 : std::numeric_limits<double>::quiet_NaN());
    trace.f_limit.push_back(free_energy(params.displacement, beta_grid[i]));
  }
  trace.beta_grid = std::move(beta_grid);
  return trace;
}

GibbsStats gibbs_stats(const BrwParams& params, double beta,
                       std::uint64_t seed) {
  if (!(beta > 0.0)) throw std::invalid_argument("thermo: need beta > 0");

  std::vector<double> v;
  LeafPositions vis{params.horizon_n, &v};
  detail::walk_tree(params, seed, vis);
  if (v.empty())
    throw std::domain_error(
        "thermo: tree extinct before the horizon, no Gibbs measure");

  const double vmin = *std::min_element(v.begin(), v.end());
  detail::CompensatedSum z1, z2;
  for (double u : v) {
    const double w = std::exp(-beta * (u - vmin));
    z1.add(w);
    z2.add(w * w);
  }

  GibbsStats g;
  g.beta = beta;
  g.leaves = v.size();
  g.participation_ratio = z2.sum / (z1.sum * z1.sum);
  g.max_atom = 1.0 / z1.sum;  // the minimal particle carries weight e^0
  g.support_size_eff = 1.0 / g.participation_ratio;
  detail::CompensatedSum mass;
  for (double u : v) mass.add(std::exp(-beta * (u - vmin)) / z1.sum);
  g.mass_sum = mass.sum;
  return g;
}

}  // namespace brw
