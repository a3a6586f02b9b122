#include "brw/rwalk.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "brw/detail/parallel.hpp"
#include "brw/rng.hpp"

namespace brw {

namespace {

using detail::for_replicas;

constexpr std::uint64_t kTaskRenewal = 31;
constexpr std::uint64_t kTaskLocalProb = 32;
constexpr std::uint64_t kTaskProfile = 33;

double draw_increment(const DisplacementSpec& spec,
                      const std::optional<double>& point, Rng& rng) {
  return point ? *point : sample_x(spec, rng);
}

// Median of an unsorted sample (sorted in place): middle element, or the
// average of the two middle elements for even sizes.  Empty -> 0.
double median_of(std::vector<double>& v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  if (v.size() % 2 == 1) return v[mid];
  return 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

WalkPath simulate_walk(const DisplacementSpec& spec, std::int64_t n,
                       std::uint64_t seed,
                       std::optional<double> test_point_increment) {
  if (n < 0) throw std::invalid_argument("rwalk: need n >= 0");
  WalkPath path;
  path.start = 0.0;
  path.increments.reserve(std::size_t(n));
  path.positions.reserve(std::size_t(n) + 1);
  path.positions.push_back(0.0);
  Rng rng(seed);
  double s = 0.0;
  for (std::int64_t k = 0; k < n; ++k) {
    const double x = draw_increment(spec, test_point_increment, rng);
    path.increments.push_back(x);
    s += x;
    path.positions.push_back(s);
  }
  return path;
}

DropTimes drop_times(const std::vector<double>& increments, double zeta) {
  DropTimes out;
  for (std::size_t j = 0; j < increments.size(); ++j) {
    if (increments[j] < -zeta) {
      if (!out.tau) {
        out.tau = std::int64_t(j) + 1;
      } else {
        out.tau2 = std::int64_t(j) + 1;
        break;
      }
    }
  }
  return out;
}

DropTimes drop_times(const WalkPath& path, double zeta) {
  return drop_times(path.increments, zeta);
}

const char* to_string(RenewalReading reading) {
  switch (reading) {
    case RenewalReading::ReciprocalDrift:
      return "reciprocal-drift (1/m)";
    case RenewalReading::Drift:
      return "drift (m)";
  }
  return "?";
}

RenewalEstimate renewal_R(const DisplacementSpec& spec,
                          std::vector<double> x_grid, std::uint64_t replicas,
                          std::uint64_t root_seed, unsigned threads,
                          std::optional<double> test_point_increment,
                          std::uint64_t safety_horizon) {
  if (x_grid.empty()) throw std::invalid_argument("rwalk: empty x grid");
  for (std::size_t g = 0; g < x_grid.size(); ++g) {
    if (!(x_grid[g] > 0.0))
      throw std::invalid_argument("rwalk: x grid must be positive");
    if (g > 0 && !(x_grid[g] > x_grid[g - 1]))
      throw std::invalid_argument("rwalk: x grid must be strictly increasing");
  }
  if (replicas < 2) throw std::invalid_argument("rwalk: need replicas >= 2");
  if (safety_horizon < 1)
    throw std::invalid_argument("rwalk: need safety_horizon >= 1");

  const std::size_t grid_size = x_grid.size();
  const double x_max = x_grid.back();
  // counts[g] holds, per replica, the number of indices n >= 0 whose running
  // maximum is at or below x_grid[g]; the maximum is nondecreasing, so this
  // equals the first n where it exceeds x_grid[g].
  std::vector<std::vector<double>> counts(grid_size,
                                          std::vector<double>(replicas, 0.0));
  std::atomic<std::uint64_t> aborted{0};

  for_replicas(replicas, threads, [&](std::uint64_t r) {
    Rng rng(derive_seed(root_seed, kTaskRenewal, r));
    double s = 0.0, running_max = 0.0;
    std::size_t g = 0;  // first grid point not yet exceeded
    std::uint64_t n = 0;
    while (running_max <= x_max) {
      if (n >= safety_horizon) {
        aborted.fetch_add(1);
        break;
      }
      s += draw_increment(spec, test_point_increment, rng);
      ++n;
      if (s > running_max) {
        running_max = s;
        while (g < grid_size && running_max > x_grid[g]) {
          counts[g][r] = double(n);
          ++g;
        }
      }
    }
    // Censored replicas record the horizon for the remaining grid points.
    for (; g < grid_size; ++g) counts[g][r] = double(safety_horizon);
  });

  RenewalEstimate est;
  est.x_grid = std::move(x_grid);
  est.r_values.reserve(grid_size);
  est.ratios.reserve(grid_size);
  est.stderrs.reserve(grid_size);
  for (std::size_t g = 0; g < grid_size; ++g) {
    const detail::MeanSe ms = detail::reduce_mean_se(counts[g]);
    est.r_values.push_back(ms.mean);
    est.ratios.push_back(ms.mean / est.x_grid[g]);
    est.stderrs.push_back(ms.se);
  }
  est.plateau = est.ratios.back();
  if (grid_size >= 2) {
    const double a = est.ratios[grid_size - 2], b = est.ratios[grid_size - 1];
    est.plateau_converged = std::abs(a - b) <= 0.1 * std::abs(b);
  }
  const double m_eff = test_point_increment ? *test_point_increment : spec.m;
  est.reading = std::abs(est.plateau - 1.0 / m_eff) <=
                        std::abs(est.plateau - m_eff)
                    ? RenewalReading::ReciprocalDrift
                    : RenewalReading::Drift;
  est.aborted_replicas = aborted.load();
  return est;
}

LocalProbEstimate local_prob(const DisplacementSpec& spec, std::int64_t n,
                             double y, double h, std::uint64_t replicas,
                             std::uint64_t root_seed, unsigned threads) {
  if (n < 0) throw std::invalid_argument("rwalk: need n >= 0");
  if (!(h > 0.0)) throw std::invalid_argument("rwalk: need h > 0");
  if (replicas < 1) throw std::invalid_argument("rwalk: need replicas >= 1");

  std::vector<double> slots(replicas, 0.0);
  for_replicas(replicas, threads, [&](std::uint64_t r) {
    Rng rng(derive_seed(root_seed, kTaskLocalProb, r));
    double s = 0.0;
    for (std::int64_t k = 0; k < n; ++k) s += sample_x(spec, rng);
    const double d = s - y;
    slots[r] = (d >= 0.0 && d <= h) ? 1.0 : 0.0;
  });

  detail::CompensatedSum ones;
  for (double v : slots) ones.add(v);
  LocalProbEstimate est;
  est.replicas = replicas;
  est.hits = std::uint64_t(ones.sum);  // exact: a sum of zeros and ones
  est.estimate = ones.sum / double(replicas);
  est.stderr_est =
      std::sqrt(est.estimate * (1.0 - est.estimate) / double(replicas));
  est.reliable = est.hits >= 100;
  return est;
}

std::vector<ScaledLocalPoint> scaled_local_profile(
    const DisplacementSpec& spec, const std::vector<std::int64_t>& n_grid,
    double y, double h, std::uint64_t replicas, std::uint64_t root_seed,
    unsigned threads) {
  if (n_grid.empty()) throw std::invalid_argument("rwalk: empty n grid");
  std::vector<ScaledLocalPoint> out;
  out.reserve(n_grid.size());
  for (std::int64_t n : n_grid) {
    ScaledLocalPoint pt;
    pt.n = n;
    // Independent streams per grid point: sub-root derived from n.
    const std::uint64_t sub_root =
        derive_seed(root_seed, kTaskLocalProb, std::uint64_t(n));
    pt.prob = local_prob(spec, n, y, h, replicas, sub_root, threads);
    pt.scaled = pt.prob.estimate * std::pow(double(n), spec.alpha) /
                spec.slowvar.c;
    out.push_back(pt);
  }
  return out;
}

BigJumpProfile big_jump_profile(const DisplacementSpec& spec, std::int64_t n,
                                double x, std::uint64_t replicas,
                                std::uint64_t root_seed, unsigned threads,
                                double floor_l, std::optional<double> drop_zeta) {
  if (n < 2) throw std::invalid_argument("rwalk: profile needs n >= 2");
  if (!(floor_l > 0.0))
    throw std::invalid_argument("rwalk: need floor_l > 0");
  if (replicas < 1) throw std::invalid_argument("rwalk: need replicas >= 1");
  if (drop_zeta && !(*drop_zeta > 0.0))
    throw std::invalid_argument("rwalk: drop_zeta override must be positive");

  BigJumpProfile prof;
  prof.replicas = replicas;
  prof.threshold = alpha_n(spec, n) - x;
  prof.zeta = drop_zeta ? *drop_zeta : zeta_n(n);
  prof.floor_l = floor_l;

  std::vector<std::optional<BigJumpHit>> slots(replicas);
  for_replicas(replicas, threads, [&](std::uint64_t r) {
    Rng rng(derive_seed(root_seed, kTaskProfile, r));
    std::vector<double> pos(std::size_t(n) + 1, 0.0);
    std::int64_t tau = 0, tau2 = 0;  // 0 = not seen
    double jump = 0.0;
    double s = 0.0;
    for (std::int64_t k = 1; k <= n; ++k) {
      const double inc = sample_x(spec, rng);
      s += inc;
      pos[std::size_t(k)] = s;
      if (inc < -prof.zeta) {
        if (tau == 0) {
          tau = k;
          jump = inc;
        } else if (tau2 == 0) {
          tau2 = k;
        }
      }
    }
    if (tau == 0 || s > prof.threshold) return;
    double floor_min = pos[std::size_t(tau)];
    for (std::int64_t j = tau + 1; j <= n; ++j)
      floor_min = std::min(floor_min, pos[std::size_t(j)]);
    if (floor_min < prof.threshold - floor_l) return;
    BigJumpHit hit;
    hit.replica = r;
    hit.tau = tau;
    if (tau2 != 0) hit.tau2 = tau2;
    hit.jump_over_n = jump / double(n);
    slots[r] = hit;
  });

  std::vector<double> lags, jumps;
  std::uint64_t second = 0;
  for (const auto& slot : slots) {
    if (!slot) continue;
    prof.sample.push_back(*slot);
    lags.push_back(double(n - slot->tau));
    jumps.push_back(slot->jump_over_n);
    if (slot->tau2) ++second;
  }
  prof.hits = prof.sample.size();
  prof.conclusive = prof.hits >= 100;
  if (prof.hits > 0) {
    prof.fraction_second_drop = double(second) / double(prof.hits);
    prof.fraction_single_drop = 1.0 - prof.fraction_second_drop;
    prof.median_tau_lag = median_of(lags);
    prof.median_jump_over_n = median_of(jumps);
  }
  return prof;
}

}  // namespace brw
