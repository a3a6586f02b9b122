#include "brw/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "brw/detail/parallel.hpp"
#include "brw/detail/walker.hpp"
#include "brw/engine.hpp"
#include "brw/rng.hpp"

namespace brw {

namespace {

std::vector<double> sorted_copy(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Least squares of y against x; the callers guarantee >= 2 points and a
// non-degenerate abscissa.
TailFit ols_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t k = xs.size();
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    xbar += xs[i];
    ybar += ys[i];
  }
  xbar /= double(k);
  ybar /= double(k);

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double dx = xs[i] - xbar;
    const double dy = ys[i] - ybar;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0))
    throw std::invalid_argument("stats: degenerate abscissa in tail fit");

  TailFit fit;
  fit.points_used = k;
  fit.x_window = {xs.front(), xs.back()};
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  fit.cstar_tail = std::exp(fit.intercept);
  double sse = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double resid = ys[i] - fit.slope * xs[i] - fit.intercept;
    sse += resid * resid;
  }
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  fit.stderr_slope = k > 2 ? std::sqrt(sse / (double(k - 2) * sxx)) : 0.0;
  return fit;
}

void validate_x_grid(const std::vector<double>& x_grid) {
  if (x_grid.empty()) throw std::invalid_argument("stats: empty x grid");
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    if (!std::isfinite(x_grid[i]))
      throw std::invalid_argument("stats: non-finite x grid");
    if (i > 0 && !(x_grid[i] > x_grid[i - 1]))
      throw std::invalid_argument("stats: x grid must increase strictly");
  }
}

}  // namespace

Ecdf::Ecdf(std::vector<double> samples) : sorted_(std::move(samples)) {
  if (sorted_.empty()) throw std::domain_error("stats: empty sample set");
  std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double x) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return double(it - sorted_.begin()) / double(sorted_.size());
}

double ks_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty())
    throw std::domain_error("stats: empty sample set");
  const auto sa = sorted_copy(a);
  const auto sb = sorted_copy(b);
  const double na = double(sa.size());
  const double nb = double(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double v;
    if (i == sa.size())
      v = sb[j];
    else if (j == sb.size())
      v = sa[i];
    else
      v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == v) ++i;
    while (j < sb.size() && sb[j] == v) ++j;
    d = std::max(d, std::abs(double(i) / na - double(j) / nb));
  }
  return d;
}

double ks_distance(const std::vector<double>& samples,
                   const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::domain_error("stats: empty sample set");
  if (!cdf) throw std::invalid_argument("stats: null reference cdf");
  const auto s = sorted_copy(samples);
  const double n = double(s.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    const double f = cdf(s[i]);
    d = std::max(d, std::abs(f - double(i) / n));
    d = std::max(d, std::abs(f - double(j) / n));
    i = j;
  }
  return d;
}

TailFit tail_fit_probabilities(const std::vector<double>& x_grid,
                               const std::vector<double>& probs) {
  validate_x_grid(x_grid);
  if (probs.size() != x_grid.size())
    throw std::invalid_argument("stats: grid and probability sizes differ");
  if (x_grid.size() < 3)
    throw std::domain_error("stats: tail fit needs at least 3 points");
  std::vector<double> ys(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] > 0.0) || probs[i] > 1.0)
      throw std::invalid_argument("stats: probabilities must lie in (0, 1]");
    ys[i] = std::log(probs[i]);
  }
  return ols_fit(x_grid, ys);
}

TailFit tail_fit(const std::vector<double>& m_samples, double alpha_n_value,
                 const std::vector<double>& x_grid, std::uint64_t min_hits) {
  validate_x_grid(x_grid);
  if (m_samples.empty()) throw std::domain_error("stats: empty sample set");
  const auto sm = sorted_copy(m_samples);
  const double n = double(sm.size());

  std::vector<double> xs, ys;
  for (double x : x_grid) {
    const double threshold = alpha_n_value - x;
    const auto hits = std::uint64_t(
        std::upper_bound(sm.begin(), sm.end(), threshold) - sm.begin());
    if (hits < min_hits) continue;
    xs.push_back(x);
    ys.push_back(std::log(double(hits) / n));
  }
  if (xs.size() < 3)
    throw std::domain_error(
        "stats: tail fit refused, fewer than 3 grid points reached the "
        "hit floor");
  return ols_fit(xs, ys);
}

BootstrapCi bootstrap_cstar_tail(const std::vector<double>& m_samples,
                                 double alpha_n_value,
                                 const std::vector<double>& x_grid,
                                 int resamples, std::uint64_t seed,
                                 std::uint64_t min_hits) {
  if (resamples < 10)
    throw std::invalid_argument("stats: need at least 10 resamples");
  BootstrapCi ci;
  ci.point = tail_fit(m_samples, alpha_n_value, x_grid, min_hits).cstar_tail;

  // Partition the real line by the grid thresholds (ascending) and bootstrap
  // the cell occupation counts; prefix sums rebuild the per-point hits.
  const auto sm = sorted_copy(m_samples);
  const std::size_t n = sm.size();
  const std::size_t k = x_grid.size();
  std::vector<double> cum_asc(k);  // hits at thresholds in ascending order
  for (std::size_t i = 0; i < k; ++i) {
    const double threshold = alpha_n_value - x_grid[k - 1 - i];
    cum_asc[i] = double(std::upper_bound(sm.begin(), sm.end(), threshold) -
                        sm.begin());
  }
  std::vector<double> cell_frac(k + 1);
  for (std::size_t i = 0; i <= k; ++i) {
    const double hi = i < k ? cum_asc[i] : double(n);
    const double lo = i > 0 ? cum_asc[i - 1] : 0.0;
    cell_frac[i] = (hi - lo) / double(n);
  }
  std::vector<double> cell_cum(k + 1);
  double acc = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    acc += cell_frac[i];
    cell_cum[i] = acc;
  }
  cell_cum[k] = 1.0;

  Rng rng(seed);
  std::vector<double> boots;
  boots.reserve(std::size_t(resamples));
  std::vector<std::uint64_t> counts(k + 1);
  std::vector<double> xs, ys;
  for (int r = 0; r < resamples; ++r) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t t = 0; t < n; ++t) {
      const double u = rng.uniform();
      std::size_t c = 0;
      while (c < k && u >= cell_cum[c]) ++c;
      ++counts[c];
    }
    xs.clear();
    ys.clear();
    std::uint64_t prefix = 0;
    for (std::size_t i = 0; i < k; ++i) {
      prefix += counts[i];  // hits at ascending threshold i
      const double x = x_grid[k - 1 - i];
      if (prefix < min_hits) continue;
      xs.push_back(x);
      ys.push_back(std::log(double(prefix) / double(n)));
    }
    if (xs.size() < 3) {
      ++ci.refused;
      continue;
    }
    std::reverse(xs.begin(), xs.end());
    std::reverse(ys.begin(), ys.end());
    boots.push_back(ols_fit(xs, ys).cstar_tail);
  }
  if (boots.size() < 10)
    throw std::domain_error("stats: bootstrap refused, too few usable fits");
  std::sort(boots.begin(), boots.end());
  const double last = double(boots.size() - 1);
  ci.lo = boots[std::size_t(std::floor(0.025 * last))];
  ci.hi = boots[std::size_t(std::ceil(0.975 * last))];
  ci.resamples = int(boots.size());
  return ci;
}

double limit_cdf(double cstar, double x,
                 const std::vector<double>& w_samples) {
  if (!(cstar >= 0.0))
    throw std::invalid_argument("stats: cstar must be >= 0");
  if (w_samples.empty()) throw std::domain_error("stats: empty w pool");
  detail::CompensatedSum s;
  const double scale = cstar * std::exp(x);
  for (double w : w_samples)
    s.add(w == 0.0 || cstar == 0.0 ? 1.0 : std::exp(-scale * w));
  return s.sum / double(w_samples.size());
}

LimitFit fit_cstar_limit(const std::vector<double>& m_minus_alpha_samples,
                         const std::vector<double>& w_samples, double c_lo,
                         double c_hi, int grid_points) {
  if (!(c_lo > 0.0) || !(c_hi > c_lo))
    throw std::invalid_argument("stats: need 0 < c_lo < c_hi");
  if (grid_points < 3)
    throw std::invalid_argument("stats: need at least 3 scan points");
  if (w_samples.empty() || m_minus_alpha_samples.empty())
    throw std::domain_error("stats: empty sample set");

  std::size_t w_zero = 0;
  for (double w : w_samples) {
    if (!(w >= 0.0))
      throw std::invalid_argument("stats: w pool must be nonnegative");
    if (w == 0.0) ++w_zero;
  }
  const double frac0 = double(w_zero) / double(w_samples.size());
  if (w_zero == w_samples.size())
    throw std::domain_error(
        "stats: every w is zero (extinct pool), the limit law is "
        "degenerate and the fit is refused");

  std::vector<double> finite;
  finite.reserve(m_minus_alpha_samples.size());
  for (double d : m_minus_alpha_samples) {
    if (std::isnan(d))
      throw std::invalid_argument("stats: NaN in the minima samples");
    if (std::isfinite(d)) finite.push_back(d);
  }
  if (finite.empty())
    throw std::domain_error("stats: no finite minima, the fit is refused");
  std::sort(finite.begin(), finite.end());
  const double total = double(m_minus_alpha_samples.size());
  const double finite_frac = double(finite.size()) / total;

  // Shift-invariant model table: G_c(x) = h(x + log c) with
  // h(t) = mean over w of exp(-e^t w).  One table serves every c.
  const double step = 0.01;
  const double lc_lo = std::log(c_lo);
  const double lc_hi = std::log(c_hi);
  double t_lo = std::max(lc_lo + finite.front(), -45.0);
  double t_hi = std::min(lc_hi + finite.back(), 45.0);
  if (t_hi < t_lo) std::swap(t_lo, t_hi);
  t_hi = std::max(t_hi, t_lo + step);
  const std::size_t table_size = std::size_t((t_hi - t_lo) / step) + 2;
  std::vector<double> table(table_size);
  for (std::size_t i = 0; i < table_size; ++i) {
    const double et = std::exp(t_lo + double(i) * step);
    detail::CompensatedSum s;
    for (double w : w_samples) s.add(std::exp(-et * w));
    table[i] = s.sum / double(w_samples.size());
  }
  const auto model_g = [&](double t) {
    const double pos = std::clamp((t - t_lo) / step, 0.0,
                                  double(table_size - 1));
    const std::size_t i =
        std::min(std::size_t(pos), table_size - 2);
    const double frac = pos - double(i);
    return table[i] * (1.0 - frac) + table[i + 1] * frac;
  };

  // Sup distance between the empirical CDF (infinite entries massed at the
  // top) and the model CDF 1 - G_c at a given log c.
  const auto ks_at = [&](double lc) {
    double d = 0.0;
    std::size_t i = 0;
    while (i < finite.size()) {
      std::size_t j = i;
      while (j < finite.size() && finite[j] == finite[i]) ++j;
      const double f = 1.0 - model_g(finite[i] + lc);
      d = std::max(d, std::abs(f - double(i) / total));
      d = std::max(d, std::abs(f - double(j) / total));
      i = j;
    }
    return std::max(d, std::abs((1.0 - frac0) - finite_frac));
  };

  double best_lc = lc_lo;
  double best_ks = std::numeric_limits<double>::infinity();
  int best_i = 0;
  for (int i = 0; i < grid_points; ++i) {
    const double lc =
        lc_lo + (lc_hi - lc_lo) * double(i) / double(grid_points - 1);
    const double ks = ks_at(lc);
    if (ks < best_ks) {
      best_ks = ks;
      best_lc = lc;
      best_i = i;
    }
  }

  // Golden-section polish inside the bracketing grid cells.
  {
    const double span = (lc_hi - lc_lo) / double(grid_points - 1);
    double a = std::max(lc_lo, best_lc - span);
    double b = std::min(lc_hi, best_lc + span);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a);
    double x2 = a + gr * (b - a);
    double f1 = ks_at(x1);
    double f2 = ks_at(x2);
    for (int it = 0; it < 60; ++it) {
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - gr * (b - a);
        f1 = ks_at(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + gr * (b - a);
        f2 = ks_at(x2);
      }
    }
    const double mid = 0.5 * (a + b);
    const double fm = ks_at(mid);
    if (fm < best_ks) {
      best_ks = fm;
      best_lc = mid;
    }
  }

  LimitFit fit;
  fit.cstar_fit = std::exp(best_lc);
  fit.ks_at_fit = best_ks;
  fit.w_samples_n0 = w_samples.size();
  fit.w_zero_fraction = frac0;
  fit.c_window = {c_lo, c_hi};
  fit.at_boundary = best_i == 0 || best_i == grid_points - 1;
  return fit;
}

double fixed_point_check(const DisplacementSpec& spec,
                         const OffspringSpec& offspring, int n0,
                         std::uint64_t replicas, std::uint64_t root_seed,
                         unsigned threads,
                         std::optional<double> test_point_displacement) {
  if (n0 < 6)
    throw std::invalid_argument("stats: fixed-point check needs n0 >= 6");
  if (replicas < 2)
    throw std::invalid_argument("stats: fixed-point check needs replicas >= 2");

  BrwParams params;
  params.displacement = spec;
  params.offspring = offspring;
  params.horizon_n = n0;
  params.test_point_displacement = test_point_displacement;

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> w(replicas, nan);
  detail::for_replicas(replicas, threads, [&](std::uint64_t r) {
    try {
      w[r] = simulate_tree(params, derive_seed(root_seed, 50, r)).w_n;
    } catch (const AbortedReplica&) {
      // dropped from the pool below
    }
  });
  std::vector<double> pool;
  pool.reserve(w.size());
  for (double v : w)
    if (!std::isnan(v)) pool.push_back(v);
  if (pool.size() < 2)
    throw std::domain_error("stats: fixed-point pool lost to aborts");

  std::vector<double> assembled(replicas, 0.0);
  detail::for_replicas(replicas, threads, [&](std::uint64_t r) {
    Rng rng(derive_seed(root_seed, 51, r));
    const unsigned nu = sample_offspring(offspring, rng);
    detail::CompensatedSum s;
    for (unsigned k = 0; k < nu; ++k) {
      const double xi = test_point_displacement
                            ? *test_point_displacement
                            : sample_child_displacement(spec, rng);
      const auto idx = std::min(
          std::size_t(rng.uniform() * double(pool.size())), pool.size() - 1);
      s.add(std::exp(-xi) * pool[idx]);
    }
    assembled[r] = s.sum;
  });

  return ks_distance(pool, assembled);
}

}  // namespace brw
