#pragma once
// Empirical-distribution machinery for the experiment suites: ECDF handles,
// one- and two-sample Kolmogorov-Smirnov distances, log-linear tail fits
// with bootstrap intervals, the mixed-exponential limit law
//
//   G_c(x) = mean over w of exp(-c e^x w),
//
// its KS-minimizing fit over c, and the distributional fixed-point check
// for the additive martingale.  Everything here is a pure function of its
// inputs (plus an explicit seed where resampling is involved).

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "brw/laws.hpp"

namespace brw {

// Step-function handle over a sorted copy of the samples.
class Ecdf {
 public:
  // Throws std::domain_error on empty input.
  explicit Ecdf(std::vector<double> samples);

  // Fraction of samples <= x (right-continuous step function).
  double operator()(double x) const;

  const std::vector<double>& sorted() const { return sorted_; }
  std::size_t size() const { return sorted_.size(); }

 private:
  std::vector<double> sorted_;
};

// Two-sample sup distance between empirical CDFs; symmetric, in [0, 1].
// Throws std::domain_error if either sample set is empty.
double ks_distance(const std::vector<double>& a, const std::vector<double>& b);

// One-sample sup distance against a reference CDF evaluated at the sample
// points (both one-sided limits of the empirical staircase are compared).
double ks_distance(const std::vector<double>& samples,
                   const std::function<double(double)>& cdf);

// Ordinary least squares of log p against x over a probability grid.
struct TailFit {
  std::array<double, 2> x_window{0.0, 0.0};  // first and last fitted x
  double slope = 0.0;
  double intercept = 0.0;
  double cstar_tail = 0.0;  // e^{intercept}
  double r2 = 0.0;
  double stderr_slope = 0.0;
  std::size_t points_used = 0;
};

// Fit over exact or externally estimated probabilities (every point used).
// Needs >= 3 points, matching sizes, probs in (0, 1].  On exact log-linear
// input the slope and intercept are recovered to machine precision.
TailFit tail_fit_probabilities(const std::vector<double>& x_grid,
                               const std::vector<double>& probs);

// Empirical left-tail fit: for each grid x the probability that a sample
// is <= alpha_n_value - x.  Grid points collecting fewer than min_hits
// samples are dropped; fewer than 3 surviving points refuses the fit with
// std::domain_error.  The grid must be strictly increasing; the validity
// window (default lower edge 1.5, upper edge n/log n) is the caller's
// responsibility, as this function never sees the horizon.
TailFit tail_fit(const std::vector<double>& m_samples, double alpha_n_value,
                 const std::vector<double>& x_grid,
                 std::uint64_t min_hits = 30);

// Percentile bootstrap for cstar_tail: resamples the per-cell occupation
// counts of the grid partition (equivalent in law to resampling the sample
// vector) and refits.  Resamples that lose too many grid points to the
// min_hits rule are counted in `refused` and skipped.
struct BootstrapCi {
  double lo = 0.0;
  double hi = 0.0;
  double point = 0.0;  // fit on the original sample
  int resamples = 0;   // resamples that produced a fit
  int refused = 0;
};
BootstrapCi bootstrap_cstar_tail(const std::vector<double>& m_samples,
                                 double alpha_n_value,
                                 const std::vector<double>& x_grid,
                                 int resamples, std::uint64_t seed,
                                 std::uint64_t min_hits = 30);

// Mixed-exponential limit function G_c(x) = mean over w of exp(-c e^x w),
// the limiting form of the right tail P(minimum >= centering + x).  Zero
// w entries (extinct trees) contribute 1 regardless of c and x, so the
// extinction mass is handled naturally.  cstar >= 0; nonempty samples.
double limit_cdf(double cstar, double x,
                 const std::vector<double>& w_samples);

// KS-minimizing c over a log-spaced grid plus golden-section refinement.
struct LimitFit {
  double cstar_fit = 0.0;
  double ks_at_fit = 1.0;
  std::size_t w_samples_n0 = 0;    // size of the w pool behind the model
  double w_zero_fraction = 0.0;
  std::array<double, 2> c_window{0.0, 0.0};  // scanned c range
  bool at_boundary = false;  // minimizer stuck at a scan edge
};

// Fits c by minimizing the sup distance between the empirical law of
// m_minus_alpha_samples and the model with CDF 1 - G_c(x).  The empirical
// side may contain +infinity entries (extinct trees); they count in the
// denominator and are matched against the model's extinction mass (the
// fraction of zero w).  Samples with every w zero, or with no finite
// minima, are refused with std::domain_error.  The model is evaluated
// through a shift-invariant table of t -> mean exp(-e^t w) (step 0.01,
// linear interpolation, error < 1e-5), which the scan over c reuses.
LimitFit fit_cstar_limit(const std::vector<double>& m_minus_alpha_samples,
                         const std::vector<double>& w_samples,
                         double c_lo = 1e-4, double c_hi = 1e6,
                         int grid_points = 241);

// Distributional fixed-point check for the additive martingale: compares
// the empirical law of W_{n0} over `replicas` trees against the law of
// sum over a fresh first generation of e^{-displacement} times an
// independently resampled W_{n0}.  Extinct trees contribute zero on both
// sides.  Returns the two-sample KS distance; small values certify the
// distributional invariance (the two pools are one generation apart, so
// the distance also bounds the W_{n0} vs W_{n0+1} discrepancy).
// Replica r of the tree pool uses derive_seed(root_seed, 50, r); the
// assembled side uses derive_seed(root_seed, 51, r).  Thread count never
// changes the result.  test_point_displacement freezes every displacement
// at a constant, mirroring the engine's degenerate test mode.
// n0 >= 6 and replicas >= 2 are required.
double fixed_point_check(const DisplacementSpec& spec,
                         const OffspringSpec& offspring, int n0,
                         std::uint64_t replicas, std::uint64_t root_seed = 0,
                         unsigned threads = 1,
                         std::optional<double> test_point_displacement = {});

}  // namespace brw
