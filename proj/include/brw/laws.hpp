#pragma once
// Displacement and offspring laws.
//
// The displacement law X is a two-part mixture chosen for a heavy left tail
// and a light (bounded) right part:
//
//   * with probability p_left, X lies below a threshold x0 < 0 with density
//     proportional to |y|^(-alpha-1)  (a reflected Pareto tail of index
//     alpha > 1, slowly varying factor constant);
//   * otherwise X is Uniform[0, b].
//
// The induced branching process attaches to each particle a random number of
// children (offspring law, mean s = E[e^X]) displaced by i.i.d. draws from
// the exponentially tilted law with density e^y * density_x(y) / s.  This
// normalization makes phi(1) = 0 with left derivative -m < 0 (m = E[X] > 0),
// i.e. a first-order phase transition for the associated free energy.

#include <cstdint>
#include <vector>

#include "brw/rng.hpp"

namespace brw {

// Constant slowly-varying factor multiplying the power-law left tail.
struct SlowVarSpec {
  double c = 0.0;  // density of X at y <= x0 is c * |y|^(-alpha-1)
};

// Parametric displacement law; construct via make_displacement_spec so the
// derived fields are filled in and the parameter constraints are enforced.
struct DisplacementSpec {
  // Declared parameters.
  double alpha = 0.0;          // left-tail index, > 1
  double gamma_witness = 0.0;  // declared right-moment witness, > 3 (doc only;
                               // automatically satisfied by the bounded right part)
  double x0 = 0.0;             // left threshold, < 0
  double p_left = 0.0;         // mixture weight of the left component, in (0,1)
  double b = 0.0;              // right part is Uniform[0, b], b > 0

  // Derived at construction.
  SlowVarSpec slowvar;          // c = p_left * alpha * |x0|^alpha
  double m = 0.0;               // E[X], must be > 0
  double s = 0.0;               // E[e^X], must be > 1
  double tilt_left_mass = 0.0;  // probability that a tilted child draw lands
                                // in the left component
  double expm1_b = 0.0;         // cached expm1(b) for the tilted right-part
                                // inversion (hot path)
};

// Validates parameters, fills derived fields.  Throws std::invalid_argument
// on violation (alpha <= 1, x0 >= 0, p_left outside (0,1), b <= 0,
// gamma_witness <= 3, or derived m <= 0).
DisplacementSpec make_displacement_spec(double alpha, double gamma_witness,
                                        double x0, double p_left, double b);

// The default family used throughout: alpha=2.5, x0=-1, p_left=0.3, b=2.
// Derived values: m = 0.2, s ~ 2.3086.
DisplacementSpec default_displacement_spec();

// Offspring law: Poisson with mean s (the production mode, so that the
// expected number of children times E[e^-V] equals one), or a deterministic
// child count (test-only mode).
struct OffspringSpec {
  enum class Kind { PoissonMean, Deterministic };
  Kind kind = Kind::PoissonMean;
  double mean = 0.0;          // PoissonMean: equals spec.s
  double exp_neg_mean = 0.0;  // cached exp(-mean) for the sampler
  int k = 0;                  // Deterministic: k >= 1
};

OffspringSpec poisson_offspring(const DisplacementSpec& spec);
OffspringSpec deterministic_offspring(int k);

inline unsigned sample_offspring(const OffspringSpec& o, Rng& rng) {
  if (o.kind == OffspringSpec::Kind::Deterministic)
    return static_cast<unsigned>(o.k);
  return rng.poisson(o.exp_neg_mean);
}

// Classification of the free-energy phase transition at the critical inverse
// temperature beta_c (the minimizer of phi(beta)/beta).
enum class TransitionOrder { FirstOrder, SecondOrder, NoInteriorMinimizer };

struct PhaseReport {
  double beta_c = 0.0;
  double phi_at_beta_c = 0.0;
  double left_derivative = 0.0;  // phi'(beta_c-), finite-difference estimate
  TransitionOrder order = TransitionOrder::FirstOrder;
};

const char* to_string(TransitionOrder order);

// Density of X.  Zero on the support gap (x0, 0) and beyond the ends.
double density_x(const DisplacementSpec& spec, double y);

// Closed-form mean: p_left*x0*alpha/(alpha-1) + (1-p_left)*b/2.
double mean_x(const DisplacementSpec& spec);

// Closed-form distribution function of X (handy for goodness-of-fit tests).
double cdf_x(const DisplacementSpec& spec, double y);

// Distribution function of the tilted child displacement, i.e. of the density
// e^y * density_x(y) / s; evaluated by adaptive quadrature.
double tilted_cdf_x(const DisplacementSpec& spec, double y);

// log E[e^(theta X)] for theta >= 0, by adaptive quadrature with absolute
// tolerance 1e-10, integrating the left tail and the right block separately
// (the integrand is piecewise smooth with a split at x0 and at 0).
// Exactly zero at theta = 0.  Throws std::domain_error for theta < 0
// (the integral diverges against the heavy left tail).
double log_mgf(const DisplacementSpec& spec, double theta);

// phi(beta) = log E[sum over children of e^(-beta V)] = log_mgf(1 - beta)
// for beta <= 1, and +infinity for beta > 1 (heavy left tail).
double phi(const DisplacementSpec& spec, double beta);

// Free energy: F(beta) = phi(beta) on [0,1], and 0 for beta > 1 (the linear
// continuation beta * phi(1)/1 with phi(1) = 0).  Throws std::domain_error
// for beta < 0.
double free_energy(const DisplacementSpec& spec, double beta);

// Locates beta_c as the minimizer of phi(beta)/beta on (0, beta_max] and
// compares phi(beta_c)/beta_c against the left derivative phi'(beta_c-):
// a strict gap means a first-order transition (linear free energy beyond
// beta_c with a kink), equality within tolerance means second order.
// If phi is finite up to beta_max and the ratio is still decreasing at the
// edge, there is no interior minimizer and the report says so.
PhaseReport classify_transition(const DisplacementSpec& spec);

// Built-in boundary-case preset: two deterministic children with Gaussian
// displacement N(2 log 2, 2 log 2), normalized so phi(1) = 0 and phi'(1) = 0.
// Classifies SecondOrder.
PhaseReport classify_transition_gaussian_boundary();

// Degenerate test law: two deterministic children, displacement identically 1,
// so phi(beta) = log 2 - beta is linear and phi(beta)/beta has no interior
// minimizer.  Classifies NoInteriorMinimizer.
PhaseReport classify_transition_linear_test();

// Norming sequence for the minimum: (alpha+1) * ln n - ln c.  n >= 1.
double alpha_n(const DisplacementSpec& spec, std::int64_t n);

// Big-jump threshold n / (ln n)^3.  Throws std::domain_error for n < 2.
double zeta_n(std::int64_t n);

// Draw from X: with probability p_left a reflected Pareto below x0 by
// inversion, else Uniform[0, b].  Inline: this sits in the innermost loop of
// the walk simulators.
inline double sample_x(const DisplacementSpec& spec, Rng& rng) {
  if (rng.uniform() < spec.p_left) {
    // Reflected Pareto below x0 by inversion: |Y| = |x0| * U^(-1/alpha).
    return spec.x0 * std::pow(rng.uniform_pos(), -1.0 / spec.alpha);
  }
  return spec.b * rng.uniform();
}

// Draw from the tilted child law (density e^y * density_x(y) / s): the right
// block by inversion of the exponential weight on [0, b]; the left tail by
// proposing x0 - Exp(1) and accepting with probability (|y|/|x0|)^(-alpha-1).
// Inline: this sits in the innermost loop of the tree walker.
inline double sample_child_displacement(const DisplacementSpec& spec, Rng& rng) {
  if (rng.uniform() < spec.tilt_left_mass) {
    // Left tail of the tilted law: the proposal x0 - Exp(1) has density
    // e^(y - x0) on (-inf, x0]; the acceptance ratio (|y|/|x0|)^(-alpha-1)
    // is at most one on that range.
    for (;;) {
      const double y = spec.x0 - rng.exponential();
      if (rng.uniform() <= std::pow(y / spec.x0, -spec.alpha - 1.0)) return y;
    }
  }
  // Right block: density proportional to e^y on [0, b]; invert the CDF
  // (e^y - 1)/(e^b - 1).
  return std::log1p(rng.uniform() * spec.expm1_b);
}

}  // namespace brw
