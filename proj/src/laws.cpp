#include "brw/laws.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace brw {

namespace {

constexpr double kQuadAbsTol = 1e-10;  // declared absolute tolerance
constexpr double kInf = std::numeric_limits<double>::infinity();

// Adaptive Gauss-Kronrod with an absolute-tolerance guarantee; throws if the
// error estimate does not meet the declared tolerance.
double integrate(const std::function<double(double)>& f, double a, double b) {
  double error = 0.0;
  double q = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, a, b, 15, 1e-13, &error);
  if (!(error <= kQuadAbsTol))
    throw std::runtime_error("quadrature error estimate above tolerance");
  return q;
}

// Left-tail integral of the raw law against e^(theta y):
//   integral over (-inf, x0] of e^(theta y) * c |y|^(-alpha-1) dy
// written as an integral over t = |y| in [|x0|, inf).
double left_exp_integral(double alpha, double x0, double c, double theta) {
  const double t0 = -x0;
  return integrate(
      [=](double t) { return c * std::exp(-theta * t) * std::pow(t, -alpha - 1.0); },
      t0, kInf);
}

// Right-block integral: integral over [0, b] of e^(theta y) * (1-p)/b dy.
double right_exp_integral(double p_left, double b, double theta) {
  const double h = (1.0 - p_left) / b;
  return integrate([=](double y) { return h * std::exp(theta * y); }, 0.0, b);
}

// E[e^(theta X)] from raw parameters (needed during construction, before a
// finished spec exists).
double mgf_raw(double alpha, double x0, double p_left, double b, double c,
               double theta) {
  return left_exp_integral(alpha, x0, c, theta) +
         right_exp_integral(p_left, b, theta);
}

// Shared classifier: minimizes f(beta)/beta over a dyadic grid on
// (0, beta_max], then compares the ratio at the minimizer with the left
// derivative of f there.  f may return +infinity past its finiteness domain.
PhaseReport classify_phi(const std::function<double(double)>& f,
                         double beta_max) {
  constexpr int kGrid = 2048;        // beta_max/kGrid dyadic for beta_max = 8
  constexpr double kStep1e5 = 1e-5;  // finite-difference step
  constexpr double kGapTol = 1e-3;   // first/second order decision tolerance

  const double step = beta_max / kGrid;
  int best = -1, last_finite = -1;
  double best_ratio = kInf;
  for (int i = 1; i <= kGrid; ++i) {
    const double beta = step * i;
    const double v = f(beta);
    if (!std::isfinite(v)) break;  // finiteness domain is an interval from 0
    last_finite = i;
    const double ratio = v / beta;
    if (ratio < best_ratio) {
      best_ratio = ratio;
      best = i;
    }
  }
  if (last_finite < 1)
    throw std::domain_error("phi not finite anywhere on the scan grid");

  PhaseReport rep;
  const bool domain_truncated = last_finite < kGrid;
  const double beta_c = step * best;
  rep.beta_c = beta_c;
  rep.phi_at_beta_c = f(beta_c);

  const double h = kStep1e5;
  if (std::isfinite(f(beta_c + h))) {
    rep.left_derivative = (f(beta_c + h) - f(beta_c - h)) / (2.0 * h);
  } else {
    // Domain edge: second-order one-sided difference from the left.
    rep.left_derivative =
        (3.0 * f(beta_c) - 4.0 * f(beta_c - h) + f(beta_c - 2.0 * h)) /
        (2.0 * h);
  }

  if (!domain_truncated && best == last_finite) {
    // The ratio is still decreasing at the scan edge and f never blew up:
    // no interior minimizer exists on (0, beta_max].
    rep.order = TransitionOrder::NoInteriorMinimizer;
    return rep;
  }

  const double gap = rep.phi_at_beta_c / beta_c - rep.left_derivative;
  rep.order = gap > kGapTol ? TransitionOrder::FirstOrder
                            : TransitionOrder::SecondOrder;
  return rep;
}

}  // namespace

const char* to_string(TransitionOrder order) {
  switch (order) {
    case TransitionOrder::FirstOrder: return "FirstOrder";
    case TransitionOrder::SecondOrder: return "SecondOrder";
    case TransitionOrder::NoInteriorMinimizer: return "NoInteriorMinimizer";
  }
  return "?";
}

DisplacementSpec make_displacement_spec(double alpha, double gamma_witness,
                                        double x0, double p_left, double b) {
  if (!(alpha > 1.0))
    throw std::invalid_argument("displacement: alpha must be > 1");
  if (!(gamma_witness > 3.0))
    throw std::invalid_argument("displacement: gamma_witness must be > 3");
  if (!(x0 < 0.0))
    throw std::invalid_argument("displacement: x0 must be negative");
  if (!(p_left > 0.0 && p_left < 1.0))
    throw std::invalid_argument("displacement: p_left must lie in (0,1)");
  if (!(b > 0.0))
    throw std::invalid_argument("displacement: b must be > 0");

  DisplacementSpec d;
  d.alpha = alpha;
  d.gamma_witness = gamma_witness;
  d.x0 = x0;
  d.p_left = p_left;
  d.b = b;
  d.slowvar.c = p_left * alpha * std::pow(-x0, alpha);
  d.m = p_left * x0 * alpha / (alpha - 1.0) + (1.0 - p_left) * b / 2.0;
  if (!(d.m > 0.0))
    throw std::invalid_argument("displacement: derived mean must be > 0");
  const double left1 = left_exp_integral(alpha, x0, d.slowvar.c, 1.0);
  d.s = left1 + right_exp_integral(p_left, b, 1.0);
  if (!(d.s > 1.0))
    throw std::invalid_argument("displacement: derived E[e^X] must be > 1");
  d.tilt_left_mass = left1 / d.s;
  d.expm1_b = std::expm1(b);
  return d;
}

DisplacementSpec default_displacement_spec() {
  static const DisplacementSpec d =
      make_displacement_spec(2.5, 3.5, -1.0, 0.3, 2.0);
  return d;
}

OffspringSpec poisson_offspring(const DisplacementSpec& spec) {
  OffspringSpec o;
  o.kind = OffspringSpec::Kind::PoissonMean;
  o.mean = spec.s;
  o.exp_neg_mean = std::exp(-spec.s);
  return o;
}

OffspringSpec deterministic_offspring(int k) {
  if (k < 1) throw std::invalid_argument("offspring: deterministic k must be >= 1");
  OffspringSpec o;
  o.kind = OffspringSpec::Kind::Deterministic;
  o.k = k;
  o.mean = k;
  return o;
}

double density_x(const DisplacementSpec& spec, double y) {
  if (y <= spec.x0)
    return spec.slowvar.c * std::pow(-y, -spec.alpha - 1.0);
  if (y >= 0.0 && y <= spec.b) return (1.0 - spec.p_left) / spec.b;
  return 0.0;
}

double mean_x(const DisplacementSpec& spec) {
  return spec.p_left * spec.x0 * spec.alpha / (spec.alpha - 1.0) +
         (1.0 - spec.p_left) * spec.b / 2.0;
}

double cdf_x(const DisplacementSpec& spec, double y) {
  if (y <= spec.x0) return spec.p_left * std::pow(y / spec.x0, -spec.alpha);
  if (y < 0.0) return spec.p_left;
  if (y <= spec.b)
    return spec.p_left + (1.0 - spec.p_left) * y / spec.b;
  return 1.0;
}

double tilted_cdf_x(const DisplacementSpec& spec, double y) {
  const double c = spec.slowvar.c;
  double acc = 0.0;
  const double upper_left = std::min(y, spec.x0);
  // Left-tail mass up to upper_left, as an integral over t = |y|.
  acc += integrate(
      [&](double t) {
        return c * std::exp(-t) * std::pow(t, -spec.alpha - 1.0);
      },
      -upper_left, kInf);
  if (y > 0.0) {
    const double h = (1.0 - spec.p_left) / spec.b;
    const double ub = std::min(y, spec.b);
    acc += integrate([&](double t) { return h * std::exp(t); }, 0.0, ub);
  }
  return acc / spec.s;
}

double log_mgf(const DisplacementSpec& spec, double theta) {
  if (theta < 0.0)
    throw std::domain_error("log_mgf: theta must be >= 0 (heavy left tail)");
  if (theta == 0.0) return 0.0;
  return std::log(
      mgf_raw(spec.alpha, spec.x0, spec.p_left, spec.b, spec.slowvar.c, theta));
}

double phi(const DisplacementSpec& spec, double beta) {
  if (beta > 1.0) return kInf;
  return log_mgf(spec, 1.0 - beta);
}

double free_energy(const DisplacementSpec& spec, double beta) {
  if (beta < 0.0) throw std::domain_error("free_energy: beta must be >= 0");
  if (beta > 1.0) return 0.0;
  return phi(spec, beta);
}

PhaseReport classify_transition(const DisplacementSpec& spec) {
  return classify_phi([&](double beta) { return phi(spec, beta); }, 8.0);
}

PhaseReport classify_transition_gaussian_boundary() {
  // Two deterministic children, displacement N(2 log 2, 2 log 2):
  // phi(beta) = log 2 + beta^2 log 2 - 2 beta log 2 = log(2) (1 - beta)^2.
  const double l2 = std::log(2.0);
  return classify_phi(
      [=](double beta) { return l2 * (1.0 - beta) * (1.0 - beta); }, 8.0);
}

PhaseReport classify_transition_linear_test() {
  // Two deterministic children, displacement identically 1:
  // phi(beta) = log 2 - beta.
  const double l2 = std::log(2.0);
  return classify_phi([=](double beta) { return l2 - beta; }, 8.0);
}

double alpha_n(const DisplacementSpec& spec, std::int64_t n) {
  if (n < 1) throw std::domain_error("alpha_n: n must be >= 1");
  return (spec.alpha + 1.0) * std::log(static_cast<double>(n)) -
         std::log(spec.slowvar.c);
}

double zeta_n(std::int64_t n) {
  if (n < 2) throw std::domain_error("zeta_n: n must be >= 2");
  const double ln = std::log(static_cast<double>(n));
  return static_cast<double>(n) / (ln * ln * ln);
}

}  // namespace brw
