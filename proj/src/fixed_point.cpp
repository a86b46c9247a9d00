#include "rftlab/fixed_point.hpp"

#include <algorithm>
#include <cmath>

#include "rftlab/divergence.hpp"

namespace rftlab::fixed_point {

namespace {

double skew_coefficient(double alpha, double r) {
  double denom = alpha * r + (1.0 - alpha);
  return std::log(r / denom) + 1.0 - alpha * r / denom;
}

constexpr int kMaxOuterIterations = 10000;

}  // namespace

void RegularizedProblem::validate() const {
  if (q_values.empty()) throw EmptyInput("fixed_point: empty action set");
  if (q_values.size() != p_ref.size())
    throw ShapeError("fixed_point: q_values/p_ref sizes differ");
  if (!(beta > 0.0)) throw DomainError("fixed_point: beta must be > 0");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw DomainError("fixed_point: alpha must lie strictly in (0,1)");
  double sum = 0.0;
  for (double p : p_ref) {
    if (!(p > 0.0)) throw DomainError("fixed_point: p_ref must be positive");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw DomainError("fixed_point: p_ref must sum to 1 within 1e-12");
  for (double q : q_values)
    if (!std::isfinite(q)) throw DomainError("fixed_point: non-finite q value");
}

double invert_coefficient(double alpha, double target) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw DomainError("invert_coefficient: alpha must lie strictly in (0,1)");
  const double bound = std::log(1.0 / alpha);
  if (!(target < bound))
    throw OutOfRange("invert_coefficient: target not below log(1/alpha)");

  const double at_one = 1.0 - alpha;
  double lo = 1.0, hi = 1.0;
  if (target >= at_one) {
    hi = 2.0;
    int guard = 0;
    while (skew_coefficient(alpha, hi) <= target) {
      hi *= 2.0;
      if (++guard > 1100)
        throw NonConvergence("invert_coefficient: target too close to bound");
    }
  } else {
    lo = 0.5;
    int guard = 0;
    while (skew_coefficient(alpha, lo) >= target) {
      lo *= 0.5;
      if (++guard > 1100)
        throw NonConvergence("invert_coefficient: target too negative");
    }
  }

  // Bisection on log r; the coefficient is strictly increasing in r.
  double ulo = std::log(lo), uhi = std::log(hi);
  for (int it = 0; it < 500 && uhi - ulo > 1e-15; ++it) {
    double umid = 0.5 * (ulo + uhi);
    double c = skew_coefficient(alpha, std::exp(umid));
    if (c < target)
      ulo = umid;
    else
      uhi = umid;
  }
  return std::exp(0.5 * (ulo + uhi));
}

FixedPointSolution solve_optimal_policy(const RegularizedProblem& problem) {
  problem.validate();
  const std::size_t n = problem.q_values.size();
  const double alpha = problem.alpha;
  const double beta = problem.beta;

  std::size_t top = 0;
  for (std::size_t a = 1; a < n; ++a)
    if (problem.q_values[a] > problem.q_values[top]) top = a;
  const double q_top = problem.q_values[top];

  // Ratios of all actions as a function of the top action's ratio t. Every
  // non-top target sits below C_alpha(t) by (q_top - q_a)/beta >= 0, hence
  // strictly below the bound.
  auto ratios_at = [&](double t) {
    const double c_top = skew_coefficient(alpha, t);
    std::vector<double> r(n);
    for (std::size_t a = 0; a < n; ++a) {
      if (a == top) {
        r[a] = t;
        continue;
      }
      double target = (problem.q_values[a] - q_top) / beta + c_top;
      r[a] = target == c_top ? t : invert_coefficient(alpha, target);
    }
    return r;
  };
  auto excess = [&](double t) {
    std::vector<double> r = ratios_at(t);
    double s = 0.0;
    for (std::size_t a = 0; a < n; ++a) s += problem.p_ref[a] * r[a];
    return s - 1.0;
  };

  // excess is strictly increasing in t, negative for small t and positive
  // once t exceeds 1/p_ref(top). excess(1) <= 0 because every ratio is then
  // at most 1.
  double t_star;
  double h1 = excess(1.0);
  if (std::abs(h1) <= 1e-12) {
    t_star = 1.0;
  } else {
    if (h1 > 0.0)
      throw BracketError("solve_optimal_policy: positive excess at t = 1");
    double hi = 2.0;
    int guard = 0;
    while (excess(hi) <= 0.0) {
      hi *= 2.0;
      if (++guard > 200)
        throw BracketError("solve_optimal_policy: no sign change found");
    }
    double ulo = 0.0, uhi = std::log(hi);
    bool converged = false;
    for (int it = 0; it < kMaxOuterIterations; ++it) {
      double umid = 0.5 * (ulo + uhi);
      double h = excess(std::exp(umid));
      if (std::abs(h) <= 1e-12) {
        ulo = uhi = umid;
        converged = true;
        break;
      }
      if (h < 0.0)
        ulo = umid;
      else
        uhi = umid;
      if (uhi - ulo < 1e-15) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw NonConvergence("solve_optimal_policy: outer bisection stalled");
    t_star = std::exp(0.5 * (ulo + uhi));
  }

  FixedPointSolution sol;
  sol.ratios = ratios_at(t_star);
  sol.lambda = q_top - beta * skew_coefficient(alpha, t_star);
  double mass = 0.0;
  for (std::size_t a = 0; a < n; ++a) mass += problem.p_ref[a] * sol.ratios[a];
  sol.residual = std::abs(mass - 1.0);
  if (sol.residual > 1e-9)
    throw NonConvergence("solve_optimal_policy: residual above 1e-9");
  sol.policy.resize(n);
  for (std::size_t a = 0; a < n; ++a)
    sol.policy[a] = problem.p_ref[a] * sol.ratios[a] / mass;
  return sol;
}

std::vector<double> rkl_tilted_policy(const std::vector<double>& q_values,
                                      const std::vector<double>& p_ref,
                                      double beta) {
  if (q_values.empty()) throw EmptyInput("rkl_tilted_policy: empty action set");
  if (q_values.size() != p_ref.size())
    throw ShapeError("rkl_tilted_policy: size mismatch");
  if (!(beta > 0.0)) throw DomainError("rkl_tilted_policy: beta must be > 0");
  std::vector<double> logits(q_values.size());
  for (std::size_t a = 0; a < q_values.size(); ++a) {
    if (!(p_ref[a] > 0.0))
      throw DomainError("rkl_tilted_policy: p_ref must be positive");
    logits[a] = std::log(p_ref[a]) + q_values[a] / beta;
  }
  double zmax = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  std::vector<double> out(logits.size());
  for (std::size_t a = 0; a < logits.size(); ++a) {
    out[a] = std::exp(logits[a] - zmax);
    total += out[a];
  }
  for (double& p : out) p /= total;
  return out;
}

}  // namespace rftlab::fixed_point
