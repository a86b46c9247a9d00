#ifndef RFTLAB_FIXED_POINT_HPP
#define RFTLAB_FIXED_POINT_HPP

#include <vector>

#include "rftlab/errors.hpp"

namespace rftlab::fixed_point {

// One-state regularized policy optimization problem: maximize
//   sum_a pi(a) q(a) - beta * SRKL_alpha(pi || p_ref)
// over distributions pi.
struct RegularizedProblem {
  std::vector<double> q_values;
  std::vector<double> p_ref;  // strictly positive, sums to 1 within 1e-12
  double beta = 0.04;
  double alpha = 0.8;

  void validate() const;
};

struct FixedPointSolution {
  double lambda = 0.0;            // multiplier of the normalization constraint
  std::vector<double> ratios;     // r*(a) = pi*(a) / p_ref(a) before renorm
  std::vector<double> policy;     // p_ref(a) * r*(a), normalized exactly
  double residual = 0.0;          // |sum_a p_ref(a) r*(a) - 1|
};

// Inverse of the skew coefficient map r -> log(r/(alpha r + 1-alpha)) + 1 -
// alpha r/(alpha r + 1-alpha). The map is strictly increasing with range
// (-inf, log(1/alpha)), so the inverse exists for target < log(1/alpha);
// anything at or above the bound throws OutOfRange. Solved by bisection in
// log r to about 1e-13 in coefficient space.
double invert_coefficient(double alpha, double target);

// Solves the first-order conditions q(a) - lambda = beta * C_alpha(r(a))
// together with sum_a p_ref(a) r(a) = 1. The search runs over the ratio of
// the best action; lambda then follows as q_max - beta * C_alpha(r_max),
// which maps onto the bracket
// (q_max - beta log(1/alpha), q_max - beta (1-alpha)] one-to-one and keeps
// every per-action target strictly below the coefficient bound.
// Throws NonConvergence if the normalization residual cannot be driven
// below 1e-9, BracketError if the bracket fails to straddle a root.
FixedPointSolution solve_optimal_policy(const RegularizedProblem& problem);

// Closed-form solution of the same problem with plain reverse KL in place of
// the skewed penalty: softmax(log p_ref + q/beta). The alpha -> 0 limit of
// solve_optimal_policy converges to this.
std::vector<double> rkl_tilted_policy(const std::vector<double>& q_values,
                                      const std::vector<double>& p_ref,
                                      double beta);

}  // namespace rftlab::fixed_point

#endif
