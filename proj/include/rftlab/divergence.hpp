#ifndef RFTLAB_DIVERGENCE_HPP
#define RFTLAB_DIVERGENCE_HPP

#include <string>
#include <vector>

#include "rftlab/errors.hpp"

namespace rftlab::divergence {

enum class Kind { None, RKL, SRKL };

// How the token-level penalty and its gradient enter a training step:
// ExactFullVocab sums over the whole vocabulary at every visited context,
// SampledToken uses the single sampled token as a one-point estimate.
enum class Estimator { ExactFullVocab, SampledToken };

struct DivergenceSpec {
  Kind kind = Kind::SRKL;
  double alpha = 0.8;   // skew weight, only meaningful for SRKL
  double beta = 0.04;   // penalty strength
  Estimator estimator = Estimator::ExactFullVocab;

  // Throws DomainError on out-of-range alpha/beta for the chosen kind.
  void validate() const;
  bool operator==(const DivergenceSpec&) const = default;
};

// Reverse KL between two distributions: sum_v p[v] * log(p[v]/q[v]).
// Both inputs must sum to 1 within 1e-9. Terms with p[v] = 0 contribute 0.
// Throws DomainError if some p[v] > 0 where q[v] = 0.
double rkl_value(const std::vector<double>& p_theta,
                 const std::vector<double>& p_ref);

// Skewed reverse KL: sum_v p[v] * log(p[v] / (alpha*p[v] + (1-alpha)*q[v])).
// Finite for any pair of distributions when 0 < alpha < 1: wherever p[v] > 0
// the mixture denominator is at least alpha*p[v] > 0.
double srkl_value(const std::vector<double>& p_theta,
                  const std::vector<double>& p_ref, double alpha);

// Penalty contribution of one sampled token with probabilities p_theta under
// the trained policy and p_ref under the reference.
//   RKL  -> log(p_theta / p_ref)
//   SRKL -> log(p_theta / (alpha*p_theta + (1-alpha)*p_ref))
//   None -> 0
double sampled_token_penalty(const DivergenceSpec& spec, double p_theta,
                             double p_ref);

// Per-token gradient coefficient as a function of the ratio r = p_theta/p_ref.
//   RKL  -> log(r) + 1, unbounded in both directions
//   SRKL -> log(r/(alpha*r+1-alpha)) + 1 - alpha*r/(alpha*r+1-alpha),
//           strictly increasing, bounded above by log(1/alpha),
//           unbounded below as r -> 0
//   None -> 0
double gradient_coefficient(const DivergenceSpec& spec, double ratio);

// Closed-form derivative of the SRKL coefficient with respect to r:
//   (1-alpha)^2 / (r * (alpha*r + 1-alpha)^2), strictly positive.
double gradient_coefficient_derivative(double alpha, double ratio);

// Largest attainable SRKL coefficient, log(1/alpha).
double coefficient_upper_bound(double alpha);

struct LandscapePoint {
  double p_theta = 0.0;
  double p_ref = 0.0;
  double penalty = 0.0;
};

struct GridSpec {
  int n_theta = 200;
  int n_ref = 200;
  double lo = 1e-4;
  double hi = 1.0 - 1e-4;
};

// Tabulates the sampled-token penalty over a log-spaced grid of
// (p_theta, p_ref) pairs. alpha = 0 selects the plain reverse-KL penalty;
// 0 < alpha < 1 selects the skewed one. Row-major with p_theta outermost.
std::vector<LandscapePoint> penalty_landscape(double alpha,
                                              const GridSpec& grid = {});

// CSV serialization, header "p_theta,p_ref,penalty", 12 significant digits.
std::string landscape_csv(const std::vector<LandscapePoint>& points);

}  // namespace rftlab::divergence

#endif
