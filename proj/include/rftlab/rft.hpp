#ifndef RFTLAB_RFT_HPP
#define RFTLAB_RFT_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rftlab/divergence.hpp"
#include "rftlab/policy.hpp"

namespace rftlab::rft {

// Which advantage signs survive before the update.
enum class MaskMode { Full, PositiveOnly, NegativeOnly };

// GRPOToken clips a per-token importance ratio; SequenceRatio clips one
// geometric-mean sequence ratio applied at every token of the rollout.
enum class SurrogateKind { GRPOToken, SequenceRatio };

struct SurrogateSpec {
  SurrogateKind kind = SurrogateKind::GRPOToken;
  double clip_eps_low = 0.2;
  double clip_eps_high = 0.2;
  MaskMode mask = MaskMode::Full;

  void validate() const;
  bool operator==(const SurrogateSpec&) const = default;
};

struct RolloutGroup {
  std::vector<int> prompt;
  std::vector<policy::Rollout> rollouts;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

// Group-relative advantages: (r_i - mean) / (population std + 1e-6).
// A group with identical rewards yields exactly zero advantages.
// Throws GroupTooSmall for fewer than two rewards.
std::vector<double> group_advantages(const std::vector<double>& rewards);

// Builds a group from scored rollouts, filling rewards and advantages.
RolloutGroup make_group(std::vector<int> prompt,
                        std::vector<policy::Rollout> rollouts);

// Zeroes the advantages the mode excludes; exact zeros pass through untouched.
std::vector<double> apply_mask(const std::vector<double>& advantages,
                               MaskMode mode);

// Coefficient multiplying grad log pi(o_t) for a clipped surrogate
// min(ratio*A, clip(ratio)*A): A*ratio on the active unclipped branch,
// 0 when the clip is binding.
double surrogate_coefficient(const SurrogateSpec& spec, double advantage,
                             double ratio);

// Value of the same clipped surrogate term.
double surrogate_value(const SurrogateSpec& spec, double advantage,
                       double ratio);

struct BatchGradient {
  // Surrogate contributions are kept in two sign partitions (rollouts with
  // positive vs negative advantage) and combined at the end, so the FULL-mode
  // gradient equals the PositiveOnly plus NegativeOnly gradients bit for bit.
  policy::SparseGrad surrogate;
  policy::SparseGrad penalty;  // unscaled; caller applies -beta
  double surrogate_term = 0.0;
  double penalty_term = 0.0;
  double mean_advantage_magnitude = 0.0;
};

// Analytic gradient of the batch objective
//   mean_i (1/|o_i|) sum_t [ surrogate_it - beta * penalty_it ]
// split into its two parts. With the exact full-vocabulary estimator the
// combined gradient matches central finite differences of batch_objective.
// With the sampled estimator the penalty part is the one-point estimate whose
// expectation is the exact gradient; it is not the derivative of the sampled
// penalty value.
BatchGradient batch_gradient(const policy::PolicySnapshot& policy,
                             const policy::PolicySnapshot& reference,
                             const std::vector<RolloutGroup>& groups,
                             const divergence::DivergenceSpec& div,
                             const SurrogateSpec& surr);

// Objective value for the same batch at an arbitrary snapshot (the rollouts'
// stored log-probabilities act as the frozen "old" policy). Only meaningful
// with the exact estimator when differentiating numerically.
double batch_objective(const policy::PolicySnapshot& policy,
                       const policy::PolicySnapshot& reference,
                       const std::vector<RolloutGroup>& groups,
                       const divergence::DivergenceSpec& div,
                       const SurrogateSpec& surr);

struct TrainStepReport {
  std::int64_t step = 0;
  double mean_reward = 0.0;
  double mean_advantage_magnitude = 0.0;
  double surrogate_term = 0.0;
  double penalty_term = 0.0;
  double grad_norm = 0.0;
  double entropy = 0.0;
};

// One-line JSON with keys exactly: step, mean_reward,
// mean_advantage_magnitude, surrogate_term, penalty_term, grad_norm, entropy.
std::string report_jsonl_line(const TrainStepReport& report);

// Single plain gradient-ascent update from an on-policy batch. Rollouts must
// carry the current policy version (StaleRollouts otherwise). The returned
// snapshot has version + 1; the input snapshot is untouched. With beta = 0 or
// divergence None the update bypasses the penalty path entirely, so those two
// configurations produce bitwise identical policies.
std::pair<policy::PolicySnapshot, TrainStepReport> train_step(
    const policy::PolicySnapshot& policy,
    const policy::PolicySnapshot& reference,
    const std::vector<RolloutGroup>& groups,
    const divergence::DivergenceSpec& div, const SurrogateSpec& surr,
    double learning_rate, std::int64_t step);

}  // namespace rftlab::rft

#endif
