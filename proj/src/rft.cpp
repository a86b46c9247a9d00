#include "rftlab/rft.hpp"

#include <cassert>
#include <cmath>
#include <json.hpp>

namespace rftlab::rft {

namespace {

using divergence::DivergenceSpec;
using divergence::Kind;
using policy::PolicySnapshot;
using policy::Rollout;
using policy::SparseGrad;

void check_batch(const PolicySnapshot& policy, const PolicySnapshot& reference,
                 const std::vector<RolloutGroup>& groups,
                 bool require_current_version) {
  if (!(policy.config == reference.config))
    throw ConfigMismatch("rft: policy/reference configs differ");
  if (groups.empty()) throw EmptyInput("rft: empty batch");
  for (const RolloutGroup& g : groups) {
    if (g.rollouts.size() < 2) throw GroupTooSmall("rft: group smaller than 2");
    if (g.advantages.size() != g.rollouts.size() ||
        g.rewards.size() != g.rollouts.size())
      throw ShapeError("rft: group field sizes differ");
    if (require_current_version)
      for (const Rollout& r : g.rollouts)
        if (r.policy_version != policy.version)
          throw StaleRollouts("rft: rollout from a different policy version");
  }
}

std::int64_t total_rollouts(const std::vector<RolloutGroup>& groups) {
  std::int64_t n = 0;
  for (const RolloutGroup& g : groups) n += static_cast<std::int64_t>(g.rollouts.size());
  return n;
}

double token_ratio(const PolicySnapshot& policy, const Rollout& r,
                   std::size_t t, const std::vector<double>& p_now) {
  double logp_now = std::log(p_now[static_cast<std::size_t>(r.response[t])]);
  return std::exp(logp_now - r.logp_theta[t]);
}

double sequence_ratio(const PolicySnapshot& policy, const Rollout& r) {
  double acc = 0.0;
  for (std::size_t t = 0; t < r.response.size(); ++t) {
    std::vector<double> p = policy::row_distribution(policy, r.context_rows[t]);
    acc += std::log(p[static_cast<std::size_t>(r.response[t])]) - r.logp_theta[t];
  }
  return std::exp(acc / static_cast<double>(r.response.size()));
}

// Per-element coefficients C(r_v) for one context row; dD/dp_v of the exact
// full-vocabulary penalty.
std::vector<double> row_coefficients(const DivergenceSpec& div,
                                     const std::vector<double>& p,
                                     const std::vector<double>& q) {
  std::vector<double> c(p.size());
  for (std::size_t v = 0; v < p.size(); ++v)
    c[v] = divergence::gradient_coefficient(div, p[v] / q[v]);
  return c;
}

void add_scaled(SparseGrad& grad, std::int64_t row,
                const std::vector<double>& vec, double scale) {
  auto [it, fresh] = grad.try_emplace(row, vec.size(), 0.0);
  std::vector<double>& g = it->second;
  for (std::size_t i = 0; i < vec.size(); ++i) g[i] += scale * vec[i];
}

SparseGrad combine(const SparseGrad& a, const SparseGrad& b) {
  SparseGrad out = a;
  for (const auto& [row, vec] : b) {
    auto [it, fresh] = out.try_emplace(row, vec.size(), 0.0);
    for (std::size_t i = 0; i < vec.size(); ++i) it->second[i] += vec[i];
  }
  return out;
}

}  // namespace

void SurrogateSpec::validate() const {
  if (!(clip_eps_low > 0.0 && clip_eps_low < 1.0) ||
      !(clip_eps_high > 0.0 && clip_eps_high < 1.0))
    throw DomainError("surrogate: clip eps must lie in (0,1)");
}

std::vector<double> group_advantages(const std::vector<double>& rewards) {
  if (rewards.size() < 2)
    throw GroupTooSmall("group_advantages: need at least 2 rewards");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  double std_pop = std::sqrt(var / n);
  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i)
    adv[i] = (rewards[i] - mean) / (std_pop + 1e-6);
  return adv;
}

RolloutGroup make_group(std::vector<int> prompt,
                        std::vector<policy::Rollout> rollouts) {
  RolloutGroup g;
  g.prompt = std::move(prompt);
  g.rollouts = std::move(rollouts);
  g.rewards.reserve(g.rollouts.size());
  for (const Rollout& r : g.rollouts) g.rewards.push_back(r.reward);
  g.advantages = group_advantages(g.rewards);
  return g;
}

std::vector<double> apply_mask(const std::vector<double>& advantages,
                               MaskMode mode) {
  std::vector<double> out = advantages;
  if (mode == MaskMode::Full) return out;
  for (double& a : out) {
    if (mode == MaskMode::PositiveOnly && a < 0.0) a = 0.0;
    if (mode == MaskMode::NegativeOnly && a > 0.0) a = 0.0;
  }
  return out;
}

double surrogate_coefficient(const SurrogateSpec& spec, double advantage,
                             double ratio) {
  spec.validate();
  if (!(ratio > 0.0)) throw DomainError("surrogate_coefficient: ratio <= 0");
  if (advantage == 0.0) return 0.0;
  if (advantage > 0.0)
    return ratio <= 1.0 + spec.clip_eps_high ? advantage * ratio : 0.0;
  return ratio >= 1.0 - spec.clip_eps_low ? advantage * ratio : 0.0;
}

double surrogate_value(const SurrogateSpec& spec, double advantage,
                       double ratio) {
  spec.validate();
  if (!(ratio > 0.0)) throw DomainError("surrogate_value: ratio <= 0");
  double clipped = ratio;
  if (clipped < 1.0 - spec.clip_eps_low) clipped = 1.0 - spec.clip_eps_low;
  if (clipped > 1.0 + spec.clip_eps_high) clipped = 1.0 + spec.clip_eps_high;
  return std::min(ratio * advantage, clipped * advantage);
}

BatchGradient batch_gradient(const PolicySnapshot& policy,
                             const PolicySnapshot& reference,
                             const std::vector<RolloutGroup>& groups,
                             const DivergenceSpec& div,
                             const SurrogateSpec& surr) {
  div.validate();
  surr.validate();
  check_batch(policy, reference, groups, false);

  const bool exact =
      div.estimator == divergence::Estimator::ExactFullVocab;
  const bool want_penalty = div.kind != Kind::None && div.beta > 0.0;
  const double cap = div.kind == Kind::SRKL
                         ? divergence::coefficient_upper_bound(div.alpha)
                         : 0.0;
  const double inv_n = 1.0 / static_cast<double>(total_rollouts(groups));

  BatchGradient out;
  SparseGrad surr_pos, surr_neg;
  std::int64_t rollout_count = 0;

  for (const RolloutGroup& g : groups) {
    std::vector<double> adv = apply_mask(g.advantages, surr.mask);
    for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
      const Rollout& r = g.rollouts[i];
      const double a = adv[i];
      out.mean_advantage_magnitude += std::abs(a);
      ++rollout_count;
      const double w = inv_n / static_cast<double>(r.response.size());
      const double seq_ratio = surr.kind == SurrogateKind::SequenceRatio
                                   ? sequence_ratio(policy, r)
                                   : 1.0;
      SparseGrad& part = a > 0.0 ? surr_pos : surr_neg;

      for (std::size_t t = 0; t < r.response.size(); ++t) {
        const std::int64_t row = r.context_rows[t];
        const int tok = r.response[t];
        std::vector<double> p = policy::row_distribution(policy, row);
        const double ratio = surr.kind == SurrogateKind::SequenceRatio
                                 ? seq_ratio
                                 : token_ratio(policy, r, t, p);

        out.surrogate_term += w * surrogate_value(surr, a, ratio);
        if (a != 0.0) {
          const double coef = surrogate_coefficient(surr, a, ratio);
          if (coef != 0.0) {
            // d/dlogits of coef-weighted log pi(tok): one-hot minus softmax.
            std::vector<double> contrib(p.size());
            for (std::size_t v = 0; v < p.size(); ++v) contrib[v] = -coef * p[v];
            contrib[static_cast<std::size_t>(tok)] += coef;
            add_scaled(part, row, contrib, w);
          }
        }

        if (!want_penalty) continue;
        std::vector<double> q = policy::row_distribution(reference, row);
        if (exact) {
          std::vector<double> c = row_coefficients(div, p, q);
          double mean_c = 0.0;
          for (std::size_t v = 0; v < p.size(); ++v) mean_c += p[v] * c[v];
          std::vector<double> contrib(p.size());
          for (std::size_t v = 0; v < p.size(); ++v) {
            if (div.kind == Kind::SRKL) assert(c[v] <= cap + 1e-9);
            contrib[v] = p[v] * (c[v] - mean_c);
          }
          add_scaled(out.penalty, row, contrib, w);
          out.penalty_term +=
              w * (div.kind == Kind::SRKL ? divergence::srkl_value(p, q, div.alpha)
                                          : divergence::rkl_value(p, q));
        } else {
          const std::size_t ti = static_cast<std::size_t>(tok);
          const double c = divergence::gradient_coefficient(div, p[ti] / q[ti]);
          if (div.kind == Kind::SRKL) assert(c <= cap + 1e-9);
          std::vector<double> contrib(p.size());
          for (std::size_t v = 0; v < p.size(); ++v) contrib[v] = -c * p[v];
          contrib[ti] += c;
          add_scaled(out.penalty, row, contrib, w);
          out.penalty_term +=
              w * divergence::sampled_token_penalty(div, p[ti], q[ti]);
        }
      }
    }
  }

  out.surrogate = combine(surr_pos, surr_neg);
  out.mean_advantage_magnitude /= static_cast<double>(rollout_count);
  return out;
}

double batch_objective(const PolicySnapshot& policy,
                       const PolicySnapshot& reference,
                       const std::vector<RolloutGroup>& groups,
                       const DivergenceSpec& div, const SurrogateSpec& surr) {
  div.validate();
  surr.validate();
  check_batch(policy, reference, groups, false);

  const bool exact = div.estimator == divergence::Estimator::ExactFullVocab;
  const bool want_penalty = div.kind != Kind::None && div.beta > 0.0;
  const double inv_n = 1.0 / static_cast<double>(total_rollouts(groups));
  double objective = 0.0;

  for (const RolloutGroup& g : groups) {
    std::vector<double> adv = apply_mask(g.advantages, surr.mask);
    for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
      const Rollout& r = g.rollouts[i];
      const double a = adv[i];
      const double w = inv_n / static_cast<double>(r.response.size());
      const double seq_ratio = surr.kind == SurrogateKind::SequenceRatio
                                   ? sequence_ratio(policy, r)
                                   : 1.0;
      for (std::size_t t = 0; t < r.response.size(); ++t) {
        const std::int64_t row = r.context_rows[t];
        std::vector<double> p = policy::row_distribution(policy, row);
        const double ratio = surr.kind == SurrogateKind::SequenceRatio
                                 ? seq_ratio
                                 : token_ratio(policy, r, t, p);
        objective += w * surrogate_value(surr, a, ratio);
        if (!want_penalty) continue;
        std::vector<double> q = policy::row_distribution(reference, row);
        double d;
        if (exact) {
          d = div.kind == Kind::SRKL ? divergence::srkl_value(p, q, div.alpha)
                                     : divergence::rkl_value(p, q);
        } else {
          const std::size_t ti = static_cast<std::size_t>(r.response[t]);
          d = divergence::sampled_token_penalty(div, p[ti], q[ti]);
        }
        objective -= w * div.beta * d;
      }
    }
  }
  return objective;
}

std::string report_jsonl_line(const TrainStepReport& report) {
  nlohmann::ordered_json j;
  j["step"] = report.step;
  j["mean_reward"] = report.mean_reward;
  j["mean_advantage_magnitude"] = report.mean_advantage_magnitude;
  j["surrogate_term"] = report.surrogate_term;
  j["penalty_term"] = report.penalty_term;
  j["grad_norm"] = report.grad_norm;
  j["entropy"] = report.entropy;
  return j.dump();
}

std::pair<PolicySnapshot, TrainStepReport> train_step(
    const PolicySnapshot& policy, const PolicySnapshot& reference,
    const std::vector<RolloutGroup>& groups, const DivergenceSpec& div,
    const SurrogateSpec& surr, double learning_rate, std::int64_t step) {
  if (!(learning_rate > 0.0)) throw DomainError("train_step: learning_rate <= 0");
  div.validate();
  surr.validate();
  check_batch(policy, reference, groups, true);

  BatchGradient bg = batch_gradient(policy, reference, groups, div, surr);
  const bool want_penalty = div.kind != Kind::None && div.beta > 0.0;

  // Total ascent direction; the penalty path is skipped wholesale when it is
  // off so beta = 0 and kind = None update bitwise identically.
  SparseGrad total = bg.surrogate;
  if (want_penalty) {
    for (const auto& [row, vec] : bg.penalty) {
      auto [it, fresh] = total.try_emplace(row, vec.size(), 0.0);
      for (std::size_t i = 0; i < vec.size(); ++i)
        it->second[i] -= div.beta * vec[i];
    }
  }

  double norm_sq = 0.0;
  for (const auto& [row, vec] : total)
    for (double v : vec) norm_sq += v * v;

  PolicySnapshot next = policy;
  next.version = policy.version + 1;
  const int vs = policy.config.vocab_size;
  for (const auto& [row, vec] : total)
    for (int i = 0; i < vs; ++i)
      next.logits[static_cast<std::size_t>(row * vs + i)] +=
          learning_rate * vec[static_cast<std::size_t>(i)];

  TrainStepReport report;
  report.step = step;
  std::int64_t n = 0;
  double reward_sum = 0.0;
  std::vector<policy::Rollout> all;
  for (const RolloutGroup& g : groups)
    for (const policy::Rollout& r : g.rollouts) {
      reward_sum += r.reward;
      ++n;
      all.push_back(r);
    }
  report.mean_reward = reward_sum / static_cast<double>(n);
  report.mean_advantage_magnitude = bg.mean_advantage_magnitude;
  report.surrogate_term = bg.surrogate_term;
  report.penalty_term = bg.penalty_term;
  report.grad_norm = std::sqrt(norm_sq);
  report.entropy = policy::token_entropy(policy, all);
  return {std::move(next), report};
}

}  // namespace rftlab::rft
