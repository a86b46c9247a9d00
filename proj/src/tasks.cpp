#include "rftlab/tasks.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace rftlab::tasks {

namespace {

constexpr int kDigits = 10;

bool all_digits(const std::vector<int>& tokens) {
  for (int t : tokens)
    if (t < 0 || t >= kDigits) return false;
  return true;
}

int mod_sum(const std::vector<int>& digits) {
  int s = 0;
  for (int d : digits) s += d;
  return s % kDigits;
}

}  // namespace

void TaskSpec::validate() const {
  if (vocab_size < kDigits + 1)
    throw DomainError("task: vocab_size must cover the ten digits plus eos");
  if (num_operands < 1 || num_operands > 3)
    throw DomainError("task: num_operands must lie in [1, 3]");
  if (kind == TaskKind::FactProbe) {
    if (probes.empty()) throw EmptyInput("task: fact probe with no probes");
    for (const Probe& p : probes) {
      if (p.prompt.empty()) throw EmptyInput("task: probe with empty prompt");
      for (int t : p.prompt)
        if (t < 0 || t >= vocab_size)
          throw DomainError("task: probe token outside vocabulary");
      if (p.gold < 0 || p.gold >= vocab_size)
        throw DomainError("task: probe gold outside vocabulary");
    }
  }
}

TaskSpec make_modular_sum(int vocab_size, int num_operands,
                          std::uint64_t seed) {
  TaskSpec spec;
  spec.kind = TaskKind::ModularSum;
  spec.vocab_size = vocab_size;
  spec.num_operands = num_operands;
  spec.seed = seed;
  spec.validate();
  return spec;
}

TaskSpec make_fact_probe(int vocab_size, int eos_token, int num_operands,
                         int num_probes, std::uint64_t seed) {
  if (num_probes < 1) throw DomainError("make_fact_probe: need probes");
  TaskSpec spec;
  spec.kind = TaskKind::FactProbe;
  spec.vocab_size = vocab_size;
  spec.num_operands = num_operands;
  spec.seed = seed;

  std::vector<int> markers;
  for (int t = kDigits; t < vocab_size; ++t)
    if (t != eos_token) markers.push_back(t);
  int suffixes = 1;
  for (int i = 0; i < num_operands; ++i) suffixes *= kDigits;
  if (num_probes > static_cast<int>(markers.size()) * suffixes)
    throw DomainError("make_fact_probe: not enough marker tokens for num_probes");

  // Gold per digit suffix, never the suffix's own mod sum so that training
  // success on ModularSum cannot masquerade as probe accuracy.
  std::vector<int> golds(static_cast<std::size_t>(suffixes));
  for (int s = 0; s < suffixes; ++s) {
    Rng rng(derive_seed(seed, StreamPurpose::TaskTable, static_cast<std::uint64_t>(s)));
    int avoid = 0, x = s;
    std::vector<int> digits(static_cast<std::size_t>(num_operands));
    for (int i = num_operands - 1; i >= 0; --i) {
      digits[static_cast<std::size_t>(i)] = x % kDigits;
      x /= kDigits;
    }
    avoid = mod_sum(digits);
    golds[static_cast<std::size_t>(s)] =
        (avoid + 1 + static_cast<int>(rng.next_below(kDigits - 1))) % kDigits;
  }

  for (int p = 0; p < num_probes; ++p) {
    Probe probe;
    int suffix = p % suffixes;
    probe.prompt.push_back(markers[static_cast<std::size_t>(p / suffixes)]);
    int x = suffix;
    std::vector<int> digits(static_cast<std::size_t>(num_operands));
    for (int i = num_operands - 1; i >= 0; --i) {
      digits[static_cast<std::size_t>(i)] = x % kDigits;
      x /= kDigits;
    }
    probe.prompt.insert(probe.prompt.end(), digits.begin(), digits.end());
    probe.gold = golds[static_cast<std::size_t>(suffix)];
    spec.table[probe.prompt] = probe.gold;
    spec.probes.push_back(std::move(probe));
  }
  spec.validate();
  return spec;
}

void check_disjoint(const TaskSpec& train, const TaskSpec& probe) {
  if (train.kind != TaskKind::ModularSum || probe.kind != TaskKind::FactProbe)
    throw DomainError("check_disjoint: expects a ModularSum/FactProbe pair");
  for (const Probe& p : probe.probes)
    if (static_cast<int>(p.prompt.size()) == train.num_operands &&
        all_digits(p.prompt))
      throw DomainError("check_disjoint: probe prompt collides with task prompts");
}

std::vector<int> generate_prompt(const TaskSpec& spec, Rng& rng) {
  spec.validate();
  if (spec.kind == TaskKind::ModularSum) {
    std::vector<int> prompt(static_cast<std::size_t>(spec.num_operands));
    for (int& d : prompt) d = static_cast<int>(rng.next_below(kDigits));
    return prompt;
  }
  return spec.probes[rng.next_below(spec.probes.size())].prompt;
}

std::string extract_answer(const policy::Rollout& rollout, int eos_token) {
  for (auto it = rollout.response.rbegin(); it != rollout.response.rend(); ++it)
    if (*it != eos_token) return std::to_string(*it);
  return "";
}

RewardOutcome score(const TaskSpec& spec, const policy::Rollout& rollout,
                    int eos_token) {
  spec.validate();
  if (rollout.response.empty()) throw EmptyResponse("score: empty response");

  int gold;
  if (spec.kind == TaskKind::ModularSum) {
    if (!all_digits(rollout.prompt))
      throw DomainError("score: ModularSum prompt must be digits");
    gold = mod_sum(rollout.prompt);
  } else {
    auto it = spec.table.find(rollout.prompt);
    if (it == spec.table.end())
      throw DomainError("score: prompt not in probe table");
    gold = it->second;
  }

  RewardOutcome out;
  out.gold_answer = std::to_string(gold);
  out.extracted_answer = extract_answer(rollout, eos_token);
  out.reward = out.extracted_answer == out.gold_answer ? 1.0 : -1.0;
  return out;
}

void apply_probe_bias(policy::PolicySnapshot& snapshot, const TaskSpec& probe,
                      double gold_bias) {
  probe.validate();
  if (probe.kind != TaskKind::FactProbe)
    throw DomainError("apply_probe_bias: needs a FactProbe spec");
  const int vs = snapshot.config.vocab_size;
  std::set<std::int64_t> done;  // probes sharing an answer row get one bias
  for (const Probe& p : probe.probes) {
    std::int64_t row = policy::context_row(snapshot.config, p.prompt);
    if (!done.insert(row).second) continue;
    snapshot.logits[static_cast<std::size_t>(row * vs + p.gold)] += gold_bias;
  }
}

calibration::CalibrationReport eval_calibration(
    const policy::PolicySnapshot& policy,
    const policy::PolicySnapshot& reference, const TaskSpec& probe,
    int n_samples, int m_bins, std::uint64_t rng_seed) {
  probe.validate();
  if (probe.kind != TaskKind::FactProbe)
    throw DomainError("eval_calibration: needs a FactProbe spec");
  if (n_samples < 1) throw DomainError("eval_calibration: n_samples < 1");

  std::vector<calibration::CalSample> samples;
  samples.reserve(probe.probes.size());
  for (std::size_t i = 0; i < probe.probes.size(); ++i) {
    const Probe& p = probe.probes[i];
    calibration::CalSample s;
    s.question_id = "probe_" + std::to_string(i);
    s.gold = std::to_string(p.gold);
    for (int k = 0; k < n_samples; ++k) {
      Rng rng(derive_seed(rng_seed, StreamPurpose::EvalCalibration,
                          static_cast<std::uint64_t>(i),
                          static_cast<std::uint64_t>(k)));
      policy::Rollout r =
          policy::sample_rollout(policy, reference, p.prompt, rng, false);
      s.answers.push_back(extract_answer(r, policy.config.eos_token));
    }
    samples.push_back(std::move(s));
  }
  return calibration::compute_ece(samples, m_bins);
}

double eval_accuracy(const policy::PolicySnapshot& policy,
                     const policy::PolicySnapshot& reference,
                     const TaskSpec& task, int n_prompts,
                     std::uint64_t rng_seed) {
  task.validate();
  if (n_prompts < 1) throw DomainError("eval_accuracy: n_prompts < 1");
  double hits = 0.0;
  for (int i = 0; i < n_prompts; ++i) {
    Rng rng(derive_seed(rng_seed, StreamPurpose::EvalAccuracy,
                        static_cast<std::uint64_t>(i)));
    std::vector<int> prompt = generate_prompt(task, rng);
    policy::Rollout r =
        policy::sample_rollout(policy, reference, prompt, rng, false);
    if (score(task, r, policy.config.eos_token).reward > 0.0) hits += 1.0;
  }
  return hits / static_cast<double>(n_prompts);
}

std::string probes_jsonl(const TaskSpec& probe) {
  if (probe.kind != TaskKind::FactProbe)
    throw DomainError("probes_jsonl: needs a FactProbe spec");
  std::string out;
  for (const Probe& p : probe.probes) {
    nlohmann::ordered_json j;
    j["prompt"] = p.prompt;
    j["gold"] = p.gold;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_probes_jsonl_file(const TaskSpec& probe, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("probes: cannot open " + path);
  out << probes_jsonl(probe);
  if (!out) throw IoError("probes: write failed " + path);
}

}  // namespace rftlab::tasks
