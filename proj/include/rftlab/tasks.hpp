#ifndef RFTLAB_TASKS_HPP
#define RFTLAB_TASKS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rftlab/calibration.hpp"
#include "rftlab/policy.hpp"
#include "rftlab/rng.hpp"

namespace rftlab::tasks {

enum class TaskKind { ModularSum, FactProbe };

struct Probe {
  std::vector<int> prompt;
  int gold = 0;
};

// ModularSum: prompts are num_operands digit tokens (ids 0..9), the target is
// their sum mod 10. FactProbe: a frozen table of marker-prefixed prompts with
// fixed gold answers, used to measure how training on something else moves
// held-out behavior. Probe prompts deliberately end in the same digit windows
// ModularSum trains on (that is the coupling under study) while the prompts
// themselves can never be generated by ModularSum.
struct TaskSpec {
  TaskKind kind = TaskKind::ModularSum;
  int vocab_size = 16;
  int num_operands = 2;
  std::uint64_t seed = 0;
  std::vector<Probe> probes;              // FactProbe only
  std::map<std::vector<int>, int> table;  // prompt -> gold, FactProbe only

  void validate() const;
};

TaskSpec make_modular_sum(int vocab_size, int num_operands, std::uint64_t seed);

// Builds num_probes probes of shape [marker, d_1..d_k] where k = num_operands,
// markers are non-digit non-eos tokens and golds are digits chosen per digit
// suffix, never equal to the suffix's mod-10 sum. Probes sharing a suffix
// share a gold.
TaskSpec make_fact_probe(int vocab_size, int eos_token, int num_operands,
                         int num_probes, std::uint64_t seed);

// Throws if any probe prompt could have been generated by the training task.
void check_disjoint(const TaskSpec& train, const TaskSpec& probe);

std::vector<int> generate_prompt(const TaskSpec& spec, Rng& rng);

struct RewardOutcome {
  double reward = 0.0;  // +1 or -1
  std::string extracted_answer;
  std::string gold_answer;
};

// Answer = last non-eos token of the response, rendered in decimal; a
// response containing only eos yields the empty answer, which never matches.
std::string extract_answer(const policy::Rollout& rollout, int eos_token);

// Throws EmptyResponse for an empty response, DomainError for a FactProbe
// prompt absent from the table.
RewardOutcome score(const TaskSpec& spec, const policy::Rollout& rollout,
                    int eos_token);

// Adds `gold_bias` to the gold answer's logit at each probe's answer context,
// giving a reference that leans toward the right fact before any training.
void apply_probe_bias(policy::PolicySnapshot& snapshot, const TaskSpec& probe,
                      double gold_bias);

// Samples n_samples answers per probe at temperature 1 and bins the
// majority-vote confidences. rng_seed fixes the evaluation stream.
calibration::CalibrationReport eval_calibration(
    const policy::PolicySnapshot& policy,
    const policy::PolicySnapshot& reference, const TaskSpec& probe,
    int n_samples, int m_bins, std::uint64_t rng_seed);

// Fraction of single-rollout successes over n_prompts fresh prompts.
double eval_accuracy(const policy::PolicySnapshot& policy,
                     const policy::PolicySnapshot& reference,
                     const TaskSpec& task, int n_prompts,
                     std::uint64_t rng_seed);

// One probe per line: {"prompt":[...],"gold":N}.
std::string probes_jsonl(const TaskSpec& probe);
void write_probes_jsonl_file(const TaskSpec& probe, const std::string& path);

}  // namespace rftlab::tasks

#endif
