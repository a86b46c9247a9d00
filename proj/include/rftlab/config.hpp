#ifndef RFTLAB_CONFIG_HPP
#define RFTLAB_CONFIG_HPP

#include <cstdint>
#include <string>

#include "rftlab/divergence.hpp"
#include "rftlab/policy.hpp"
#include "rftlab/rft.hpp"
#include "rftlab/tasks.hpp"

namespace rftlab::cli {

// Flat key=value run configuration. Unset keys keep their defaults below.
struct RunConfig {
  policy::PolicyConfig model;           // model.*
  divergence::DivergenceSpec div;       // divergence.*
  rft::SurrogateSpec surrogate;         // surrogate.*

  int group_size = 8;                   // train.group_size
  int prompts_per_step = 8;             // train.prompts_per_step
  double learning_rate = 0.1;           // train.learning_rate
  int steps = 500;                      // train.steps

  int eval_n_samples = 10;              // eval.n_samples
  int eval_m_bins = 10;                 // eval.m_bins
  int eval_every = 50;                  // eval.every
  int eval_accuracy_prompts = 256;      // eval.accuracy_prompts

  tasks::TaskKind task_kind = tasks::TaskKind::ModularSum;  // task.kind
  int task_num_operands = 2;            // task.num_operands
  int task_num_probes = 200;            // task.num_probes, 0 disables probes
  double task_gold_bias = 1.0;          // task.gold_bias

  std::uint64_t seed = 1;               // seed
  std::string out_dir = "run_out";      // out_dir

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// Parses "key = value" lines; '#' starts a comment, blank lines are skipped.
// Unknown keys and malformed values throw DomainError.
RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// Applies one "key=value" override in place.
void apply_override(RunConfig& config, const std::string& assignment);

// Canonical text form listing every key; parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& config);

}  // namespace rftlab::cli

#endif
