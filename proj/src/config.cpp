#include "rftlab/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rftlab::cli {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& key, const std::string& value) {
  char* end = nullptr;
  long long v = std::strtoll(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0')
    throw DomainError("config: bad integer for " + key + ": '" + value + "'");
  return v;
}

double parse_real(const std::string& key, const std::string& value) {
  char* end = nullptr;
  double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0' || !std::isfinite(v))
    throw DomainError("config: bad number for " + key + ": '" + value + "'");
  return v;
}

divergence::Kind parse_kind(const std::string& value) {
  if (value == "none") return divergence::Kind::None;
  if (value == "rkl") return divergence::Kind::RKL;
  if (value == "srkl") return divergence::Kind::SRKL;
  throw DomainError("config: divergence.kind must be none|rkl|srkl");
}

const char* kind_name(divergence::Kind k) {
  switch (k) {
    case divergence::Kind::None: return "none";
    case divergence::Kind::RKL: return "rkl";
    default: return "srkl";
  }
}

divergence::Estimator parse_estimator(const std::string& value) {
  if (value == "exact") return divergence::Estimator::ExactFullVocab;
  if (value == "sampled") return divergence::Estimator::SampledToken;
  throw DomainError("config: divergence.estimator must be exact|sampled");
}

rft::SurrogateKind parse_surrogate_kind(const std::string& value) {
  if (value == "grpo_token") return rft::SurrogateKind::GRPOToken;
  if (value == "sequence_ratio") return rft::SurrogateKind::SequenceRatio;
  throw DomainError("config: surrogate.kind must be grpo_token|sequence_ratio");
}

rft::MaskMode parse_mask(const std::string& value) {
  if (value == "full") return rft::MaskMode::Full;
  if (value == "positive_only") return rft::MaskMode::PositiveOnly;
  if (value == "negative_only") return rft::MaskMode::NegativeOnly;
  throw DomainError("config: surrogate.mask_mode must be full|positive_only|negative_only");
}

tasks::TaskKind parse_task_kind(const std::string& value) {
  if (value == "modular_sum") return tasks::TaskKind::ModularSum;
  if (value == "fact_probe") return tasks::TaskKind::FactProbe;
  throw DomainError("config: task.kind must be modular_sum|fact_probe");
}

void set_key(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "model.vocab_size")
    c.model.vocab_size = static_cast<int>(parse_int(key, value));
  else if (key == "model.context_order")
    c.model.context_order = static_cast<int>(parse_int(key, value));
  else if (key == "model.max_len")
    c.model.max_len = static_cast<int>(parse_int(key, value));
  else if (key == "model.eos_token")
    c.model.eos_token = static_cast<int>(parse_int(key, value));
  else if (key == "divergence.kind")
    c.div.kind = parse_kind(value);
  else if (key == "divergence.alpha")
    c.div.alpha = parse_real(key, value);
  else if (key == "divergence.beta")
    c.div.beta = parse_real(key, value);
  else if (key == "divergence.estimator")
    c.div.estimator = parse_estimator(value);
  else if (key == "surrogate.kind")
    c.surrogate.kind = parse_surrogate_kind(value);
  else if (key == "surrogate.clip_eps")
    c.surrogate.clip_eps_low = c.surrogate.clip_eps_high = parse_real(key, value);
  else if (key == "surrogate.clip_eps_low")
    c.surrogate.clip_eps_low = parse_real(key, value);
  else if (key == "surrogate.clip_eps_high")
    c.surrogate.clip_eps_high = parse_real(key, value);
  else if (key == "surrogate.mask_mode")
    c.surrogate.mask = parse_mask(value);
  else if (key == "train.group_size")
    c.group_size = static_cast<int>(parse_int(key, value));
  else if (key == "train.prompts_per_step")
    c.prompts_per_step = static_cast<int>(parse_int(key, value));
  else if (key == "train.learning_rate")
    c.learning_rate = parse_real(key, value);
  else if (key == "train.steps")
    c.steps = static_cast<int>(parse_int(key, value));
  else if (key == "eval.n_samples")
    c.eval_n_samples = static_cast<int>(parse_int(key, value));
  else if (key == "eval.m_bins")
    c.eval_m_bins = static_cast<int>(parse_int(key, value));
  else if (key == "eval.every")
    c.eval_every = static_cast<int>(parse_int(key, value));
  else if (key == "eval.accuracy_prompts")
    c.eval_accuracy_prompts = static_cast<int>(parse_int(key, value));
  else if (key == "task.kind")
    c.task_kind = parse_task_kind(value);
  else if (key == "task.num_operands")
    c.task_num_operands = static_cast<int>(parse_int(key, value));
  else if (key == "task.num_probes")
    c.task_num_probes = static_cast<int>(parse_int(key, value));
  else if (key == "task.gold_bias")
    c.task_gold_bias = parse_real(key, value);
  else if (key == "seed")
    c.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "out_dir")
    c.out_dir = value;
  else
    throw DomainError("config: unknown key '" + key + "'");
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  div.validate();
  surrogate.validate();
  if (group_size < 2) throw DomainError("config: train.group_size must be >= 2");
  if (prompts_per_step < 1)
    throw DomainError("config: train.prompts_per_step must be >= 1");
  if (!(learning_rate > 0.0))
    throw DomainError("config: train.learning_rate must be > 0");
  if (steps < 1) throw DomainError("config: train.steps must be >= 1");
  if (eval_n_samples < 1) throw DomainError("config: eval.n_samples must be >= 1");
  if (eval_m_bins < 1) throw DomainError("config: eval.m_bins must be >= 1");
  if (eval_every < 1) throw DomainError("config: eval.every must be >= 1");
  if (eval_accuracy_prompts < 1)
    throw DomainError("config: eval.accuracy_prompts must be >= 1");
  if (task_num_operands < 1 || task_num_operands > 3)
    throw DomainError("config: task.num_operands must lie in [1, 3]");
  if (task_num_probes < 0)
    throw DomainError("config: task.num_probes must be >= 0");
  if (!std::isfinite(task_gold_bias))
    throw DomainError("config: task.gold_bias must be finite");
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw DomainError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    set_key(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_override(RunConfig& config, const std::string& assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw DomainError("override must look like key=value: '" + assignment + "'");
  set_key(config, trim(assignment.substr(0, eq)),
          trim(assignment.substr(eq + 1)));
}

std::string emit_config(const RunConfig& c) {
  std::ostringstream out;
  char buf[64];
  auto real = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "model.vocab_size = " << c.model.vocab_size << "\n";
  out << "model.context_order = " << c.model.context_order << "\n";
  out << "model.max_len = " << c.model.max_len << "\n";
  out << "model.eos_token = " << c.model.eos_token << "\n";
  out << "divergence.kind = " << kind_name(c.div.kind) << "\n";
  out << "divergence.alpha = " << real(c.div.alpha) << "\n";
  out << "divergence.beta = " << real(c.div.beta) << "\n";
  out << "divergence.estimator = "
      << (c.div.estimator == divergence::Estimator::ExactFullVocab ? "exact"
                                                                   : "sampled")
      << "\n";
  out << "surrogate.kind = "
      << (c.surrogate.kind == rft::SurrogateKind::GRPOToken ? "grpo_token"
                                                            : "sequence_ratio")
      << "\n";
  out << "surrogate.clip_eps_low = " << real(c.surrogate.clip_eps_low) << "\n";
  out << "surrogate.clip_eps_high = " << real(c.surrogate.clip_eps_high) << "\n";
  const char* mask = c.surrogate.mask == rft::MaskMode::Full ? "full"
                     : c.surrogate.mask == rft::MaskMode::PositiveOnly
                         ? "positive_only"
                         : "negative_only";
  out << "surrogate.mask_mode = " << mask << "\n";
  out << "train.group_size = " << c.group_size << "\n";
  out << "train.prompts_per_step = " << c.prompts_per_step << "\n";
  out << "train.learning_rate = " << real(c.learning_rate) << "\n";
  out << "train.steps = " << c.steps << "\n";
  out << "eval.n_samples = " << c.eval_n_samples << "\n";
  out << "eval.m_bins = " << c.eval_m_bins << "\n";
  out << "eval.every = " << c.eval_every << "\n";
  out << "eval.accuracy_prompts = " << c.eval_accuracy_prompts << "\n";
  out << "task.kind = "
      << (c.task_kind == tasks::TaskKind::ModularSum ? "modular_sum"
                                                     : "fact_probe")
      << "\n";
  out << "task.num_operands = " << c.task_num_operands << "\n";
  out << "task.num_probes = " << c.task_num_probes << "\n";
  out << "task.gold_bias = " << real(c.task_gold_bias) << "\n";
  out << "seed = " << c.seed << "\n";
  out << "out_dir = " << c.out_dir << "\n";
  return out.str();
}

}  // namespace rftlab::cli
