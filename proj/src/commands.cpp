#include "rftlab/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rftlab/calibration.hpp"
#include "rftlab/rng.hpp"
#include "rftlab/tasks.hpp"

namespace rftlab::cli {

namespace {

namespace fs = std::filesystem;

struct RunPieces {
  tasks::TaskSpec train_task;
  tasks::TaskSpec probe;  // valid only when has_probes
  bool has_probes = false;
  policy::PolicySnapshot reference;
  policy::PolicySnapshot start;
};

RunPieces build_run(const RunConfig& config) {
  RunPieces pieces;
  if (config.task_kind == tasks::TaskKind::FactProbe) {
    if (config.task_num_probes < 1)
      throw DomainError("train: task.kind=fact_probe needs task.num_probes >= 1");
    pieces.train_task = tasks::make_fact_probe(
        config.model.vocab_size, config.model.eos_token,
        config.task_num_operands, config.task_num_probes, config.seed);
    pieces.probe = pieces.train_task;
    pieces.has_probes = true;
  } else {
    pieces.train_task = tasks::make_modular_sum(
        config.model.vocab_size, config.task_num_operands, config.seed);
    if (config.task_num_probes > 0) {
      pieces.probe = tasks::make_fact_probe(
          config.model.vocab_size, config.model.eos_token,
          config.task_num_operands, config.task_num_probes, config.seed);
      tasks::check_disjoint(pieces.train_task, pieces.probe);
      pieces.has_probes = true;
    }
  }
  pieces.reference = policy::make_uniform_policy(config.model);
  if (pieces.has_probes)
    tasks::apply_probe_bias(pieces.reference, pieces.probe,
                            config.task_gold_bias);
  pieces.start = pieces.reference;  // training departs from the reference
  return pieces;
}

std::vector<rft::RolloutGroup> sample_batch(const RunConfig& config,
                                            const RunPieces& pieces,
                                            const policy::PolicySnapshot& policy,
                                            std::int64_t step) {
  const bool store_full =
      config.div.estimator == divergence::Estimator::ExactFullVocab;
  std::vector<rft::RolloutGroup> groups;
  groups.reserve(static_cast<std::size_t>(config.prompts_per_step));
  for (int p = 0; p < config.prompts_per_step; ++p) {
    Rng prompt_rng(derive_seed(config.seed, StreamPurpose::PromptGen,
                               static_cast<std::uint64_t>(step),
                               static_cast<std::uint64_t>(p)));
    std::vector<int> prompt = tasks::generate_prompt(pieces.train_task, prompt_rng);
    std::vector<policy::Rollout> rollouts;
    rollouts.reserve(static_cast<std::size_t>(config.group_size));
    for (int g = 0; g < config.group_size; ++g) {
      Rng rng(derive_seed(config.seed, StreamPurpose::RolloutSample,
                          static_cast<std::uint64_t>(step),
                          static_cast<std::uint64_t>(p),
                          static_cast<std::uint64_t>(g)));
      policy::Rollout r =
          policy::sample_rollout(policy, pieces.reference, prompt, rng, store_full);
      r.reward =
          tasks::score(pieces.train_task, r, config.model.eos_token).reward;
      rollouts.push_back(std::move(r));
    }
    groups.push_back(rft::make_group(prompt, std::move(rollouts)));
  }
  return groups;
}

double probe_accuracy(const calibration::CalibrationReport& report) {
  double hits = 0.0;
  for (const calibration::BinStat& b : report.bins)
    hits += static_cast<double>(b.count) * b.mean_accuracy;
  return hits / static_cast<double>(report.n_questions);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

policy::SparseGrad total_gradient(const rft::BatchGradient& bg,
                                  const divergence::DivergenceSpec& div) {
  policy::SparseGrad total = bg.surrogate;
  if (div.kind != divergence::Kind::None && div.beta > 0.0) {
    for (const auto& [row, vec] : bg.penalty) {
      auto [it, fresh] = total.try_emplace(row, vec.size(), 0.0);
      for (std::size_t i = 0; i < vec.size(); ++i)
        it->second[i] -= div.beta * vec[i];
    }
  }
  return total;
}

}  // namespace

TrainResult cmd_train(const RunConfig& config) {
  config.validate();
  RunPieces pieces = build_run(config);

  const bool writing = !config.out_dir.empty();
  std::ofstream metrics;
  if (writing) {
    fs::create_directories(config.out_dir);
    write_text_file(config.out_dir + "/config.txt", emit_config(config));
    if (pieces.has_probes)
      tasks::write_probes_jsonl_file(pieces.probe,
                                     config.out_dir + "/factprobe.jsonl");
    metrics.open(config.out_dir + "/metrics.jsonl", std::ios::binary);
    if (!metrics) throw IoError("cannot open metrics.jsonl for write");
  }

  TrainResult result;
  if (pieces.has_probes) {
    calibration::CalibrationReport base = tasks::eval_calibration(
        pieces.start, pieces.reference, pieces.probe, config.eval_n_samples,
        config.eval_m_bins,
        derive_seed(config.seed, StreamPurpose::EvalCalibration, 0));
    result.base_ece = base.ece;
  }

  policy::PolicySnapshot current = pieces.start;
  for (int step = 1; step <= config.steps; ++step) {
    std::vector<rft::RolloutGroup> groups =
        sample_batch(config, pieces, current, step);
    auto [next, report] =
        rft::train_step(current, pieces.reference, groups, config.div,
                        config.surrogate, config.learning_rate, step);
    current = std::move(next);
    result.reports.push_back(report);

    nlohmann::ordered_json line;
    line["step"] = report.step;
    line["mean_reward"] = report.mean_reward;
    line["mean_advantage_magnitude"] = report.mean_advantage_magnitude;
    line["surrogate_term"] = report.surrogate_term;
    line["penalty_term"] = report.penalty_term;
    line["grad_norm"] = report.grad_norm;
    line["entropy"] = report.entropy;

    const bool eval_now = step % config.eval_every == 0 || step == config.steps;
    if (eval_now) {
      double acc = tasks::eval_accuracy(
          current, pieces.reference, pieces.train_task,
          config.eval_accuracy_prompts,
          derive_seed(config.seed, StreamPurpose::EvalAccuracy,
                      static_cast<std::uint64_t>(step)));
      result.final_accuracy = acc;
      line["accuracy_train_task"] = acc;
      if (pieces.has_probes) {
        calibration::CalibrationReport rep = tasks::eval_calibration(
            current, pieces.reference, pieces.probe, config.eval_n_samples,
            config.eval_m_bins,
            derive_seed(config.seed, StreamPurpose::EvalCalibration,
                        static_cast<std::uint64_t>(step)));
        line["accuracy_probe"] = probe_accuracy(rep);
        line["ece_probe"] = rep.ece;
        result.final_ece = rep.ece;
      }
    }
    if (writing) metrics << line.dump() << "\n";
    result.final_entropy = report.entropy;
  }

  if (writing) {
    policy::save_checkpoint_file(current, config.out_dir + "/checkpoint_final.txt");
    if (!metrics) throw IoError("metrics.jsonl write failed");
  }
  result.final_policy = std::move(current);
  return result;
}

void cmd_sweep_alpha(const RunConfig& base, const std::vector<double>& alphas) {
  base.validate();
  if (alphas.empty()) throw EmptyInput("sweep-alpha: no alpha values");
  if (base.out_dir.empty())
    throw DomainError("sweep-alpha: out_dir must be set");

  std::vector<double> todo;
  std::set<double> seen;
  for (double a : alphas) {
    if (!(a >= 0.0 && a < 1.0))
      throw DomainError("sweep-alpha: alpha must lie in [0, 1)");
    if (!seen.insert(a).second) {
      std::cerr << "sweep-alpha: duplicate alpha " << a << " skipped\n";
      continue;
    }
    todo.push_back(a);
  }

  fs::create_directories(base.out_dir);
  std::string csv = "alpha,final_accuracy,final_ece,final_entropy\n";
  char buf[160];
  for (double a : todo) {
    RunConfig sub = base;
    if (a == 0.0) {
      sub.div.kind = divergence::Kind::RKL;
    } else {
      sub.div.kind = divergence::Kind::SRKL;
      sub.div.alpha = a;
    }
    std::snprintf(buf, sizeof(buf), "%g", a);
    sub.out_dir = base.out_dir + "/alpha_" + buf;
    TrainResult r = cmd_train(sub);
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%.12g\n", a,
                  r.final_accuracy, r.final_ece, r.final_entropy);
    csv += buf;
  }
  write_text_file(base.out_dir + "/summary.csv", csv);
}

void cmd_landscape(double alpha, const divergence::GridSpec& grid,
                   const std::string& out_path) {
  std::vector<divergence::LandscapePoint> points =
      divergence::penalty_landscape(alpha, grid);
  write_text_file(out_path, divergence::landscape_csv(points));
}

GradcheckResult cmd_gradcheck(const RunConfig& config, int n_params,
                              bool corrupt_for_test) {
  config.validate();
  if (config.div.estimator != divergence::Estimator::ExactFullVocab)
    throw DomainError("gradcheck: requires divergence.estimator = exact");
  if (n_params < 1) throw DomainError("gradcheck: n_params must be >= 1");

  RunPieces pieces = build_run(config);
  // Noise separates the policy from the reference so ratios leave 1.
  policy::PolicySnapshot current = pieces.start;
  Rng noise(derive_seed(config.seed, StreamPurpose::InitNoise));
  for (double& z : current.logits) z += noise.next_range(-0.7, 0.7);

  std::vector<rft::RolloutGroup> groups =
      sample_batch(config, pieces, current, 1);
  rft::BatchGradient bg = rft::batch_gradient(current, pieces.reference, groups,
                                              config.div, config.surrogate);
  policy::SparseGrad total = total_gradient(bg, config.div);

  std::set<std::int64_t> visited;
  for (const rft::RolloutGroup& g : groups)
    for (const policy::Rollout& r : g.rollouts)
      for (std::int64_t row : r.context_rows) visited.insert(row);
  std::vector<std::int64_t> rows(visited.begin(), visited.end());

  Rng pick(derive_seed(config.seed, StreamPurpose::InitNoise, 0x9c));
  const int vs = config.model.vocab_size;
  const double h = 1e-6;
  GradcheckResult result;
  result.n_checked = n_params;
  for (int k = 0; k < n_params; ++k) {
    std::int64_t row = rows[pick.next_below(rows.size())];
    int col = static_cast<int>(pick.next_below(static_cast<std::uint64_t>(vs)));
    std::size_t idx = static_cast<std::size_t>(row * vs + col);

    policy::PolicySnapshot plus = current, minus = current;
    plus.logits[idx] += h;
    minus.logits[idx] -= h;
    double fd = (rft::batch_objective(plus, pieces.reference, groups,
                                      config.div, config.surrogate) -
                 rft::batch_objective(minus, pieces.reference, groups,
                                      config.div, config.surrogate)) /
                (2.0 * h);

    double analytic = 0.0;
    auto it = total.find(row);
    if (it != total.end()) analytic = it->second[static_cast<std::size_t>(col)];
    if (corrupt_for_test) analytic *= 1.05;

    // Central differences carry rounding noise near eps*|J|/(2h) ~ 1e-10, so
    // entries below the floor are compared absolutely, not relatively.
    double rel = std::abs(analytic - fd) /
                 std::max({std::abs(analytic), std::abs(fd), 1e-6});
    if (rel > result.max_rel_error) result.max_rel_error = rel;
  }
  result.pass = result.max_rel_error <= 1e-4;
  return result;
}

std::string cmd_fixed_point(const std::string& in_path,
                            const std::string& out_path) {
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw IoError("fixed-point: cannot open " + in_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("fixed-point: bad JSON: ") + e.what());
  }
  for (const char* key : {"q_values", "p_ref", "beta", "alpha"})
    if (!j.contains(key))
      throw IoError(std::string("fixed-point: missing key ") + key);

  fixed_point::RegularizedProblem problem;
  try {
    problem.q_values = j["q_values"].get<std::vector<double>>();
    problem.p_ref = j["p_ref"].get<std::vector<double>>();
    problem.beta = j["beta"].get<double>();
    problem.alpha = j["alpha"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("fixed-point: bad field type: ") + e.what());
  }

  fixed_point::FixedPointSolution sol = fixed_point::solve_optimal_policy(problem);
  nlohmann::ordered_json out;
  out["lambda"] = sol.lambda;
  out["ratios"] = sol.ratios;
  out["policy"] = sol.policy;
  out["residual"] = sol.residual;
  std::string text = out.dump(2) + "\n";
  if (!out_path.empty()) write_text_file(out_path, text);
  return text;
}

double cmd_eval_ece(const std::string& in_path, int m_bins,
                    const std::string& out_csv_path) {
  std::vector<calibration::CalSample> samples =
      calibration::read_samples_jsonl_file(in_path);
  calibration::CalibrationReport report =
      calibration::compute_ece(samples, m_bins);
  if (!out_csv_path.empty())
    write_text_file(out_csv_path, calibration::reliability_csv(report));
  return report.ece;
}

}  // namespace rftlab::cli
