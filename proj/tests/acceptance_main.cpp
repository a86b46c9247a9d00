// Acceptance harness: one line per criterion, nonzero exit on any failure.
// Tolerances and run shapes are pinned here on purpose; loosening them is a
// behavior change, not a cleanup.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rftlab/calibration.hpp"
#include "rftlab/commands.hpp"
#include "rftlab/divergence.hpp"
#include "rftlab/fixed_point.hpp"
#include "rftlab/policy.hpp"
#include "rftlab/rft.hpp"
#include "rftlab/rng.hpp"

using rftlab::Rng;
namespace calibration = rftlab::calibration;
namespace cli = rftlab::cli;
namespace divergence = rftlab::divergence;
namespace fixed_point = rftlab::fixed_point;
namespace fs = std::filesystem;
namespace policy = rftlab::policy;
namespace rft = rftlab::rft;

namespace {

using Clock = std::chrono::steady_clock;

bool run_criterion(int id, const char* what, double limit_s,
                   const std::function<bool(std::string&)>& body) {
  Clock::time_point t0 = Clock::now();
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  if (ok && dt > limit_s) {
    ok = false;
    detail = "over the time limit";
  }
  std::printf("[%s] %d %s (%.2f s)%s%s\n", ok ? "PASS" : "FAIL", id, what, dt,
              detail.empty() ? "" : ": ", detail.c_str());
  std::fflush(stdout);
  return ok;
}

divergence::DivergenceSpec srkl_spec(double alpha) {
  divergence::DivergenceSpec d;
  d.kind = divergence::Kind::SRKL;
  d.alpha = alpha;
  return d;
}

// ---- criterion 1: the skewed coefficient never exceeds its cap ----

bool coefficient_cap(std::string& detail) {
  const double alphas[] = {0.1, 0.4, 0.8, 0.9};
  for (double alpha : alphas) {
    divergence::DivergenceSpec d = srkl_spec(alpha);
    double cap = divergence::coefficient_upper_bound(alpha);
    int violations = 0;
    for (int i = -768; i <= 768; ++i) {  // 1e-12 .. 1e12, 64 points per decade
      double r = std::pow(10.0, static_cast<double>(i) / 64.0);
      if (divergence::gradient_coefficient(d, r) > cap) ++violations;
    }
    if (violations != 0) {
      detail = "cap exceeded at alpha " + std::to_string(alpha);
      return false;
    }
    double at_top = divergence::gradient_coefficient(d, 1e12);
    if (std::abs(at_top - cap) > 1e-4) {
      detail = "value at 1e12 is " + std::to_string(at_top) + " vs cap " +
               std::to_string(cap);
      return false;
    }
  }
  return true;
}

// ---- criterion 2: closed-form derivative and strict growth ----

bool coefficient_derivative(std::string& detail) {
  Rng rng(41);
  for (int i = 0; i < 1000; ++i) {
    double alpha = rng.next_range(0.05, 0.95);
    double r = std::pow(10.0, rng.next_range(-3.0, 3.0));
    divergence::DivergenceSpec d = srkl_spec(alpha);
    double h = 1e-3 * r;
    double fd = (divergence::gradient_coefficient(d, r + h) -
                 divergence::gradient_coefficient(d, r - h)) /
                (2.0 * h);
    double closed = divergence::gradient_coefficient_derivative(alpha, r);
    if (!(closed > 0.0)) {
      detail = "derivative not positive";
      return false;
    }
    if (std::abs(fd - closed) / closed > 1e-5) {
      detail = "finite difference off at alpha " + std::to_string(alpha) +
               " r " + std::to_string(r);
      return false;
    }
  }
  const double alphas[] = {0.1, 0.4, 0.8, 0.9};
  for (double alpha : alphas) {
    divergence::DivergenceSpec d = srkl_spec(alpha);
    double prev = divergence::gradient_coefficient(d, 1e-6);
    for (int i = -59; i <= 60; ++i) {  // 1e-6 .. 1e6, ten points per decade
      double r = std::pow(10.0, static_cast<double>(i) / 10.0);
      double cur = divergence::gradient_coefficient(d, r);
      if (i > -59 && !(cur > prev)) {
        detail = "not strictly increasing at alpha " + std::to_string(alpha);
        return false;
      }
      prev = cur;
    }
  }
  return true;
}

// ---- criterion 3: analytic batch gradient vs finite differences ----

bool gradient_assembly(std::string& detail) {
  cli::RunConfig cfg;
  cfg.task_num_probes = 0;
  cfg.out_dir = "";
  cfg.div.beta = 0.04;
  for (divergence::Kind kind :
       {divergence::Kind::None, divergence::Kind::RKL, divergence::Kind::SRKL}) {
    cfg.div.kind = kind;
    cfg.div.alpha = 0.8;
    cli::GradcheckResult r = cli::cmd_gradcheck(cfg, 64);
    if (!r.pass) {
      detail = "max relative error " + std::to_string(r.max_rel_error);
      return false;
    }
  }
  return true;
}

// ---- criterion 4: regularized-optimum solver ----

fixed_point::RegularizedProblem random_problem(Rng& rng) {
  int n = 2 + static_cast<int>(rng.next_below(15));  // up to 16 actions
  fixed_point::RegularizedProblem pr;
  pr.q_values.resize(static_cast<std::size_t>(n));
  for (double& v : pr.q_values) v = rng.next_range(-3.0, 3.0);
  pr.p_ref.resize(static_cast<std::size_t>(n));
  double total = 0.0;
  for (double& v : pr.p_ref) {
    v = 0.05 + rng.next_double();
    total += v;
  }
  for (double& v : pr.p_ref) v /= total;
  pr.beta = std::pow(10.0, rng.next_range(-2.0, 1.0));
  pr.alpha = rng.next_range(0.05, 0.95);
  return pr;
}

bool fixed_point_solver(std::string& detail) {
  Rng rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    fixed_point::RegularizedProblem pr = random_problem(rng);
    fixed_point::FixedPointSolution sol = fixed_point::solve_optimal_policy(pr);
    if (sol.residual > 1e-9) {
      detail = "normalization residual " + std::to_string(sol.residual);
      return false;
    }
    for (std::size_t a = 0; a < pr.q_values.size(); ++a) {
      double foc = std::abs(
          pr.q_values[a] - sol.lambda -
          pr.beta * divergence::gradient_coefficient(srkl_spec(pr.alpha),
                                                     sol.ratios[a]));
      if (foc > 1e-8) {
        detail = "stationarity residual " + std::to_string(foc);
        return false;
      }
    }
    for (std::size_t a = 0; a + 1 < pr.q_values.size(); ++a)
      for (std::size_t b = a + 1; b < pr.q_values.size(); ++b) {
        bool bad = (pr.q_values[a] > pr.q_values[b] &&
                    sol.ratios[a] <= sol.ratios[b]) ||
                   (pr.q_values[b] > pr.q_values[a] &&
                    sol.ratios[b] <= sol.ratios[a]);
        if (bad) {
          detail = "ratio ordering broke at trial " + std::to_string(trial);
          return false;
        }
      }
  }
  // Near-zero skew collapses onto the exponential reweighting of the
  // reference; compare in total variation.
  for (int trial = 0; trial < 100; ++trial) {
    fixed_point::RegularizedProblem pr = random_problem(rng);
    pr.alpha = 1e-6;
    pr.beta = std::max(pr.beta, 0.2);
    std::vector<double> tilt =
        fixed_point::rkl_tilted_policy(pr.q_values, pr.p_ref, pr.beta);
    fixed_point::FixedPointSolution sol = fixed_point::solve_optimal_policy(pr);
    double tv = 0.0;
    for (std::size_t a = 0; a < tilt.size(); ++a)
      tv += std::abs(sol.policy[a] - tilt[a]);
    tv *= 0.5;
    if (tv > 1e-3) {
      detail = "tilt distance " + std::to_string(tv);
      return false;
    }
  }
  return true;
}

// ---- criterion 5: calibration error vs a brute-force recomputation ----

// Written from the definition, sharing no code with compute_ece.
double brute_force_ece(const std::vector<calibration::CalSample>& samples,
                       int m_bins) {
  struct Rec {
    double conf;
    bool correct;
  };
  std::vector<Rec> recs;
  for (const calibration::CalSample& s : samples) {
    std::map<std::string, int> counts;
    for (const std::string& a : s.answers)
      ++counts[calibration::canonical_answer(a)];
    int best = 0;
    for (const auto& [k, v] : counts) best = std::max(best, v);
    std::string winner;
    for (const auto& [k, v] : counts)
      if (v == best) {
        winner = k;
        break;  // sorted iteration gives the lexicographic tie-break
      }
    recs.push_back(
        {static_cast<double>(best) / static_cast<double>(s.answers.size()),
         winner == calibration::canonical_answer(s.gold)});
  }
  double ece = 0.0;
  for (int m = 1; m <= m_bins; ++m) {
    double lo = static_cast<double>(m - 1) / m_bins;
    double hi = static_cast<double>(m) / m_bins;
    double conf_sum = 0.0, acc_sum = 0.0;
    int count = 0;
    for (const Rec& r : recs) {
      bool in_bin = m == 1 ? r.conf <= hi : r.conf > lo && r.conf <= hi;
      if (!in_bin) continue;
      ++count;
      conf_sum += r.conf;
      acc_sum += r.correct ? 1.0 : 0.0;
    }
    if (count == 0) continue;
    ece += (static_cast<double>(count) / static_cast<double>(recs.size())) *
           std::abs(acc_sum / count - conf_sum / count);
  }
  return ece;
}

bool ece_equivalence(std::string& detail) {
  // Two hand-binned cases with dyadic arithmetic; equality is exact.
  std::vector<calibration::CalSample> two = {
      {"q1", {"a", "a", "a", "b"}, "a"},
      {"q2", {"a", "a", "a", "b"}, "c"},
  };
  if (calibration::compute_ece(two, 2).ece != 0.25) {
    detail = "two-question example off";
    return false;
  }
  std::vector<calibration::CalSample> four = {
      {"q1", {"g", "x", "y", "z"}, "g"},
      {"q2", {"g", "g", "x", "y"}, "z"},
      {"q3", {"g", "g", "g", "x"}, "g"},
      {"q4", {"g", "g", "g", "g"}, "g"},
  };
  if (calibration::compute_ece(four, 4).ece != 0.375) {
    detail = "four-question example off";
    return false;
  }

  Rng rng(43);
  for (int set = 0; set < 1000; ++set) {
    int n_q = 1 + static_cast<int>(rng.next_below(40));
    std::vector<calibration::CalSample> samples;
    for (int q = 0; q < n_q; ++q) {
      calibration::CalSample s;
      s.question_id = "q" + std::to_string(q);
      int n_a = 1 + static_cast<int>(rng.next_below(10));
      for (int a = 0; a < n_a; ++a)
        s.answers.push_back(std::to_string(rng.next_below(12)));
      s.gold = std::to_string(rng.next_below(12));
      samples.push_back(std::move(s));
    }
    int m_bins = 1 + static_cast<int>(rng.next_below(12));
    double got = calibration::compute_ece(samples, m_bins).ece;
    double want = brute_force_ece(samples, m_bins);
    if (std::abs(got - want) > 1e-12) {
      detail = "mismatch " + std::to_string(got) + " vs " +
               std::to_string(want);
      return false;
    }
  }
  return true;
}

// ---- criterion 6: sign-split gradients add back up ----

bool masking_linearity(std::string& detail) {
  policy::PolicyConfig c;
  c.vocab_size = 6;
  c.context_order = 1;
  c.max_len = 3;
  c.eos_token = 5;
  policy::PolicySnapshot ref = policy::make_uniform_policy(c);
  policy::PolicySnapshot theta = policy::make_uniform_policy(c);
  {
    Rng noise(44);
    for (double& z : ref.logits) z += noise.next_range(-0.6, 0.6);
    for (double& z : theta.logits) z += noise.next_range(-0.6, 0.6);
  }

  divergence::DivergenceSpec div;
  div.kind = divergence::Kind::None;
  div.beta = 0.0;
  rft::SurrogateSpec full, pos, neg;
  pos.mask = rft::MaskMode::PositiveOnly;
  neg.mask = rft::MaskMode::NegativeOnly;

  for (int batch = 0; batch < 100; ++batch) {
    Rng rng(500 + static_cast<std::uint64_t>(batch));
    std::vector<rft::RolloutGroup> groups;
    for (int g = 0; g < 3; ++g) {
      std::vector<int> prompt = {static_cast<int>(rng.next_below(5))};
      std::vector<policy::Rollout> rollouts;
      for (int i = 0; i < 4; ++i) {
        policy::Rollout r = policy::sample_rollout(theta, ref, prompt, rng);
        r.reward = r.response[0] % 2 == 0 ? 1.0 : -1.0;
        rollouts.push_back(std::move(r));
      }
      groups.push_back(rft::make_group(prompt, std::move(rollouts)));
    }

    rft::BatchGradient gf = rft::batch_gradient(theta, ref, groups, div, full);
    rft::BatchGradient gp = rft::batch_gradient(theta, ref, groups, div, pos);
    rft::BatchGradient gn = rft::batch_gradient(theta, ref, groups, div, neg);

    auto entry = [](const policy::SparseGrad& g, std::int64_t row,
                    std::size_t col) {
      auto it = g.find(row);
      return it == g.end() ? 0.0 : it->second[col];
    };
    for (const auto& [row, vec] : gf.surrogate)
      for (std::size_t i = 0; i < vec.size(); ++i)
        if (vec[i] != entry(gp.surrogate, row, i) + entry(gn.surrogate, row, i)) {
          detail = "split sum differs in batch " + std::to_string(batch);
          return false;
        }
    for (const auto& [row, vec] : gp.surrogate)
      if (gf.surrogate.count(row) != 1) {
        detail = "positive-half row outside the full support";
        return false;
      }
    for (const auto& [row, vec] : gn.surrogate)
      if (gf.surrogate.count(row) != 1) {
        detail = "negative-half row outside the full support";
        return false;
      }
  }
  return true;
}

// ---- criteria 7 and 8: five-seed training comparisons ----

cli::RunConfig experiment_base() {
  cli::RunConfig cfg;  // vocab 16, two operands, groups of 8, 500 steps
  cfg.learning_rate = 3.0;
  cfg.eval_every = cfg.steps;  // evaluate once, at the end
  cfg.out_dir = "";
  return cfg;
}

bool entropy_retention(std::string& detail) {
  cli::RunConfig base = experiment_base();
  base.task_num_probes = 0;
  base.eval_accuracy_prompts = 2048;

  int entropy_ok = 0, accuracy_ok = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cli::RunConfig none = base, srkl = base, rkl = base;
    none.seed = srkl.seed = rkl.seed = seed;
    none.div.kind = divergence::Kind::None;
    srkl.div.kind = divergence::Kind::SRKL;
    srkl.div.alpha = 0.8;
    srkl.div.beta = 0.04;
    rkl.div.kind = divergence::Kind::RKL;
    rkl.div.beta = 0.04;

    cli::TrainResult r_none = cli::cmd_train(none);
    cli::TrainResult r_srkl = cli::cmd_train(srkl);
    cli::TrainResult r_rkl = cli::cmd_train(rkl);

    if (r_none.final_entropy < r_srkl.final_entropy &&
        r_srkl.final_entropy < r_rkl.final_entropy)
      ++entropy_ok;
    if (r_srkl.final_accuracy >= r_rkl.final_accuracy) ++accuracy_ok;
  }
  if (entropy_ok < 4 || accuracy_ok < 4) {
    detail = "entropy order " + std::to_string(entropy_ok) +
             "/5, accuracy order " + std::to_string(accuracy_ok) + "/5";
    return false;
  }
  return true;
}

bool calibration_drift(std::string& detail) {
  cli::RunConfig base = experiment_base();
  base.task_num_probes = 400;
  base.eval_n_samples = 20;
  base.eval_accuracy_prompts = 64;

  int drift_ok = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cli::RunConfig none = base, srkl = base;
    none.seed = srkl.seed = seed;
    none.div.kind = divergence::Kind::None;
    srkl.div.kind = divergence::Kind::SRKL;
    srkl.div.alpha = 0.8;
    srkl.div.beta = 2.0;

    cli::TrainResult r_none = cli::cmd_train(none);
    cli::TrainResult r_srkl = cli::cmd_train(srkl);
    double drift_none = r_none.final_ece - r_none.base_ece;
    double drift_srkl = r_srkl.final_ece - r_srkl.base_ece;
    if (drift_none > drift_srkl) ++drift_ok;
  }
  if (drift_ok < 4) {
    detail = "drift ordering held in " + std::to_string(drift_ok) + "/5 seeds";
    return false;
  }
  return true;
}

// ---- criterion 9: penalty surface boundedness ----

bool surface_extrema(const std::string& path, double& mn, double& mx) {
  std::ifstream in(path);
  if (!in) return false;
  std::string line;
  std::getline(in, line);  // header
  mn = 1e300;
  mx = -1e300;
  while (std::getline(in, line)) {
    std::size_t comma = line.rfind(',');
    if (comma == std::string::npos) continue;
    double v = std::strtod(line.c_str() + comma + 1, nullptr);
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  return mx >= mn;
}

bool penalty_surface(std::string& detail) {
  fs::path dir = fs::temp_directory_path() / "rftlab_acceptance";
  fs::create_directories(dir);
  std::string skew = (dir / "landscape_skew.csv").string();
  std::string plain = (dir / "landscape_plain.csv").string();
  cli::cmd_landscape(0.8, divergence::GridSpec{}, skew);
  cli::cmd_landscape(0.0, divergence::GridSpec{}, plain);

  double mn = 0.0, mx = 0.0;
  bool ok = true;
  if (!surface_extrema(skew, mn, mx)) {
    detail = "could not read the skewed surface";
    ok = false;
  } else if (mx > std::log(1.25) || mn >= -5.0) {
    detail = "skewed surface range [" + std::to_string(mn) + ", " +
             std::to_string(mx) + "]";
    ok = false;
  } else if (!surface_extrema(plain, mn, mx)) {
    detail = "could not read the plain surface";
    ok = false;
  } else if (mx <= 5.0) {
    detail = "plain surface maximum " + std::to_string(mx);
    ok = false;
  }
  fs::remove_all(dir);
  return ok;
}

}  // namespace

int main() {
  int failures = 0;
  failures += !run_criterion(1, "skewed coefficient stays under log(1/alpha)",
                             1.0, coefficient_cap);
  failures += !run_criterion(2, "coefficient derivative and strict growth",
                             1.0, coefficient_derivative);
  failures += !run_criterion(3, "batch gradient matches finite differences",
                             30.0, gradient_assembly);
  failures += !run_criterion(4, "regularized optimum satisfies stationarity",
                             10.0, fixed_point_solver);
  failures += !run_criterion(5, "calibration error matches brute force", 5.0,
                             ece_equivalence);
  failures += !run_criterion(6, "sign-split gradients sum to the full one",
                             10.0, masking_linearity);
  failures += !run_criterion(7, "entropy retention ordering over five seeds",
                             300.0, entropy_retention);
  failures += !run_criterion(8, "calibration drifts less under the skewed penalty",
                             300.0, calibration_drift);
  failures += !run_criterion(9, "penalty surface bounded only when skewed",
                             5.0, penalty_surface);
  std::printf("%d/9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
