#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rftlab/commands.hpp"
#include "rftlab/errors.hpp"

namespace {

using rftlab::cli::RunConfig;

// Flags shared by the subcommands that take a full run configuration.
struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  std::int64_t seed = 0;
  CLI::Option* config_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  o.config_opt =
      cmd->add_option("--config", o.config_path, "configuration file path");
  cmd->add_option("--set", o.sets,
                  "override a config key, e.g. --set divergence.alpha=0.5")
      ->take_all();
  o.out_opt = cmd->add_option("--out", o.out_dir, "output directory");
  o.seed_opt = cmd->add_option("--seed", o.seed, "master seed");
}

// Precedence: defaults, then --config file, then --set pairs in order, then
// the dedicated --out and --seed flags.
RunConfig build_config(const CommonOpts& o) {
  RunConfig c;
  if (o.config_opt->count() > 0)
    c = rftlab::cli::parse_config_file(o.config_path);
  for (const std::string& kv : o.sets) rftlab::cli::apply_override(c, kv);
  if (o.out_opt->count() > 0) c.out_dir = o.out_dir;
  if (o.seed_opt->count() > 0) c.seed = static_cast<std::uint64_t>(o.seed);
  c.validate();
  return c;
}

int dispatch(CLI::App& app, const CommonOpts& train_opts,
             const CommonOpts& sweep_opts, const std::vector<double>& alphas,
             double land_alpha, const rftlab::divergence::GridSpec& grid,
             const std::string& land_out, const CommonOpts& grad_opts,
             int n_params, bool corrupt, const std::string& fp_in,
             const std::string& fp_out, const std::string& ece_in, int ece_bins,
             const std::string& ece_out) {
  if (app.got_subcommand("train")) {
    rftlab::cli::TrainResult r = rftlab::cli::cmd_train(build_config(train_opts));
    std::printf("train: accuracy=%.6g entropy=%.6g", r.final_accuracy,
                r.final_entropy);
    if (!std::isnan(r.final_ece))
      std::printf(" ece=%.6g (start %.6g)", r.final_ece, r.base_ece);
    std::printf("\n");
    return 0;
  }
  if (app.got_subcommand("sweep-alpha")) {
    rftlab::cli::cmd_sweep_alpha(build_config(sweep_opts), alphas);
    return 0;
  }
  if (app.got_subcommand("landscape")) {
    rftlab::cli::cmd_landscape(land_alpha, grid, land_out);
    std::printf("landscape: wrote %s\n", land_out.c_str());
    return 0;
  }
  if (app.got_subcommand("gradcheck")) {
    RunConfig c = build_config(grad_opts);
    rftlab::cli::GradcheckResult r =
        rftlab::cli::cmd_gradcheck(c, n_params, corrupt);
    std::printf("gradcheck: max relative error %.3g over %d parameters: %s\n",
                r.max_rel_error, r.n_checked, r.pass ? "PASS" : "FAIL");
    return r.pass ? 0 : 3;
  }
  if (app.got_subcommand("fixed-point")) {
    std::fputs(rftlab::cli::cmd_fixed_point(fp_in, fp_out).c_str(), stdout);
    return 0;
  }
  if (app.got_subcommand("eval-ece")) {
    double ece = rftlab::cli::cmd_eval_ece(ece_in, ece_bins, ece_out);
    std::printf("ece = %.12g\n", ece);
    return 0;
  }
  std::fputs(app.help().c_str(), stderr);
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toy-policy lab for divergence-regularized reinforcement "
               "finetuning"};
  app.require_subcommand(0, 1);

  CommonOpts train_opts;
  CLI::App* train = app.add_subcommand("train", "run a training loop");
  add_common(train, train_opts);

  CommonOpts sweep_opts;
  std::vector<double> alphas;
  CLI::App* sweep =
      app.add_subcommand("sweep-alpha", "train once per skew value");
  add_common(sweep, sweep_opts);
  sweep->add_option("--alphas", alphas, "comma-separated skew values; 0 = "
                    "plain reverse KL")
      ->required()
      ->delimiter(',');

  double land_alpha = 0.8;
  rftlab::divergence::GridSpec grid;
  std::string land_out = "landscape.csv";
  CLI::App* land =
      app.add_subcommand("landscape", "per-token penalty surface CSV");
  land->add_option("--alpha", land_alpha, "skew value; 0 = plain reverse KL");
  land->add_option("--n-theta", grid.n_theta, "policy-probability grid size");
  land->add_option("--n-ref", grid.n_ref, "reference-probability grid size");
  land->add_option("--lo", grid.lo, "smallest probability on the grid");
  land->add_option("--hi", grid.hi, "largest probability on the grid");
  land->add_option("--out", land_out, "output CSV path");

  CommonOpts grad_opts;
  int n_params = 64;
  bool corrupt = false;
  CLI::App* grad = app.add_subcommand(
      "gradcheck", "analytic gradient vs central finite differences");
  add_common(grad, grad_opts);
  grad->add_option("--n-params", n_params, "parameters to probe");
  grad->add_flag("--corrupt", corrupt,
                 "negative control: perturb the analytic gradient")
      ->group("");  // hidden test hook

  std::string fp_in, fp_out;
  CLI::App* fp = app.add_subcommand(
      "fixed-point", "solve the penalized one-step optimal policy");
  fp->add_option("--in", fp_in, "problem JSON path")->required();
  fp->add_option("--out", fp_out, "solution JSON path (optional)");

  std::string ece_in, ece_out;
  int ece_bins = 10;
  CLI::App* ece = app.add_subcommand(
      "eval-ece", "calibration error from an answer-sample JSONL file");
  ece->add_option("--in", ece_in, "samples JSONL path")->required();
  ece->add_option("--bins", ece_bins, "number of confidence bins");
  ece->add_option("--out", ece_out, "reliability CSV path (optional)");

  (void)train;
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    return dispatch(app, train_opts, sweep_opts, alphas, land_alpha, grid,
                    land_out, grad_opts, n_params, corrupt, fp_in, fp_out,
                    ece_in, ece_bins, ece_out);
  } catch (const rftlab::NonConvergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const rftlab::BracketError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const rftlab::StaleRollouts& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const rftlab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
