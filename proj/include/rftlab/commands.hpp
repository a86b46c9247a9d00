#ifndef RFTLAB_COMMANDS_HPP
#define RFTLAB_COMMANDS_HPP

#include <limits>
#include <string>
#include <vector>

#include "rftlab/config.hpp"
#include "rftlab/divergence.hpp"
#include "rftlab/fixed_point.hpp"

namespace rftlab::cli {

struct TrainResult {
  double final_accuracy = 0.0;
  double final_entropy = 0.0;
  double final_ece = std::numeric_limits<double>::quiet_NaN();  // no probes
  double base_ece = std::numeric_limits<double>::quiet_NaN();
  policy::PolicySnapshot final_policy;
  std::vector<rft::TrainStepReport> reports;
};

// Full training run: builds the task, reference and initial policy from the
// config, loops sample -> score -> advantage -> mask -> update, and writes
// config.txt, metrics.jsonl, checkpoint_final.txt (and factprobe.jsonl when
// probes are configured) under config.out_dir. Empty out_dir skips all file
// output; metrics are identical either way.
TrainResult cmd_train(const RunConfig& config);

// Runs cmd_train once per alpha into <out_dir>/alpha_<value>/ and writes
// summary.csv with header alpha,final_accuracy,final_ece,final_entropy.
// alpha = 0 selects plain reverse KL; other values select the skewed penalty.
// Duplicate alphas run once, with a warning to stderr.
void cmd_sweep_alpha(const RunConfig& base, const std::vector<double>& alphas);

// Writes the penalty surface CSV for the given alpha to out_path.
void cmd_landscape(double alpha, const divergence::GridSpec& grid,
                   const std::string& out_path);

struct GradcheckResult {
  double max_rel_error = 0.0;
  int n_checked = 0;
  bool pass = false;
};

// Compares the analytic batch gradient against central finite differences of
// the batch objective on a sampled batch, over n_params randomly chosen
// parameters of visited rows. Requires the exact full-vocabulary estimator.
// corrupt_for_test inflates the analytic gradient by 5% so tests can confirm
// the check is able to fail.
GradcheckResult cmd_gradcheck(const RunConfig& config, int n_params = 64,
                              bool corrupt_for_test = false);

// Reads {"q_values":[...],"p_ref":[...],"beta":b,"alpha":a} from in_path and
// returns the solution JSON {"lambda":...,"ratios":[...],"policy":[...],
// "residual":...}; writes it to out_path unless out_path is empty.
std::string cmd_fixed_point(const std::string& in_path,
                            const std::string& out_path);

// Reads answer samples (JSONL) and writes the reliability CSV; returns the
// expected calibration error.
double cmd_eval_ece(const std::string& in_path, int m_bins,
                    const std::string& out_csv_path);

}  // namespace rftlab::cli

#endif
