#ifndef RFTLAB_POLICY_HPP
#define RFTLAB_POLICY_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rftlab/errors.hpp"
#include "rftlab/rng.hpp"

namespace rftlab::policy {

struct PolicyConfig {
  int vocab_size = 16;    // real tokens, ids 0..vocab_size-1
  int context_order = 2;  // how many trailing tokens condition the next one
  int max_len = 1;        // response length cap
  int eos_token = 10;

  void validate() const;
  bool operator==(const PolicyConfig&) const = default;

  // Sequence starts are padded with a begin-of-sequence pseudo-symbol that is
  // never emitted, so the context alphabet has vocab_size + 1 symbols.
  int bos_symbol() const { return vocab_size; }
  std::int64_t row_count() const;
  std::int64_t param_count() const { return row_count() * vocab_size; }
};

// Immutable-by-convention table of logits, one row per context tuple.
// Training produces a new snapshot with version + 1 rather than mutating.
struct PolicySnapshot {
  PolicyConfig config;
  std::vector<double> logits;  // row-major, row_count() x vocab_size
  std::int64_t version = 0;
};

PolicySnapshot make_uniform_policy(const PolicyConfig& config);

// Rolling context of the last `context_order` symbols, BOS-padded at start.
class ContextState {
 public:
  explicit ContextState(const PolicyConfig& config);
  void push(int token);
  std::int64_t row() const { return row_; }

 private:
  int order_;
  int base_;  // vocab_size + 1
  std::int64_t row_;
  std::vector<int> window_;
  std::size_t next_ = 0;
};

// Softmax of one context row. Strictly positive entries, sums to 1.
std::vector<double> row_distribution(const PolicySnapshot& policy,
                                     std::int64_t row);

// Row index after feeding the whole token sequence through a fresh context.
std::int64_t context_row(const PolicyConfig& config,
                         const std::vector<int>& tokens);

struct Rollout {
  std::vector<int> prompt;
  std::vector<int> response;          // includes eos when it was drawn
  std::vector<std::int64_t> context_rows;  // row per response position
  std::vector<double> logp_theta;     // log prob of each drawn token
  std::vector<double> logp_ref;
  // Full per-position distributions; filled only when store_full is set.
  std::vector<std::vector<double>> full_theta;
  std::vector<std::vector<double>> full_ref;
  double reward = 0.0;
  std::int64_t policy_version = 0;
};

// Draws a response from `policy` token by token until eos or max_len, also
// recording the reference log-probabilities of every drawn token.
// Throws ConfigMismatch when policy and reference configs differ.
Rollout sample_rollout(const PolicySnapshot& policy,
                       const PolicySnapshot& reference,
                       const std::vector<int>& prompt, Rng& rng,
                       bool store_full = true);

// Mean per-position entropy of `policy` at the contexts the rollouts visited.
// Lies in [0, log(vocab_size)].
double token_entropy(const PolicySnapshot& policy,
                     const std::vector<Rollout>& rollouts);

// Sparse parameter gradient, touched rows only. Ordered by row index so that
// accumulation order is fixed and runs are bit-reproducible.
using SparseGrad = std::map<std::int64_t, std::vector<double>>;

// Gradient of sum_t log pi(o_t | context_t) with respect to the logits:
// one-hot(o_t) minus softmax(row) accumulated per visited row.
SparseGrad logprob_gradient(const PolicySnapshot& policy,
                            const Rollout& rollout);

// Text checkpoint. First line holds
// vocab_size,context_order,max_len,eos_token,version; then one comma-separated
// line of logits per context row, printed with enough digits that
// save(load(s)) == s byte for byte.
std::string save_checkpoint(const PolicySnapshot& policy);
PolicySnapshot load_checkpoint(const std::string& text);
void save_checkpoint_file(const PolicySnapshot& policy,
                          const std::string& path);
PolicySnapshot load_checkpoint_file(const std::string& path);

}  // namespace rftlab::policy

#endif
