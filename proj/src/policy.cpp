#include "rftlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rftlab::policy {

void PolicyConfig::validate() const {
  if (vocab_size < 2 || vocab_size > 256)
    throw DomainError("policy: vocab_size must lie in [2, 256]");
  if (context_order < 0 || context_order > 3)
    throw DomainError("policy: context_order must lie in [0, 3]");
  if (max_len < 1) throw DomainError("policy: max_len must be >= 1");
  if (eos_token < 0 || eos_token >= vocab_size)
    throw DomainError("policy: eos_token outside vocabulary");
}

std::int64_t PolicyConfig::row_count() const {
  std::int64_t rows = 1;
  for (int i = 0; i < context_order; ++i) rows *= vocab_size + 1;
  return rows;
}

PolicySnapshot make_uniform_policy(const PolicyConfig& config) {
  config.validate();
  PolicySnapshot snap;
  snap.config = config;
  snap.logits.assign(static_cast<std::size_t>(config.param_count()), 0.0);
  snap.version = 0;
  return snap;
}

ContextState::ContextState(const PolicyConfig& config)
    : order_(config.context_order),
      base_(config.vocab_size + 1),
      row_(0),
      window_(static_cast<std::size_t>(std::max(config.context_order, 1)),
              config.bos_symbol()) {
  // All-BOS start state.
  std::int64_t r = 0;
  for (int i = 0; i < order_; ++i) r = r * base_ + config.bos_symbol();
  row_ = r;
}

void ContextState::push(int token) {
  if (order_ == 0) return;
  window_[next_] = token;
  next_ = (next_ + 1) % order_;
  // Oldest symbol first; the ring buffer index `next_` points at it now.
  std::int64_t r = 0;
  for (int i = 0; i < order_; ++i)
    r = r * base_ + window_[(next_ + i) % order_];
  row_ = r;
}

std::int64_t context_row(const PolicyConfig& config,
                         const std::vector<int>& tokens) {
  ContextState state(config);
  for (int t : tokens) state.push(t);
  return state.row();
}

std::vector<double> row_distribution(const PolicySnapshot& policy,
                                     std::int64_t row) {
  const int v = policy.config.vocab_size;
  if (row < 0 || row >= policy.config.row_count())
    throw DomainError("row_distribution: row out of range");
  const double* z = policy.logits.data() + row * v;
  double zmax = *std::max_element(z, z + v);
  std::vector<double> p(static_cast<std::size_t>(v));
  double total = 0.0;
  for (int i = 0; i < v; ++i) {
    p[i] = std::exp(z[i] - zmax);
    total += p[i];
  }
  for (int i = 0; i < v; ++i) p[i] /= total;
  return p;
}

Rollout sample_rollout(const PolicySnapshot& policy,
                       const PolicySnapshot& reference,
                       const std::vector<int>& prompt, Rng& rng,
                       bool store_full) {
  if (!(policy.config == reference.config))
    throw ConfigMismatch("sample_rollout: policy/reference configs differ");
  const PolicyConfig& cfg = policy.config;
  for (int t : prompt)
    if (t < 0 || t >= cfg.vocab_size)
      throw DomainError("sample_rollout: prompt token outside vocabulary");

  Rollout out;
  out.prompt = prompt;
  out.policy_version = policy.version;

  ContextState ctx(cfg);
  for (int t : prompt) ctx.push(t);

  for (int pos = 0; pos < cfg.max_len; ++pos) {
    std::int64_t row = ctx.row();
    std::vector<double> p_theta = row_distribution(policy, row);
    std::vector<double> p_ref = row_distribution(reference, row);
    int token = rng.next_categorical(p_theta);

    out.context_rows.push_back(row);
    out.response.push_back(token);
    out.logp_theta.push_back(std::log(p_theta[static_cast<std::size_t>(token)]));
    out.logp_ref.push_back(std::log(p_ref[static_cast<std::size_t>(token)]));
    if (store_full) {
      out.full_theta.push_back(std::move(p_theta));
      out.full_ref.push_back(std::move(p_ref));
    }
    if (token == cfg.eos_token) break;
    ctx.push(token);
  }
  return out;
}

double token_entropy(const PolicySnapshot& policy,
                     const std::vector<Rollout>& rollouts) {
  double total = 0.0;
  std::int64_t positions = 0;
  for (const Rollout& r : rollouts) {
    for (std::int64_t row : r.context_rows) {
      std::vector<double> p = row_distribution(policy, row);
      double h = 0.0;
      for (double pi : p)
        if (pi > 0.0) h -= pi * std::log(pi);
      total += h;
      ++positions;
    }
  }
  if (positions == 0) throw EmptyInput("token_entropy: no positions");
  return total / static_cast<double>(positions);
}

SparseGrad logprob_gradient(const PolicySnapshot& policy,
                            const Rollout& rollout) {
  const int v = policy.config.vocab_size;
  SparseGrad grad;
  for (std::size_t t = 0; t < rollout.response.size(); ++t) {
    std::int64_t row = rollout.context_rows[t];
    std::vector<double> p = row_distribution(policy, row);
    auto [it, fresh] = grad.try_emplace(row, static_cast<std::size_t>(v), 0.0);
    std::vector<double>& g = it->second;
    for (int i = 0; i < v; ++i) g[i] -= p[static_cast<std::size_t>(i)];
    g[static_cast<std::size_t>(rollout.response[t])] += 1.0;
  }
  return grad;
}

std::string save_checkpoint(const PolicySnapshot& policy) {
  const PolicyConfig& c = policy.config;
  std::string out;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%d,%d,%d,%d,%lld\n", c.vocab_size,
                c.context_order, c.max_len, c.eos_token,
                static_cast<long long>(policy.version));
  out += buf;
  const std::int64_t rows = c.row_count();
  for (std::int64_t r = 0; r < rows; ++r) {
    for (int i = 0; i < c.vocab_size; ++i) {
      // %.17g round-trips any double exactly.
      std::snprintf(buf, sizeof(buf), "%.17g",
                    policy.logits[static_cast<std::size_t>(r * c.vocab_size + i)]);
      out += buf;
      out += (i + 1 == c.vocab_size) ? '\n' : ',';
    }
  }
  return out;
}

PolicySnapshot load_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("checkpoint: empty input");

  PolicySnapshot snap;
  long long version = 0;
  if (std::sscanf(line.c_str(), "%d,%d,%d,%d,%lld", &snap.config.vocab_size,
                  &snap.config.context_order, &snap.config.max_len,
                  &snap.config.eos_token, &version) != 5)
    throw IoError("checkpoint: bad header line");
  snap.config.validate();
  snap.version = version;

  const std::int64_t expect = snap.config.param_count();
  snap.logits.reserve(static_cast<std::size_t>(expect));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const char* s = line.c_str();
    char* end = nullptr;
    while (*s) {
      double x = std::strtod(s, &end);
      if (end == s) throw IoError("checkpoint: malformed logit value");
      snap.logits.push_back(x);
      s = (*end == ',') ? end + 1 : end;
    }
  }
  if (static_cast<std::int64_t>(snap.logits.size()) != expect)
    throw IoError("checkpoint: logit count does not match header");
  return snap;
}

void save_checkpoint_file(const PolicySnapshot& policy,
                          const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot open for write: " + path);
  out << save_checkpoint(policy);
  if (!out) throw IoError("checkpoint: write failed: " + path);
}

PolicySnapshot load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open for read: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_checkpoint(ss.str());
}

}  // namespace rftlab::policy
