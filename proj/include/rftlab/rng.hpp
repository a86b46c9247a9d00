#ifndef RFTLAB_RNG_HPP
#define RFTLAB_RNG_HPP

#include <cstdint>
#include <vector>

#include "rftlab/errors.hpp"

namespace rftlab {

// splitmix64 finalizer; full-period mixer over 64-bit state.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic substream derivation. Streams are identified by the run seed
// plus up to three counters (e.g. step, prompt index, rollout index) and a
// purpose tag so that sampling, prompt generation and evaluation never share
// a stream. Serial and parallel schedules draw the same numbers.
enum class StreamPurpose : std::uint64_t {
  PromptGen = 1,
  RolloutSample = 2,
  EvalAccuracy = 3,
  EvalCalibration = 4,
  TaskTable = 5,
  InitNoise = 6,
};

inline std::uint64_t derive_seed(std::uint64_t seed, StreamPurpose purpose,
                                 std::uint64_t a = 0, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t s = mix64(seed ^ 0x243f6a8885a308d3ULL);
  s = mix64(s ^ static_cast<std::uint64_t>(purpose));
  s = mix64(s ^ a);
  s = mix64(s ^ b);
  s = mix64(s ^ c);
  return s;
}

// Small xorshift-free generator: repeated splitmix64 on a counter.
// Chosen over std::mt19937_64 + distributions so every drawn number is
// bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return mix64(state_++); }

  // Uniform on [0, 1) with 53 random mantissa bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw DomainError("next_below: n must be positive");
    // Rejection-free modulo is fine here: n is tiny next to 2^64.
    return next_u64() % n;
  }

  // Uniform on [lo, hi).
  double next_range(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Index sampled from an (unnormalized is allowed) nonnegative weight vector.
  int next_categorical(const std::vector<double>& weights) {
    if (weights.empty()) throw EmptyInput("next_categorical: empty weights");
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw DomainError("next_categorical: negative weight");
      total += w;
    }
    if (total <= 0.0) throw DomainError("next_categorical: zero total weight");
    double u = next_double() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size() - 1);
  }

 private:
  std::uint64_t state_;
};

}  // namespace rftlab

#endif
