#include "rftlab/divergence.hpp"

#include <cmath>
#include <cstdio>

namespace rftlab::divergence {

namespace {

// Probabilities only ever pass through log after this clamp; values this
// small would otherwise produce -inf and poison downstream sums.
constexpr double kLogFloor = 1e-300;

double safe_log(double x) { return std::log(x < kLogFloor ? kLogFloor : x); }

void check_distribution_pair(const std::vector<double>& p,
                             const std::vector<double>& q) {
  if (p.size() != q.size())
    throw ShapeError("divergence: distribution sizes differ");
  if (p.empty()) throw EmptyInput("divergence: empty distributions");
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0)
      throw DomainError("divergence: negative probability");
    sp += p[i];
    sq += q[i];
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
    throw DomainError("divergence: inputs must sum to 1 within 1e-9");
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw DomainError("divergence: alpha must lie strictly in (0,1)");
}

}  // namespace

void DivergenceSpec::validate() const {
  if (beta < 0.0) throw DomainError("divergence: beta must be >= 0");
  if (kind == Kind::SRKL) check_alpha(alpha);
}

double rkl_value(const std::vector<double>& p_theta,
                 const std::vector<double>& p_ref) {
  check_distribution_pair(p_theta, p_ref);
  double acc = 0.0;
  for (std::size_t i = 0; i < p_theta.size(); ++i) {
    if (p_theta[i] == 0.0) continue;  // 0*log 0 := 0
    if (p_ref[i] == 0.0)
      throw DomainError("rkl_value: p_theta > 0 where p_ref = 0");
    acc += p_theta[i] * (safe_log(p_theta[i]) - safe_log(p_ref[i]));
  }
  // The divergence is nonnegative; a sub-ulp negative sum is rounding noise.
  return acc < 0.0 ? 0.0 : acc;
}

double srkl_value(const std::vector<double>& p_theta,
                  const std::vector<double>& p_ref, double alpha) {
  check_alpha(alpha);
  check_distribution_pair(p_theta, p_ref);
  double acc = 0.0;
  for (std::size_t i = 0; i < p_theta.size(); ++i) {
    if (p_theta[i] == 0.0) continue;
    double mix = alpha * p_theta[i] + (1.0 - alpha) * p_ref[i];
    acc += p_theta[i] * (safe_log(p_theta[i]) - safe_log(mix));
  }
  return acc < 0.0 ? 0.0 : acc;
}

double sampled_token_penalty(const DivergenceSpec& spec, double p_theta,
                             double p_ref) {
  spec.validate();
  if (spec.kind == Kind::None) return 0.0;
  if (!(p_theta > 0.0 && p_theta <= 1.0))
    throw DomainError("sampled_token_penalty: p_theta must lie in (0,1]");
  if (p_ref < 0.0 || p_ref > 1.0)
    throw DomainError("sampled_token_penalty: p_ref must lie in [0,1]");
  if (spec.kind == Kind::RKL) {
    if (p_ref == 0.0)
      throw DomainError("sampled_token_penalty: p_ref = 0 under RKL");
    return safe_log(p_theta) - safe_log(p_ref);
  }
  double mix = spec.alpha * p_theta + (1.0 - spec.alpha) * p_ref;
  return safe_log(p_theta) - safe_log(mix);
}

double gradient_coefficient(const DivergenceSpec& spec, double ratio) {
  spec.validate();
  if (spec.kind == Kind::None) return 0.0;
  if (!(ratio > 0.0)) throw DomainError("gradient_coefficient: ratio <= 0");
  if (spec.kind == Kind::RKL) return std::log(ratio) + 1.0;
  // Rewritten around eps = (1-alpha)/(alpha*r):
  //   C = log(1/alpha) + eps/(1+eps) - log1p(eps).
  // The correction is <= 0 in exact arithmetic and stays <= 0 after rounding,
  // so the computed value never exceeds the log(1/alpha) bound. The naive
  // form lands a few ulp above it once r is large enough that the true gap
  // (about eps^2/2) drops below double resolution.
  double eps = (1.0 - spec.alpha) / (spec.alpha * ratio);
  if (!std::isfinite(eps)) {  // alpha*ratio underflowed; far from the bound
    double denom = spec.alpha * ratio + (1.0 - spec.alpha);
    return std::log(ratio / denom) + 1.0 - spec.alpha * ratio / denom;
  }
  return std::log(1.0 / spec.alpha) + eps / (1.0 + eps) - std::log1p(eps);
}

double gradient_coefficient_derivative(double alpha, double ratio) {
  check_alpha(alpha);
  if (!(ratio > 0.0))
    throw DomainError("gradient_coefficient_derivative: ratio <= 0");
  double denom = alpha * ratio + (1.0 - alpha);
  double one_minus = 1.0 - alpha;
  return one_minus * one_minus / (ratio * denom * denom);
}

double coefficient_upper_bound(double alpha) {
  check_alpha(alpha);
  return std::log(1.0 / alpha);
}

std::vector<LandscapePoint> penalty_landscape(double alpha,
                                              const GridSpec& grid) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw DomainError("penalty_landscape: alpha must lie in [0,1)");
  if (grid.n_theta < 2 || grid.n_ref < 2)
    throw DomainError("penalty_landscape: grid needs at least 2 points per axis");
  if (!(grid.lo > 0.0 && grid.lo < grid.hi && grid.hi < 1.0))
    throw DomainError("penalty_landscape: grid must satisfy 0 < lo < hi < 1");

  DivergenceSpec spec;
  spec.kind = alpha == 0.0 ? Kind::RKL : Kind::SRKL;
  spec.alpha = alpha == 0.0 ? 0.5 : alpha;  // placeholder alpha unused by RKL
  spec.beta = 0.0;

  auto log_grid = [&](int n) {
    std::vector<double> out(n);
    double llo = std::log(grid.lo), lhi = std::log(grid.hi);
    for (int i = 0; i < n; ++i)
      out[i] = std::exp(llo + (lhi - llo) * i / (n - 1));
    return out;
  };
  std::vector<double> thetas = log_grid(grid.n_theta);
  std::vector<double> refs = log_grid(grid.n_ref);

  std::vector<LandscapePoint> points;
  points.reserve(static_cast<std::size_t>(grid.n_theta) * grid.n_ref);
  for (double pt : thetas)
    for (double pr : refs)
      points.push_back({pt, pr, sampled_token_penalty(spec, pt, pr)});
  return points;
}

std::string landscape_csv(const std::vector<LandscapePoint>& points) {
  std::string out = "p_theta,p_ref,penalty\n";
  char buf[128];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g\n", p.p_theta, p.p_ref,
                  p.penalty);
    out += buf;
  }
  return out;
}

}  // namespace rftlab::divergence
