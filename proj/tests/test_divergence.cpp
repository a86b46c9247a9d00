#include <doctest.h>

#include <cmath>
#include <vector>

#include "rftlab/divergence.hpp"
#include "rftlab/rng.hpp"

using namespace rftlab;
using namespace rftlab::divergence;

namespace {

DivergenceSpec srkl_spec(double alpha) {
  DivergenceSpec s;
  s.kind = Kind::SRKL;
  s.alpha = alpha;
  return s;
}

DivergenceSpec rkl_spec() {
  DivergenceSpec s;
  s.kind = Kind::RKL;
  return s;
}

// Random distribution with strictly positive entries.
std::vector<double> random_dist(Rng& rng, int n) {
  std::vector<double> p(n);
  double total = 0.0;
  for (double& x : p) {
    x = 0.05 + rng.next_double();
    total += x;
  }
  for (double& x : p) x /= total;
  return p;
}

}  // namespace

TEST_CASE("reverse KL values against direct summation") {
  CHECK(rkl_value({0.9, 0.1}, {0.5, 0.5}) ==
        doctest::Approx(0.3680642071684971).epsilon(1e-14));
  CHECK(rkl_value({0.25, 0.75}, {0.25, 0.75}) == doctest::Approx(0.0));
  // The zero-probability entry contributes exactly 0.
  CHECK(rkl_value({1.0, 0.0}, {0.5, 0.5}) ==
        doctest::Approx(0.6931471805599453).epsilon(1e-14));
}

TEST_CASE("reverse KL rejects support violations and malformed input") {
  CHECK_THROWS_AS(rkl_value({1.0, 0.0}, {0.0, 1.0}), DomainError);
  CHECK_THROWS_AS(rkl_value({0.5, 0.5}, {0.5, 0.5, 0.0}), ShapeError);
  CHECK_THROWS_AS(rkl_value({}, {}), EmptyInput);
  CHECK_THROWS_AS(rkl_value({0.7, 0.7}, {0.5, 0.5}), DomainError);
  CHECK_THROWS_AS(rkl_value({-0.1, 1.1}, {0.5, 0.5}), DomainError);
}

TEST_CASE("skewed reverse KL is finite off the reference support") {
  // p_ref gives zero mass to the only token p_theta uses; the mixture
  // denominator alpha*p keeps the value finite at log(1/alpha).
  double v = srkl_value({1.0, 0.0}, {0.0, 1.0}, 0.8);
  CHECK(v == doctest::Approx(0.22314355131420976).epsilon(1e-14));
  CHECK(v == doctest::Approx(std::log(1.0 / 0.8)).epsilon(1e-14));
}

TEST_CASE("skewed reverse KL value matches direct summation") {
  CHECK(srkl_value({0.9, 0.1}, {0.5, 0.5}, 0.8) ==
        doctest::Approx(0.02500271426919875).epsilon(1e-14));
  CHECK(srkl_value({0.3, 0.7}, {0.3, 0.7}, 0.5) ==
        doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("skewed value never exceeds plain reverse KL") {
  CHECK(srkl_value({0.9, 0.1}, {0.5, 0.5}, 0.8) <=
        rkl_value({0.9, 0.1}, {0.5, 0.5}));
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 2 + static_cast<int>(rng.next_below(6));
    std::vector<double> p = random_dist(rng, n);
    std::vector<double> q = random_dist(rng, n);
    double alpha = rng.next_range(0.05, 0.95);
    CHECK(srkl_value(p, q, alpha) <= rkl_value(p, q) + 1e-12);
  }
}

TEST_CASE("values are nonnegative on random pairs") {
  Rng rng(40);
  for (int trial = 0; trial < 1000; ++trial) {
    int n = 2 + static_cast<int>(rng.next_below(7));
    std::vector<double> p = random_dist(rng, n);
    std::vector<double> q = random_dist(rng, n);
    double alpha = rng.next_range(0.01, 0.99);
    CHECK(srkl_value(p, q, alpha) >= 0.0);
    CHECK(rkl_value(p, q) >= 0.0);
    CHECK(srkl_value(p, p, alpha) >= 0.0);
  }
}

TEST_CASE("skewed value approaches plain reverse KL as alpha shrinks") {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p = random_dist(rng, 4);
    std::vector<double> q = random_dist(rng, 4);
    CHECK(std::abs(srkl_value(p, q, 1e-8) - rkl_value(p, q)) < 1e-6);
  }
}

TEST_CASE("alpha validation is strict") {
  CHECK_THROWS_AS(srkl_value({0.5, 0.5}, {0.5, 0.5}, 0.0), DomainError);
  CHECK_THROWS_AS(srkl_value({0.5, 0.5}, {0.5, 0.5}, 1.0), DomainError);
  DivergenceSpec bad = srkl_spec(1.2);
  CHECK_THROWS_AS(bad.validate(), DomainError);
  DivergenceSpec neg;
  neg.beta = -0.01;
  CHECK_THROWS_AS(neg.validate(), DomainError);
}

TEST_CASE("sampled per-token penalty") {
  CHECK(sampled_token_penalty(srkl_spec(0.8), 0.6, 0.001) ==
        doctest::Approx(0.2227269714289935).epsilon(1e-14));
  CHECK(sampled_token_penalty(rkl_spec(), 0.5, 0.5) == doctest::Approx(0.0));
  DivergenceSpec none;
  none.kind = Kind::None;
  CHECK(sampled_token_penalty(none, 0.3, 0.9) == 0.0);
  CHECK_THROWS_AS(sampled_token_penalty(rkl_spec(), 0.5, 0.0), DomainError);
  CHECK(sampled_token_penalty(srkl_spec(0.8), 0.5, 0.0) ==
        doctest::Approx(std::log(1.0 / 0.8)).epsilon(1e-12));
  CHECK_THROWS_AS(sampled_token_penalty(rkl_spec(), 0.0, 0.5), DomainError);
  CHECK_THROWS_AS(sampled_token_penalty(rkl_spec(), 1.5, 0.5), DomainError);
}

TEST_CASE("per-token penalty dominance flips at p_theta = p_ref") {
  // Skewing lowers the penalty exactly where the policy piles on mass.
  DivergenceSpec s = srkl_spec(0.8);
  DivergenceSpec r = rkl_spec();
  CHECK(sampled_token_penalty(s, 0.9, 0.2) <
        sampled_token_penalty(r, 0.9, 0.2));
  CHECK(sampled_token_penalty(s, 0.1, 0.6) >
        sampled_token_penalty(r, 0.1, 0.6));
  CHECK(sampled_token_penalty(s, 0.4, 0.4) ==
        doctest::Approx(sampled_token_penalty(r, 0.4, 0.4)).epsilon(1e-12));
}

TEST_CASE("gradient coefficient closed forms") {
  DivergenceSpec s = srkl_spec(0.8);
  CHECK(gradient_coefficient(s, 1.0) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(gradient_coefficient(s, 1e6) ==
        doctest::Approx(0.22314355131417862).epsilon(1e-12));
  CHECK(std::abs(gradient_coefficient(s, 1e6) - coefficient_upper_bound(0.8)) <
        1e-4);
  CHECK(gradient_coefficient(s, 1e-10) ==
        doctest::Approx(-20.416413018306358).epsilon(1e-12));
  CHECK(gradient_coefficient(s, 1e-10) < -20.0);

  CHECK(gradient_coefficient(rkl_spec(), 1.0) == doctest::Approx(1.0));
  CHECK(gradient_coefficient(rkl_spec(), std::exp(1.0)) ==
        doctest::Approx(2.0).epsilon(1e-14));

  DivergenceSpec none;
  none.kind = Kind::None;
  CHECK(gradient_coefficient(none, 17.0) == 0.0);
  CHECK_THROWS_AS(gradient_coefficient(s, 0.0), DomainError);
  CHECK_THROWS_AS(gradient_coefficient(s, -1.0), DomainError);
}

TEST_CASE("coefficient stays below log(1/alpha) everywhere") {
  for (double alpha : {0.1, 0.4, 0.8, 0.9}) {
    DivergenceSpec s = srkl_spec(alpha);
    double cap = coefficient_upper_bound(alpha);
    for (double lg = -12.0; lg <= 12.0; lg += 0.0625)
      CHECK(gradient_coefficient(s, std::pow(10.0, lg)) <= cap);
  }
}

TEST_CASE("coefficient derivative matches finite differences") {
  CHECK(gradient_coefficient_derivative(0.8, 1.0) ==
        doctest::Approx(0.04).epsilon(1e-13));
  // Relative step keeps the difference quotient well conditioned across
  // twelve orders of magnitude of r.
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    double alpha = rng.next_range(0.05, 0.95);
    double r = std::pow(10.0, rng.next_range(-3.0, 3.0));
    DivergenceSpec s = srkl_spec(alpha);
    double h = 1e-3 * r;
    double fd = (gradient_coefficient(s, r + h) -
                 gradient_coefficient(s, r - h)) /
                (2.0 * h);
    double an = gradient_coefficient_derivative(alpha, r);
    double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-12});
    CHECK(rel < 1e-5);
  }
  double fd_spot = (gradient_coefficient(srkl_spec(0.5), 2.0 + 1e-6) -
                    gradient_coefficient(srkl_spec(0.5), 2.0 - 1e-6)) /
                   2e-6;
  CHECK(gradient_coefficient_derivative(0.5, 2.0) ==
        doctest::Approx(fd_spot).epsilon(1e-5));
}

TEST_CASE("coefficient is strictly increasing in r") {
  for (double alpha : {0.1, 0.4, 0.8, 0.9}) {
    DivergenceSpec s = srkl_spec(alpha);
    double prev = gradient_coefficient(s, 1e-6);
    for (double lg = -5.9; lg <= 6.0; lg += 0.1) {
      double cur = gradient_coefficient(s, std::pow(10.0, lg));
      CHECK(cur > prev);
      prev = cur;
    }
  }
}

TEST_CASE("penalty landscape grid") {
  GridSpec grid;
  grid.n_theta = 40;
  grid.n_ref = 40;
  std::vector<LandscapePoint> skew = penalty_landscape(0.8, grid);
  REQUIRE(skew.size() == 1600);
  double cap = std::log(1.25);
  double mx = -1e300, mn = 1e300;
  for (const auto& pt : skew) {
    mx = std::max(mx, pt.penalty);
    mn = std::min(mn, pt.penalty);
  }
  CHECK(mx <= cap + 1e-12);
  CHECK(mn < -5.0);

  // Plain reverse KL is unbounded in both directions at this resolution.
  std::vector<LandscapePoint> plain = penalty_landscape(0.0, grid);
  double pmx = -1e300, pmn = 1e300;
  for (const auto& pt : plain) {
    pmx = std::max(pmx, pt.penalty);
    pmn = std::min(pmn, pt.penalty);
  }
  CHECK(pmx > 5.0);
  CHECK(pmn < -5.0);

  // Diagonal of the plain landscape is identically zero.
  GridSpec diag;
  diag.n_theta = 7;
  diag.n_ref = 7;
  std::vector<LandscapePoint> d = penalty_landscape(0.0, diag);
  for (int i = 0; i < 7; ++i)
    CHECK(d[static_cast<std::size_t>(i * 7 + i)].penalty ==
          doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("landscape spot value") {
  GridSpec grid;
  grid.n_theta = 2;
  grid.n_ref = 2;
  grid.lo = 1e-4;
  grid.hi = 0.9;
  std::vector<LandscapePoint> pts = penalty_landscape(0.8, grid);
  // Corner p_theta = 1e-4, p_ref = 0.9.
  CHECK(pts[1].p_theta == doctest::Approx(1e-4));
  CHECK(pts[1].p_ref == doctest::Approx(0.9));
  CHECK(pts[1].penalty ==
        doctest::Approx(-7.495986289592523).epsilon(1e-12));
}

TEST_CASE("landscape validation and CSV shape") {
  GridSpec bad;
  bad.n_theta = 1;
  CHECK_THROWS_AS(penalty_landscape(0.8, bad), DomainError);
  GridSpec inverted;
  inverted.lo = 0.9;
  inverted.hi = 0.1;
  CHECK_THROWS_AS(penalty_landscape(0.8, inverted), DomainError);
  CHECK_THROWS_AS(penalty_landscape(-0.2, GridSpec{}), DomainError);
  CHECK_THROWS_AS(penalty_landscape(1.0, GridSpec{}), DomainError);

  std::string csv = landscape_csv({{0.5, 0.25, 0.125}});
  CHECK(csv == "p_theta,p_ref,penalty\n0.5,0.25,0.125\n");
}
