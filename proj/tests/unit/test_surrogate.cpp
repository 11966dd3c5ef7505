#include <doctest.h>

#include <cmath>
#include <random>

#include "nonzero/errors.hpp"
#include "nonzero/rng.hpp"
#include "nonzero/surrogate.hpp"

using namespace nonzero;

namespace {

SurrogateParams random_params(const JointActionSpace& s, Rng& rng, double scale = 1.0,
                              double c = 1.0, double alpha = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> theta(s.encoding_size());
  for (auto& t : theta) t = g(rng);
  return SurrogateParams(s, theta, c, alpha);
}

JointAction random_action(const JointActionSpace& s, Rng& rng) { return s.uniform_action(rng); }

// Independent re-implementation of the composite loss.
double reference_loss(const SurrogateParams& p, std::span<const SupervisionSample> batch) {
  double total = 0.0;
  for (const auto& x : batch) {
    const JointAction au = apply_direction(x.a(), x.u());
    const double ea = p.c() * std::asinh(p.alpha() * score(p, x.a()));
    const double eu = p.c() * std::asinh(p.alpha() * score(p, au));
    double mixed = 0.0;
    if (x.v()) {
      const JointAction av = apply_direction(x.a(), *x.v());
      const JointAction auv = apply_direction(au, *x.v());
      mixed = p.c() * std::asinh(p.alpha() * score(p, auv)) - eu -
              p.c() * std::asinh(p.alpha() * score(p, av)) + ea;
    }
    const std::array<double, 4> yhat{ea, eu, eu - ea, mixed};
    double sq = 0.0;
    for (int k = 0; k < 4; ++k) {
      if (k == 3 && !x.v()) continue;
      sq += (yhat[k] - x.y()[k]) * (yhat[k] - x.y()[k]);
    }
    total += 0.25 * sq;
  }
  return total / static_cast<double>(batch.size());
}

std::vector<SupervisionSample> random_batch(const JointActionSpace& s, Rng& rng, int size,
                                            const RewardLookup& f) {
  std::vector<SupervisionSample> batch;
  for (int k = 0; k < size; ++k) {
    const JointAction a = random_action(s, rng);
    const Direction u = sample_direction(s, a, rng);
    std::optional<Direction> v;
    if (s.agents() > 1) {
      do {
        v = sample_direction(s, a, rng);
      } while (v->agent == u.agent);
    }
    batch.push_back(SupervisionSample::from_rewards(a, u, v, f));
  }
  return batch;
}

}  // namespace

TEST_CASE("params validation") {
  JointActionSpace s(2, 3);
  CHECK_THROWS_AS(SurrogateParams(s, std::vector<double>(5, 0.0)), DimensionMismatch);
  CHECK_THROWS_AS(SurrogateParams(s, std::vector<double>(6, 0.0), 0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(SurrogateParams(s, std::vector<double>(6, 0.0), 1.0, -1.0), InvalidArgument);
  std::vector<double> bad(6, 0.0);
  bad[2] = std::nan("");
  CHECK_THROWS_AS(SurrogateParams(s, bad), NumericFailure);
}

TEST_CASE("json round trip") {
  JointActionSpace s(2, 3);
  Rng rng(3);
  const auto p = random_params(s, rng, 1.0, 2.0, 0.5);
  const auto q = surrogate_from_json(s, to_json(p));
  CHECK(q.c() == 2.0);
  CHECK(q.alpha() == 0.5);
  for (std::size_t k = 0; k < 6; ++k) CHECK(q.theta()[k] == p.theta()[k]);
}

TEST_CASE("score examples") {
  JointActionSpace s(2, 3);
  CHECK(score(SurrogateParams::zeros(s), JointAction{2, 1}) == 0.0);
  SurrogateParams p(s, {1, 2, 3, 4, 5, 6});
  CHECK(score(p, JointAction{1, 2}) == 8.0);
  CHECK(score(p, encode_nhot(s, {1, 2})) == 8.0);
  CHECK_THROWS_AS(score(p, std::vector<double>(5, 0.0)), DimensionMismatch);
}

TEST_CASE("score is additive across agents, exhaustive n,d <= 3") {
  Rng rng(11);
  for (int n = 1; n <= 3; ++n) {
    for (int d = 2; d <= 3; ++d) {
      JointActionSpace s(n, d);
      const auto p = random_params(s, rng);
      for (std::uint64_t i = 0; i < *s.cardinality(); ++i) {
        const JointAction a = s.from_linear_index(i);
        double z = 0.0;
        for (int ag = 0; ag < n; ++ag) z += p.theta()[nhot_position(s, ag, a[ag])];
        CHECK(score(p, a) == doctest::Approx(z).epsilon(1e-15));
        CHECK(score(p, encode_nhot(s, a)) == doctest::Approx(z).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("eta examples") {
  JointActionSpace s(1, 2);
  CHECK(eta(SurrogateParams::zeros(s, 3.0, 0.2), JointAction{1}) == 0.0);
  SurrogateParams p1(s, {std::sinh(1.0), 0.0});
  CHECK(eta(p1, JointAction{0}) == doctest::Approx(1.0).epsilon(1e-14));
  SurrogateParams p2(s, {2.0 * std::sinh(0.7), 0.0}, 2.0, 0.5);
  CHECK(std::abs(eta(p2, JointAction{0}) - 1.4) <= 1e-12);
}

TEST_CASE("link is odd and strictly increasing") {
  for (double c : {0.5, 1.0, 4.0}) {
    for (double alpha : {0.25, 1.0, 3.0}) {
      double prev = -std::numeric_limits<double>::infinity();
      for (double z = -50.0; z <= 50.0; z += 0.37) {
        const double g = link(z, c, alpha);
        CHECK(g > prev);
        CHECK(link(-z, c, alpha) == -g);
        CHECK(link_derivative(z, c, alpha) > 0.0);
        prev = g;
      }
    }
  }
  CHECK(std::isfinite(link(1e300, 1.0, 1.0)));
  CHECK(link(1e6, 1.0, 1.0) == doctest::Approx(std::log(2e6)).epsilon(1e-12));
}

TEST_CASE("delta1 examples") {
  JointActionSpace s(2, 3);
  SurrogateParams flat(s, {2, 2, 2, 0, 1, 0});
  CHECK(delta1(flat, {1, 1}, {0, 2}) == 0.0);
  const auto zero = SurrogateParams::zeros(s);
  for (const auto& nb : neighbors(s, {0, 0})) CHECK(delta1(zero, {0, 0}, nb.direction) == 0.0);
  SurrogateParams p(s, {0, 1, 0, 0, 0, 0});
  CHECK(delta1(p, {0, 0}, {0, 1}) == doctest::Approx(std::asinh(1.0)).epsilon(1e-14));
  // Cross-check against the full eta table.
  CHECK(delta1(p, {0, 0}, {0, 1}) == eta(p, JointAction{1, 0}) - eta(p, JointAction{0, 0}));
  CHECK_THROWS_AS(delta1(p, {0, 0}, {0, 0}), InfeasibleDeviation);
}

TEST_CASE("delta2 example from the link formula") {
  JointActionSpace s(2, 2);
  SurrogateParams p(s, {0, 1, 0, 1});
  const double expected = std::asinh(2.0) - 2.0 * std::asinh(1.0);
  CHECK(delta2(p, {0, 0}, {0, 1}, {1, 1}) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(expected == doctest::Approx(-0.31911).epsilon(1e-4));
  CHECK_THROWS_AS(delta2(p, {0, 0}, {0, 1}, {0, 1}), InvalidPair);
}

TEST_CASE("delta2 is symmetric, exhaustive n,d <= 3 and 100 random theta") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    for (int n = 2; n <= 3; ++n) {
      for (int d = 2; d <= 3; ++d) {
        JointActionSpace s(n, d);
        const auto p = random_params(s, rng, 2.0);
        for (std::uint64_t i = 0; i < *s.cardinality(); ++i) {
          const JointAction a = s.from_linear_index(i);
          for (const auto& [u, v] : feasible_pairs(s, a)) {
            REQUIRE(std::abs(delta2(p, a, u, v) - delta2(p, a, v, u)) <= 1e-12);
          }
        }
      }
    }
  }
}

TEST_CASE("decomposition residual") {
  Rng rng(23);
  JointActionSpace s(2, 3);
  CHECK(decomposition_residual(SurrogateParams::zeros(s), {0, 0}, {0, 1}, {1, 2}) == 0.0);
  for (int trial = 0; trial < 10000; ++trial) {
    JointActionSpace big(2 + static_cast<int>(uniform_below(rng, 5)), 2 + static_cast<int>(uniform_below(rng, 6)));
    const auto p = random_params(big, rng, 3.0, 0.5 + uniform_unit(rng), 0.5 + uniform_unit(rng));
    const JointAction a = random_action(big, rng);
    const auto [u, v] = sample_direction_pair(big, a, rng);
    const double scale = std::max(1.0, std::abs(eta(p, apply_pair(a, u, v))) + std::abs(eta(p, a)));
    REQUIRE(std::abs(decomposition_residual(p, a, u, v)) <= 1e-12 * scale);
  }
  // Extreme magnitudes.
  SurrogateParams huge(s, {1e6, 1e6 + 1, 2e6, 0, 3.0, -1e6});
  const double r = decomposition_residual(huge, {0, 0}, {0, 1}, {1, 2});
  CHECK(std::abs(r) <= 1e-9 * std::abs(eta(huge, JointAction{0, 0})));
}

TEST_CASE("predict4 consistency") {
  Rng rng(29);
  JointActionSpace s(3, 3);
  const auto zero = predict4(SurrogateParams::zeros(s), {0, 0, 0}, {0, 1}, {2, 2});
  for (double x : zero) CHECK(x == 0.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto p = random_params(s, rng, 2.0);
    const JointAction a = random_action(s, rng);
    const auto [u, v] = sample_direction_pair(s, a, rng);
    const auto out = predict4(p, a, u, v);
    REQUIRE(std::abs(out[2] - (out[1] - out[0])) <= 1e-12 * std::max(1.0, std::abs(out[1])));
    REQUIRE(out[0] == eta(p, a));
    REQUIRE(out[1] == eta(p, apply_direction(a, u)));
    REQUIRE(out[2] == delta1(p, a, u));
    REQUIRE(out[3] == delta2(p, a, u, v));
  }
}

TEST_CASE("supervision sample checks target consistency") {
  CHECK_NOTHROW(SupervisionSample({0, 0}, {0, 1}, Direction{1, 1}, {1.0, 3.0, 2.0, 0.5}));
  CHECK_THROWS_AS(SupervisionSample({0, 0}, {0, 1}, Direction{1, 1}, {1.0, 3.0, 1.0, 0.5}),
                  InvalidArgument);
  CHECK_THROWS_AS(SupervisionSample({0, 0}, {0, 1}, Direction{0, 2}, {1.0, 3.0, 2.0, 0.5}),
                  InvalidPair);
  const auto f = [](const JointAction& a) { return 10.0 * a[0] + a[1] + (a[0] * a[1] == 1 ? 5.0 : 0.0); };
  const auto x = SupervisionSample::from_rewards({0, 0}, {0, 1}, Direction{1, 1}, f);
  CHECK(x.y()[0] == 0.0);
  CHECK(x.y()[1] == 10.0);
  CHECK(x.y()[2] == 10.0);
  CHECK(x.y()[3] == 5.0);
}

TEST_CASE("loss examples") {
  JointActionSpace s(2, 3);
  Rng rng(31);
  const auto p = random_params(s, rng);
  const RewardLookup self = [&p](const JointAction& a) { return eta(p, a); };
  const auto batch = random_batch(s, rng, 8, self);
  CHECK(nonuct_loss(p, batch) <= 1e-24);

  const auto zero = SurrogateParams::zeros(s);
  // yhat = 0, so y = -1 everywhere gives a residual of +1 in each component.
  const std::vector<SupervisionSample> one{SupervisionSample({0, 0}, {0, 1}, Direction{1, 1}, {-1.0, -2.0, -1.0, -1.0})};
  const auto out = predict4(zero, {0, 0}, {0, 1}, {1, 1});
  CHECK(out[0] == 0.0);
  // residuals: [1, 2, 1, 1] -> 1/4 (1 + 4 + 1 + 1)
  CHECK(nonuct_loss(zero, one) == doctest::Approx(7.0 / 4.0));
  const std::vector<SupervisionSample> unit{SupervisionSample({0, 0}, {0, 1}, Direction{1, 1}, {-1.0, -1.0, 0.0, -1.0})};
  // A consistent sample forces the third residual to r1 - r0.
  CHECK(nonuct_loss(zero, unit) == doctest::Approx(0.75));
  CHECK(composite_error(zero, unit[0]) == doctest::Approx(3.0));
  CHECK_THROWS_AS(nonuct_loss(zero, std::span<const SupervisionSample>{}), EmptyBatch);
}

TEST_CASE("loss matches an independent implementation") {
  Rng rng(37);
  for (int trial = 0; trial < 200; ++trial) {
    JointActionSpace s(1 + static_cast<int>(uniform_below(rng, 4)), 2 + static_cast<int>(uniform_below(rng, 3)));
    const auto p = random_params(s, rng, 1.5, 0.5 + uniform_unit(rng), 0.5 + uniform_unit(rng));
    std::vector<double> table(*s.cardinality());
    for (auto& t : table) t = 4.0 * uniform_unit(rng) - 2.0;
    const RewardLookup f = [&](const JointAction& a) { return table[s.linear_index(a)]; };
    const auto batch = random_batch(s, rng, 1 + static_cast<int>(uniform_below(rng, 6)), f);
    REQUIRE(nonuct_loss(p, batch) == doctest::Approx(reference_loss(p, batch)).epsilon(1e-12));
  }
}

TEST_CASE("gradient vanishes at a zero-loss point and is sparse") {
  JointActionSpace s(3, 4);
  Rng rng(41);
  const auto p = random_params(s, rng);
  const RewardLookup self = [&p](const JointAction& a) { return eta(p, a); };
  const auto batch = random_batch(s, rng, 5, self);
  for (double g : loss_gradient(p, batch)) CHECK(std::abs(g) <= 1e-12);

  const RewardLookup other = [](const JointAction& a) { return static_cast<double>(a[0] * a[1] + a[2]); };
  const std::vector<SupervisionSample> one{SupervisionSample::from_rewards({0, 0, 0}, {0, 1}, Direction{1, 2}, other)};
  const auto g = loss_gradient(p, one);
  for (int ag = 0; ag < 3; ++ag) {
    for (int j = 0; j < 4; ++j) {
      const bool touched = (ag == 0 && (j == 0 || j == 1)) || (ag == 1 && (j == 0 || j == 2)) ||
                           (ag == 2 && j == 0);
      if (!touched) CHECK(g[nhot_position(s, ag, j)] == 0.0);
    }
  }
}

TEST_CASE("gradient matches central differences") {
  Rng rng(43);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    JointActionSpace s(1 + static_cast<int>(uniform_below(rng, 4)), 2 + static_cast<int>(uniform_below(rng, 3)));
    const auto p = random_params(s, rng, 1.0, 0.5 + uniform_unit(rng), 0.5 + uniform_unit(rng));
    std::vector<double> table(*s.cardinality());
    for (auto& t : table) t = 4.0 * uniform_unit(rng) - 2.0;
    const RewardLookup f = [&](const JointAction& a) { return table[s.linear_index(a)]; };
    const auto batch = random_batch(s, rng, 3, f);
    const auto g = loss_gradient(p, batch);
    std::vector<double> theta(p.theta().begin(), p.theta().end());
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      auto plus = theta;
      auto minus = theta;
      plus[k] += h;
      minus[k] -= h;
      const double fd = (nonuct_loss(p.with_theta(plus), batch) - nonuct_loss(p.with_theta(minus), batch)) / (2 * h);
      num += (fd - g[k]) * (fd - g[k]);
      den += g[k] * g[k];
    }
    REQUIRE(std::sqrt(num) <= 1e-6 * std::max(1.0, std::sqrt(den)));
  }
}

TEST_CASE("sgd step edge cases") {
  JointActionSpace s(2, 3);
  Rng rng(47);
  const auto p = random_params(s, rng);
  const RewardLookup self = [&p](const JointAction& a) { return eta(p, a); };
  const auto batch = random_batch(s, rng, 4, self);
  const auto same = sgd_step(p, batch, 0.1);
  for (std::size_t k = 0; k < 6; ++k) CHECK(same.theta()[k] == doctest::Approx(p.theta()[k]).epsilon(1e-12));
  const RewardLookup f = [](const JointAction& a) { return static_cast<double>(a[0] - a[1]); };
  const auto other = random_batch(s, rng, 4, f);
  const auto frozen = sgd_step(p, other, 0.0);
  for (std::size_t k = 0; k < 6; ++k) CHECK(frozen.theta()[k] == p.theta()[k]);
  CHECK_THROWS_AS(sgd_step(p, other, -0.1), InvalidArgument);
  CHECK_THROWS_AS(sgd_step(p, other, std::nan("")), InvalidArgument);
  const RewardLookup huge = [](const JointAction& a) { return 1e6 * static_cast<double>(a[0] - a[1]); };
  const auto far = random_batch(s, rng, 4, huge);
  CHECK_THROWS_AS(sgd_step(p, far, 1e308), NumericFailure);
}

TEST_CASE("sgd is monotone in the quadratic regime") {
  JointActionSpace s(2, 3);
  Rng rng(53);
  const auto star = random_params(s, rng, 0.3);
  const RewardLookup f = [&star](const JointAction& a) { return eta(star, a); };
  const auto batch = random_batch(s, rng, 6, f);
  auto p = SurrogateParams::zeros(s);
  double prev = nonuct_loss(p, batch);
  for (int step = 0; step < 100; ++step) {
    p = sgd_step(p, batch, 0.05);
    const double cur = nonuct_loss(p, batch);
    REQUIRE(cur <= prev + 1e-9);
    prev = cur;
  }
}

TEST_CASE("realizable recovery from zero init") {
  JointActionSpace s(2, 3);
  Rng rng(59);
  std::vector<double> theta(6);
  for (auto& t : theta) t = 2.5 * (2.0 * uniform_unit(rng) - 1.0);  // |z| <= 5
  const SurrogateParams star(s, theta);
  const RewardLookup f = [&star](const JointAction& a) { return eta(star, a); };
  std::vector<SupervisionSample> batch;
  for (std::uint64_t i = 0; i < 9; ++i) {
    const JointAction a = s.from_linear_index(i);
    for (const auto& [u, v] : feasible_pairs(s, a)) {
      batch.push_back(SupervisionSample::from_rewards(a, u, v, f));
      batch.push_back(SupervisionSample::from_rewards(a, v, u, f));
    }
  }
  auto p = SurrogateParams::zeros(s);
  int steps = 0;
  while (steps < 10000 && nonuct_loss(p, batch) >= 1e-6) {
    p = sgd_step(p, batch, 0.5);
    ++steps;
  }
  CHECK(nonuct_loss(p, batch) < 1e-6);
}

TEST_CASE("gain loss and fit") {
  JointActionSpace s(3, 3);
  Rng rng(61);
  const auto p = random_params(s, rng, 0.5, 2.0, 0.5);
  const JointAction base{0, 1, 2};
  const JointAction cand{2, 1, 0};
  const auto q = fit_gain(p, base, cand, 1.25);
  CHECK(eta(q, cand) - eta(q, base) == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(eta(q, base) == eta(p, base));
  CHECK(gain_loss(q, base, cand, 1.25) <= 1e-20);
  // Only the candidate's differing entries move.
  for (std::size_t k = 0; k < s.encoding_size(); ++k) {
    const bool moved = k == nhot_position(s, 0, 2) || k == nhot_position(s, 2, 0);
    if (!moved) CHECK(q.theta()[k] == p.theta()[k]);
  }
  const auto half = fit_gain(p, base, cand, 1.25, 0.5);
  CHECK(gain_loss(half, base, cand, 1.25) < gain_loss(p, base, cand, 1.25));
  CHECK_THROWS_AS(fit_gain(p, base, cand, 1.0, 0.0), InvalidArgument);

  // Gain-loss gradient against central differences.
  const auto g = gain_loss_gradient(p, base, cand, 0.7);
  std::vector<double> theta(p.theta().begin(), p.theta().end());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    auto plus = theta;
    auto minus = theta;
    plus[k] += 1e-6;
    minus[k] -= 1e-6;
    const double fd = (gain_loss(p.with_theta(plus), base, cand, 0.7) - gain_loss(p.with_theta(minus), base, cand, 0.7)) / 2e-6;
    CHECK(fd == doctest::Approx(g[k]).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("additive score cannot turn negative singles into a positive pair") {
  // With a strictly increasing link over an additive score, every single
  // below the base forces every pair below the base.
  Rng rng(67);
  for (int trial = 0; trial < 2000; ++trial) {
    JointActionSpace s(2 + static_cast<int>(uniform_below(rng, 3)), 2 + static_cast<int>(uniform_below(rng, 3)));
    const auto p = random_params(s, rng, 2.0, 0.5 + 2 * uniform_unit(rng), 0.5 + 2 * uniform_unit(rng));
    const JointAction a = random_action(s, rng);
    bool all_negative = true;
    for (const auto& nb : neighbors(s, a)) all_negative &= delta1(p, a, nb.direction) < 0.0;
    if (!all_negative) continue;
    for (const auto& [u, v] : feasible_pairs(s, a)) {
      REQUIRE(eta(p, apply_pair(a, u, v)) - eta(p, a) < 0.0);
    }
  }
}
