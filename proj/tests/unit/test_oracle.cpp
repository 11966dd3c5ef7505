#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "nonzero/environment.hpp"
#include "nonzero/errors.hpp"
#include "nonzero/oracle.hpp"
#include "nonzero/surrogate.hpp"

using namespace nonzero;

namespace {

Landscape constant(int n, int d, double value) {
  return Landscape::from_function(JointActionSpace(n, d), [value](const JointAction&) { return value; });
}

// Brute-force reference for the gains at a.
DeviationGains brute_gains(const Landscape& f, const JointAction& a) {
  DeviationGains g;
  const auto& s = f.space();
  for (std::uint64_t i = 0; i < f.size(); ++i) {
    const JointAction b = s.from_linear_index(i);
    const int dist = hamming_distance(a, b);
    if (dist == 1) g.g1 = std::max(g.g1, f.at(i) - f(a));
    if (dist == 2) g.g2 = std::max(g.g2, f.at(i) - f(a));
  }
  return g;
}

}  // namespace

TEST_CASE("global argmax") {
  const auto lin = Landscape::from_tensor(PayoffTensor::make_linear(3, 4));
  const auto best = global_argmax(lin);
  CHECK(best.action == JointAction{3, 3, 3});
  CHECK(best.value == 9.0);
  const auto flat = global_argmax(constant(2, 3, 1.5));
  CHECK(flat.action == JointAction{0, 0});
  CHECK(flat.value == 1.5);

  std::ifstream in(std::string(NONZERO_FIXTURE_DIR) + "/argmax_nonlinear_n2_d3_s7.golden");
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto golden = parse_golden(ss.str());
  REQUIRE(golden.size() == 1);
  const auto nl = Landscape::from_tensor(PayoffTensor::make_nonlinear(2, 3, 7));
  const auto r = global_argmax(nl);
  CHECK(nl.space().linear_index(r.action) == golden[0].index);
  CHECK(r.value == golden[0].value);
}

TEST_CASE("enumeration cap") {
  CHECK_THROWS_AS(Landscape::from_tensor(PayoffTensor::make_nonlinear(8, 10, 0)), CapExceeded);
  CHECK_THROWS_AS(Landscape::from_tensor(PayoffTensor::make_linear(3, 4), 10), CapExceeded);
  CHECK_NOTHROW(require_enumerable(JointActionSpace(6, 8), kDefaultEnumerationCap, "test"));
  CHECK_THROWS_WITH_AS(require_enumerable(JointActionSpace(8, 10), kDefaultEnumerationCap, "regret"),
                       doctest::Contains("regret"), CapExceeded);
}

TEST_CASE("deviation gains") {
  const auto lin = Landscape::from_tensor(PayoffTensor::make_linear(3, 4));
  const auto g0 = deviation_gains(lin, JointAction{0, 0, 0});
  CHECK(g0.g1 == 3.0);
  CHECK(g0.g2 == 6.0);
  const auto top = deviation_gains(lin, JointAction{3, 3, 3});
  CHECK(top.g1 <= 0.0);
  CHECK(top.g2 <= 0.0);
  const auto single = Landscape::from_tensor(PayoffTensor::make_linear(1, 3));
  const auto g = deviation_gains(single, JointAction{1});
  CHECK(g.g1 == 1.0);
  CHECK(std::isinf(g.g2));
  CHECK(g.g2 < 0.0);
}

TEST_CASE("gains agree with brute force and the functional overload") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto t = PayoffTensor::make_nonlinear(3, 3, seed);
    const auto f = Landscape::from_tensor(t);
    const RewardFunction fn = [&t](const JointAction& a) { return t.reward(a); };
    for (std::uint64_t i = 0; i < f.size(); ++i) {
      const JointAction a = f.space().from_linear_index(i);
      const auto g = deviation_gains(f, a);
      const auto b = brute_gains(f, a);
      const auto h = deviation_gains(f.space(), fn, a);
      REQUIRE(g.g1 == b.g1);
      REQUIRE(g.g2 == b.g2);
      REQUIRE(h.g1 == b.g1);
      REQUIRE(h.g2 == b.g2);
    }
  }
}

TEST_CASE("local maximizer sets") {
  for (int n = 1; n <= 4; ++n) {
    for (int d = 2; d <= 4; ++d) {
      const auto lin = Landscape::from_tensor(PayoffTensor::make_linear(n, d));
      const auto set = local_maximizer_set(lin, 0.0, 0.0);
      REQUIRE(set.count() == 1);
      REQUIRE(set.members()[0] == lin.size() - 1);
    }
  }
  const auto f = Landscape::from_tensor(PayoffTensor::make_nonlinear(3, 4, 2));
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(local_maximizer_set(f, inf, inf).count() == f.size());
  CHECK_THROWS_AS(local_maximizer_set(f, -1.0, 0.0), InvalidArgument);
}

TEST_CASE("local set properties over many tensors") {
  const double levels[] = {0.0, 0.25, 1.0, 4.0};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto f = Landscape::from_tensor(PayoffTensor::make_nonlinear(3, 3, seed));
    const auto best = f.space().linear_index(global_argmax(f).action);
    const auto gains = all_deviation_gains(f);
    for (double e1 : levels) {
      for (double e2 : levels) {
        const auto set = local_maximizer_set(f, e1, e2);
        CHECK(set.contains(best));
        for (std::uint64_t i = 0; i < f.size(); ++i) {
          REQUIRE(set.contains(i) == (gains[i].g1 <= e1 && gains[i].g2 <= e2));
          const auto report = local_report(f, f.space().from_linear_index(i), e1, e2);
          REQUIRE(report.is_local == set.contains(i));
        }
        for (double f1 : levels) {
          for (double f2 : levels) {
            if (f1 < e1 || f2 < e2) continue;
            const auto bigger = local_maximizer_set(f, f1, f2);
            for (auto m : set.members()) REQUIRE(bigger.contains(m));
          }
        }
      }
    }
  }
}

TEST_CASE("threaded results match serial") {
  const auto f = Landscape::from_tensor(PayoffTensor::make_nonlinear(4, 5, 8));
  const auto a = local_maximizer_set(f, 0.5, 0.5, 1);
  const auto b = local_maximizer_set(f, 0.5, 0.5, 4);
  CHECK(a.members() == b.members());
  const auto s1 = estimate_smoothness(f, 1);
  const auto s4 = estimate_smoothness(f, 4);
  CHECK(s1.zeta1 == s4.zeta1);
  CHECK(s1.zeta2 == s4.zeta2);
  CHECK(s1.zeta3 == s4.zeta3);
}

TEST_CASE("smoothness") {
  for (int n = 2; n <= 4; ++n) {
    for (int d = 2; d <= 4; ++d) {
      const auto r = estimate_smoothness(Landscape::from_tensor(PayoffTensor::make_linear(n, d)));
      CHECK(r.zeta1 == d - 1);
      CHECK(r.zeta2 == 0.0);
      CHECK(r.zeta3 == 0.0);
    }
  }
  const auto c = estimate_smoothness(constant(3, 3, 2.0));
  CHECK(c.zeta1 == 0.0);
  CHECK(c.zeta2 == 0.0);
  CHECK(c.zeta3 == 0.0);

  const auto t = PayoffTensor::make_nonlinear(3, 3, 6);
  const auto f = Landscape::from_tensor(t);
  const auto shifted = Landscape::from_function(f.space(), [&t](const JointAction& a) { return t.reward(a) + 17.0; });
  const auto a = estimate_smoothness(f);
  const auto b = estimate_smoothness(shifted);
  CHECK(a.zeta1 == doctest::Approx(b.zeta1).epsilon(1e-12));
  CHECK(a.zeta2 == doctest::Approx(b.zeta2).epsilon(1e-12));
  CHECK(a.zeta3 == doctest::Approx(b.zeta3).epsilon(1e-12));
}

TEST_CASE("sampled smoothness never exceeds the exhaustive value") {
  JointActionSpace s(2, 3);
  Rng rng(71);
  std::vector<double> theta(6);
  for (auto& x : theta) x = 2.0 * uniform_unit(rng) - 1.0;
  const SurrogateParams p(s, theta);
  const auto f = Landscape::from_function(s, [&p](const JointAction& a) { return eta(p, a); });
  const auto full = estimate_smoothness(f);
  const auto sampled = sample_smoothness(f, 100000, rng);
  CHECK(std::isfinite(full.zeta1));
  CHECK(std::isfinite(full.zeta2));
  CHECK(std::isfinite(full.zeta3));
  CHECK(sampled.zeta1 <= full.zeta1);
  CHECK(sampled.zeta2 <= full.zeta2);
  CHECK(sampled.zeta3 <= full.zeta3);
  CHECK(sampled.zeta1 == full.zeta1);
}

TEST_CASE("second-order threshold") {
  CHECK(eps2_from_zeta3(0.0, 0.5) == 0.0);
  CHECK(eps2_from_zeta3(4.0, 0.5) == doctest::Approx(6.0));
  CHECK(to_json(DeviationGains{}).at("g2").is_null());
}
