#include "nonzero/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "nonzero/errors.hpp"

namespace nonzero {

std::vector<double> indicator_regret(std::span<const JointAction> actions,
                                     const JointActionSpace& space, const LocalSet& local) {
  std::vector<double> out;
  out.reserve(actions.size());
  double total = 0.0;
  for (const auto& a : actions) {
    total += local.contains(space, a) ? 0.0 : 1.0;
    out.push_back(total);
  }
  return out;
}

std::vector<double> gap_regret(std::span<const JointAction> actions, const Landscape& f,
                               const LocalSet& local) {
  if (local.count() == 0) throw InvalidArgument("gap regret needs a nonempty local set");
  const auto& space = f.space();
  std::vector<JointAction> members;
  for (std::uint64_t k : local.members()) members.push_back(space.from_linear_index(k));

  std::unordered_map<std::uint64_t, double> gap_cache;
  auto gap_of = [&](const JointAction& a) {
    const std::uint64_t idx = space.linear_index(a);
    if (local.contains(idx)) return 0.0;
    if (auto it = gap_cache.find(idx); it != gap_cache.end()) return it->second;
    int best_dist = std::numeric_limits<int>::max();
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < members.size(); ++m) {
      const int dist = hamming_distance(a, members[m]);
      const double value = f.at(local.members()[m]);
      if (dist < best_dist || (dist == best_dist && value > best_value)) {
        best_dist = dist;
        best_value = value;
      }
    }
    const double gap = std::max(0.0, best_value - f.at(idx));
    gap_cache.emplace(idx, gap);
    return gap;
  };

  std::vector<double> out;
  out.reserve(actions.size());
  double total = 0.0;
  for (const auto& a : actions) {
    total += gap_of(a);
    out.push_back(total);
  }
  return out;
}

double loglog_slope(std::span<const double> series, std::int64_t t_min, std::int64_t t_max) {
  if (t_min < 1 || t_max > static_cast<std::int64_t>(series.size()) || t_min >= t_max) {
    throw InvalidArgument("slope window outside the series");
  }
  if (t_max < 10 * t_min) throw InvalidArgument("slope window must span a factor of 10");
  double sx = 0.0;
  double sy = 0.0;
  double sxx = 0.0;
  double sxy = 0.0;
  const auto count = static_cast<double>(t_max - t_min + 1);
  for (std::int64_t t = t_min; t <= t_max; ++t) {
    const double r = series[static_cast<std::size_t>(t - 1)];
    if (!(r > 0.0)) {
      throw InvalidArgument("log-log slope needs positive values; R_" + std::to_string(t) +
                            " = " + std::to_string(r));
    }
    const double x = std::log(static_cast<double>(t));
    const double y = std::log(r);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double mx = sx / count;
  const double my = sy / count;
  return (sxy - count * mx * my) / (sxx - count * mx * mx);
}

HittingTime hitting_time(std::span<const JointAction> actions, const JointActionSpace& space,
                         const LocalSet& local, std::int64_t budget) {
  const auto limit = std::min<std::size_t>(actions.size(), static_cast<std::size_t>(budget));
  for (std::size_t t = 0; t < limit; ++t) {
    if (local.contains(space, actions[t])) return {static_cast<std::int64_t>(t) + 1, false};
  }
  return {budget + 1, true};
}

SeparationRatio separation_ratio(const HittingTime& ucb, const HittingTime& nonzero) {
  SeparationRatio s;
  s.ucb_censored = ucb.censored;
  s.nonzero_censored = nonzero.censored;
  s.comparable = !(ucb.censored && nonzero.censored);
  s.ratio = static_cast<double>(ucb.time) / static_cast<double>(nonzero.time);
  return s;
}

SeparationRatio separation_ratio(std::span<const JointAction> ucb_actions,
                                 std::span<const JointAction> nonzero_actions,
                                 const JointActionSpace& space, const LocalSet& local,
                                 std::int64_t budget) {
  return separation_ratio(hitting_time(ucb_actions, space, local, budget),
                          hitting_time(nonzero_actions, space, local, budget));
}

TheoryConstants theory_constants(const SmoothnessReport& report, double eps, double c1) {
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  if (!(c1 > 0.0)) throw InvalidArgument("c1 must be positive");
  for (double z : {report.zeta1, report.zeta2, report.zeta3}) {
    if (!std::isfinite(z) || z < 0.0) throw InvalidArgument("smoothness constants must be finite");
  }
  TheoryConstants t;
  t.zeta1 = report.zeta1;
  t.zeta2 = report.zeta2;
  t.zeta3 = report.zeta3;
  t.eps = eps;
  t.c1 = c1;
  t.eps2 = 6.0 * std::sqrt(report.zeta3) * eps;
  const double curvature_nu = eps * eps / (report.zeta2 + 1.0);
  const double curvature_k = 4.0 * report.zeta2 / (eps * eps);
  if (report.zeta3 > 0.0) {
    const double root = std::sqrt(report.zeta3);
    t.nu = c1 * std::min(curvature_nu, std::pow(eps, 1.5) / root);
    t.kappa = std::max(curvature_k, root / std::pow(eps, 1.5));
  } else {
    t.nu = c1 * curvature_nu;
    t.kappa = curvature_k;
  }
  return t;
}

nlohmann::json to_json(const HittingTime& h) {
  return {{"time", h.time}, {"censored", h.censored}};
}

nlohmann::json to_json(const SeparationRatio& s) {
  return {{"ratio", s.ratio},
          {"ucb_censored", s.ucb_censored},
          {"nonzero_censored", s.nonzero_censored},
          {"comparable", s.comparable}};
}

nlohmann::json to_json(const TheoryConstants& t) {
  return {{"zeta1", t.zeta1}, {"zeta2", t.zeta2}, {"zeta3", t.zeta3}, {"eps", t.eps},
          {"c1", t.c1},       {"eps2", t.eps2},   {"nu", t.nu},       {"kappa", t.kappa}};
}

double mean(std::span<const double> xs) {
  if (xs.empty()) throw InvalidArgument("mean of an empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double quantile(std::span<const double> xs, double q) {
  if (xs.empty()) throw InvalidArgument("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("quantile level must lie in [0, 1]");
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median(std::span<const double> xs) { return quantile(xs, 0.5); }

}  // namespace nonzero
