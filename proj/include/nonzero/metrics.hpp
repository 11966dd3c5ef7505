#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "nonzero/action_space.hpp"
#include "nonzero/oracle.hpp"

namespace nonzero {

// R_T = number of steps t <= T with a_t outside the local set; entry T-1 holds R_T.
std::vector<double> indicator_regret(std::span<const JointAction> actions,
                                     const JointActionSpace& space, const LocalSet& local);

// Cumulative max(0, f(m_t) - f(a_t)) where m_t is the local maximizer
// nearest to a_t in Hamming distance, ties to the higher value.
std::vector<double> gap_regret(std::span<const JointAction> actions, const Landscape& f,
                               const LocalSet& local);

// Least-squares slope of log R_t against log t over integer t in [t_min, t_max]
// (1-based). Requires t_max >= 10 t_min and positive values in the window.
double loglog_slope(std::span<const double> series, std::int64_t t_min, std::int64_t t_max);

struct HittingTime {
  std::int64_t time = 0;  // 1-based; budget + 1 when censored
  bool censored = false;
};

HittingTime hitting_time(std::span<const JointAction> actions, const JointActionSpace& space,
                         const LocalSet& local, std::int64_t budget);

struct SeparationRatio {
  double ratio = 0.0;  // T_ucb / T_nonzero
  bool ucb_censored = false;
  bool nonzero_censored = false;
  // False when both runs are censored.
  bool comparable = true;
  // A censored UCB time makes the ratio a lower bound, a censored NonZero
  // time an upper bound.
  bool lower_bound() const { return ucb_censored && !nonzero_censored; }
};

SeparationRatio separation_ratio(const HittingTime& ucb, const HittingTime& nonzero);
SeparationRatio separation_ratio(std::span<const JointAction> ucb_actions,
                                 std::span<const JointAction> nonzero_actions,
                                 const JointActionSpace& space, const LocalSet& local,
                                 std::int64_t budget);

struct TheoryConstants {
  double zeta1 = 0.0;
  double zeta2 = 0.0;
  double zeta3 = 0.0;
  double eps = 0.0;
  double c1 = 1.0;
  double eps2 = 0.0;   // 6 sqrt(zeta3) eps
  double nu = 0.0;     // c1 min(eps^2 / (zeta2 + 1), eps^1.5 / sqrt(zeta3))
  double kappa = 0.0;  // max(4 zeta2 / eps^2, sqrt(zeta3) / eps^1.5)
};

// Terms in sqrt(zeta3) are dropped when zeta3 = 0.
TheoryConstants theory_constants(const SmoothnessReport& report, double eps, double c1 = 1.0);

nlohmann::json to_json(const HittingTime& h);
nlohmann::json to_json(const SeparationRatio& s);
nlohmann::json to_json(const TheoryConstants& t);

// Summary statistics over seeds.
double mean(std::span<const double> xs);
double stddev(std::span<const double> xs);  // sample standard deviation; 0 for < 2 values
double quantile(std::span<const double> xs, double q);  // linear interpolation
double median(std::span<const double> xs);

}  // namespace nonzero
