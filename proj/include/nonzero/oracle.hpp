#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <json.hpp>

#include "nonzero/action_space.hpp"
#include "nonzero/environment.hpp"
#include "nonzero/rng.hpp"

namespace nonzero {

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

using RewardFunction = std::function<double(const JointAction&)>;

// A reward function tabulated over every joint action, indexed linearly.
class Landscape {
 public:
  // Throws CapExceeded when d^n > cap.
  static Landscape from_tensor(const PayoffTensor& tensor,
                               std::uint64_t cap = kDefaultEnumerationCap);
  static Landscape from_function(const JointActionSpace& space, const RewardFunction& f,
                                 std::uint64_t cap = kDefaultEnumerationCap);

  const JointActionSpace& space() const { return space_; }
  std::uint64_t size() const { return values_.size(); }
  double at(std::uint64_t index) const { return values_[index]; }
  double operator()(const JointAction& a) const { return values_[space_.linear_index(a)]; }
  const std::vector<double>& values() const { return values_; }

 private:
  Landscape(JointActionSpace space, std::vector<double> values)
      : space_(std::move(space)), values_(std::move(values)) {}

  JointActionSpace space_;
  std::vector<double> values_;
};

// Throws CapExceeded with a message naming `what` when d^n > cap.
void require_enumerable(const JointActionSpace& space, std::uint64_t cap, const char* what);

struct ArgmaxResult {
  JointAction action;
  double value;
};

// Exact maximizer; ties go to the smallest linear index.
ArgmaxResult global_argmax(const Landscape& f);

// g1: best single-agent gain. g2: best distinct-agent pair gain, -inf when n = 1.
struct DeviationGains {
  double g1 = -std::numeric_limits<double>::infinity();
  double g2 = -std::numeric_limits<double>::infinity();
};

DeviationGains deviation_gains(const Landscape& f, const JointAction& a);
DeviationGains deviation_gains(const Landscape& f, std::uint64_t index);
// Neighborhood-only evaluation; usable on spaces far above the enumeration cap.
DeviationGains deviation_gains(const JointActionSpace& space, const RewardFunction& f,
                               const JointAction& a);

struct LocalOptimalityReport {
  JointAction a;
  double g1;
  double g2;
  bool is_local;
};

LocalOptimalityReport local_report(const Landscape& f, const JointAction& a, double eps1,
                                   double eps2);

// Actions with g1 <= eps1 and g2 <= eps2. Negative thresholds are rejected.
class LocalSet {
 public:
  LocalSet(std::vector<bool> membership, double eps1, double eps2);

  bool contains(std::uint64_t index) const { return membership_[index]; }
  bool contains(const JointActionSpace& space, const JointAction& a) const {
    return membership_[space.linear_index(a)];
  }
  // Member indices in ascending order.
  const std::vector<std::uint64_t>& members() const { return members_; }
  std::size_t count() const { return members_.size(); }
  std::uint64_t universe() const { return membership_.size(); }
  double eps1() const { return eps1_; }
  double eps2() const { return eps2_; }

 private:
  std::vector<bool> membership_;
  std::vector<std::uint64_t> members_;
  double eps1_;
  double eps2_;
};

// threads <= 1 runs inline; the result does not depend on the thread count.
LocalSet local_maximizer_set(const Landscape& f, double eps1, double eps2, int threads = 1);

// Per-action gains for the whole space, in linear index order.
std::vector<DeviationGains> all_deviation_gains(const Landscape& f, int threads = 1);

struct SmoothnessReport {
  double zeta1 = 0.0;  // max |f(a^(u)) - f(a)|
  double zeta2 = 0.0;  // max |mixed difference of f at a|
  double zeta3 = 0.0;  // max |mixed difference at a^(w) minus at a|
};

// Exhaustive maxima. For zeta3, w ranges over every direction feasible at a
// that keeps u and v feasible at a^(w).
SmoothnessReport estimate_smoothness(const Landscape& f, int threads = 1);

// Maxima over `samples` uniformly drawn tuples; never exceeds the exhaustive value.
SmoothnessReport sample_smoothness(const Landscape& f, std::uint64_t samples, Rng& rng);

// Second-order threshold 6 * sqrt(zeta3) * eps.
double eps2_from_zeta3(double zeta3, double eps);

nlohmann::json to_json(const DeviationGains& g);
nlohmann::json to_json(const LocalOptimalityReport& r);
nlohmann::json to_json(const SmoothnessReport& r);

}  // namespace nonzero
