#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nonzero/action_space.hpp"
#include "nonzero/rng.hpp"

namespace nonzero {

enum class TensorKind { Linear, Nonlinear, Table };

std::string to_string(TensorKind kind);
TensorKind tensor_kind_from_string(const std::string& name);

inline constexpr std::uint64_t kDefaultDenseCap = 10'000'000;

// Serializable description of a generated tensor. Table tensors are built
// from explicit values and have no spec beyond their kind.
struct TensorSpec {
  TensorKind kind = TensorKind::Linear;
  int n = 2;
  int d = 3;
  std::uint64_t seed = 0;
  std::uint64_t dense_cap = kDefaultDenseCap;

  friend bool operator==(const TensorSpec&, const TensorSpec&) = default;
};

nlohmann::json to_json(const TensorSpec& spec);
TensorSpec tensor_spec_from_json(const nlohmann::json& j);

// Deterministic single-state payoff R(a).
//
// Nonlinear entries are
//   R(a) = sum_i a_i + 2 * N(0,1) + U(-3,3)
// where both draws are counter-hashed from (seed, linear index of a), so a
// dense table and on-demand evaluation return identical bits.
class PayoffTensor {
 public:
  static PayoffTensor make_linear(int n, int d, std::uint64_t seed = 0,
                                  std::uint64_t dense_cap = kDefaultDenseCap);
  static PayoffTensor make_nonlinear(int n, int d, std::uint64_t seed,
                                     std::uint64_t dense_cap = kDefaultDenseCap);
  static PayoffTensor from_spec(const TensorSpec& spec);
  // values indexed by linear action index; size must equal d^n.
  static PayoffTensor from_table(const JointActionSpace& space, std::vector<double> values);

  const JointActionSpace& space() const { return space_; }
  TensorKind kind() const { return spec_.kind; }
  std::uint64_t seed() const { return spec_.seed; }
  const TensorSpec& spec() const { return spec_; }
  bool is_dense() const { return !table_.empty(); }

  double reward(const JointAction& a) const;
  double reward_at(std::uint64_t index) const;

  // Closed-form value, bypassing any dense table. Not available for Table kind.
  double evaluate(std::uint64_t index) const;

  // Reward plus a fresh N(0, sigma^2) draw; sigma = 0 returns reward(a).
  double noisy_reward(const JointAction& a, double sigma, Rng& rng) const;

 private:
  PayoffTensor(JointActionSpace space, TensorSpec spec);
  void materialize();

  JointActionSpace space_;
  TensorSpec spec_;
  std::vector<double> table_;
};

// A two-agent instance where every single-agent move from `trap` loses value
// but one coordinated move to `escape` gains.
struct CoordinationTrap {
  PayoffTensor tensor;
  JointAction trap;
  JointAction escape;
};

// n = 2, d = 4. The seed relabels each agent's actions and jitters the
// payoffs; the escape's two component moves are always the mildest losses.
CoordinationTrap make_coordination_trap(std::uint64_t seed);

// Repeated play of one tensor: sum_t discount^t R(a_t) over `horizon` steps.
class EpisodicMatGame {
 public:
  explicit EpisodicMatGame(PayoffTensor tensor, int horizon = 1, double discount = 0.0,
                           double reward_noise = 0.0);

  const PayoffTensor& tensor() const { return tensor_; }
  const JointActionSpace& space() const { return tensor_.space(); }
  int horizon() const { return horizon_; }
  double discount() const { return discount_; }
  // Standard deviation of per-execution observation noise; 0 by default.
  double reward_noise() const { return reward_noise_; }

  // Reward observed when a is executed at step t (state = step index).
  double step_reward(int t, const JointAction& a, Rng& rng) const;

  // Noise-free discounted return of a full action sequence.
  double episode_return(const std::vector<JointAction>& actions) const;

 private:
  PayoffTensor tensor_;
  int horizon_;
  double discount_;
  double reward_noise_;
};

// Golden-value fixtures: one "index,value" pair per line; '#' starts a comment.
struct GoldenEntry {
  std::uint64_t index;
  double value;
};
std::vector<GoldenEntry> parse_golden(const std::string& text);
std::string format_golden(const std::vector<GoldenEntry>& entries);

}  // namespace nonzero
