#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nonzero/rng.hpp"

namespace nonzero {

// One local action index per agent.
class JointAction {
 public:
  JointAction() = default;
  explicit JointAction(std::vector<int> actions) : actions_(std::move(actions)) {}
  JointAction(std::initializer_list<int> actions) : actions_(actions) {}

  std::size_t size() const { return actions_.size(); }
  int operator[](std::size_t agent) const { return actions_[agent]; }
  int& operator[](std::size_t agent) { return actions_[agent]; }
  const std::vector<int>& values() const { return actions_; }

  auto begin() const { return actions_.begin(); }
  auto end() const { return actions_.end(); }

  friend bool operator==(const JointAction&, const JointAction&) = default;
  friend auto operator<=>(const JointAction&, const JointAction&) = default;

  std::string to_string() const;

 private:
  std::vector<int> actions_;
};

struct JointActionHash {
  std::size_t operator()(const JointAction& a) const noexcept;
};

// One-agent deviation (agent <- target).
struct Direction {
  int agent = 0;
  int target = 0;

  friend bool operator==(const Direction&, const Direction&) = default;
  friend auto operator<=>(const Direction&, const Direction&) = default;
};

inline bool is_feasible(const JointAction& a, const Direction& u) {
  return u.target != a[static_cast<std::size_t>(u.agent)];
}

// The product space of n agents with d local actions each.
class JointActionSpace {
 public:
  JointActionSpace(int agents, int actions_per_agent);

  int agents() const { return agents_; }
  int actions_per_agent() const { return actions_; }

  // d^n, or nullopt when it does not fit in 63 bits.
  std::optional<std::uint64_t> cardinality() const { return cardinality_; }
  double log_cardinality() const;

  std::size_t encoding_size() const {
    return static_cast<std::size_t>(agents_) * static_cast<std::size_t>(actions_);
  }

  bool contains(const JointAction& a) const;
  void validate(const JointAction& a) const;  // throws InvalidAction
  void validate(const Direction& u) const;    // throws InvalidAction

  // Lexicographic rank, agent 0 most significant. Requires a finite cardinality.
  std::uint64_t linear_index(const JointAction& a) const;
  JointAction from_linear_index(std::uint64_t index) const;

  // d^(n-1-agent): the index stride of one agent's digit.
  std::uint64_t stride(int agent) const;

  JointAction uniform_action(Rng& rng) const;

  friend bool operator==(const JointActionSpace&, const JointActionSpace&) = default;

 private:
  int agents_;
  int actions_;
  std::optional<std::uint64_t> cardinality_;
  std::vector<std::uint64_t> strides_;
};

// psi(a): n-hot vector in agent-major blocks, entry i*d + a_i set to 1.
std::vector<double> encode_nhot(const JointActionSpace& space, const JointAction& a);

// Position of agent i's selected entry inside the n-hot layout.
inline std::size_t nhot_position(const JointActionSpace& space, int agent, int action) {
  return static_cast<std::size_t>(agent) * static_cast<std::size_t>(space.actions_per_agent()) +
         static_cast<std::size_t>(action);
}

JointAction apply_direction(const JointAction& a, const Direction& u);
JointAction apply_pair(const JointAction& a, const Direction& u, const Direction& v);

struct Neighbor {
  Direction direction;
  JointAction action;
};

// All n(d-1) one-agent deviations, agent-major then target ascending.
std::vector<Neighbor> neighbors(const JointActionSpace& space, const JointAction& a);

// Every unordered distinct-agent pair feasible at a, with u.agent < v.agent,
// ordered by (u.agent, v.agent, u.target, v.target).
std::vector<std::pair<Direction, Direction>> feasible_pairs(const JointActionSpace& space,
                                                            const JointAction& a);

// n(n-1)/2 * (d-1)^2
std::uint64_t pair_count(const JointActionSpace& space);

// Uniform over ordered feasible pairs (u, v) on distinct agents.
std::pair<Direction, Direction> sample_direction_pair(const JointActionSpace& space,
                                                      const JointAction& a, Rng& rng);

// Uniform over the n(d-1) feasible single deviations.
Direction sample_direction(const JointActionSpace& space, const JointAction& a, Rng& rng);

int hamming_distance(const JointAction& a, const JointAction& b);

}  // namespace nonzero
