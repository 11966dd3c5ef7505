#include "nonzero/action_space.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "nonzero/errors.hpp"

namespace nonzero {

std::string JointAction::to_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < actions_.size(); ++i) {
    if (i) os << ',';
    os << actions_[i];
  }
  os << ')';
  return os.str();
}

std::size_t JointActionHash::operator()(const JointAction& a) const noexcept {
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  for (int x : a) h = mix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)));
  return static_cast<std::size_t>(h);
}

JointActionSpace::JointActionSpace(int agents, int actions_per_agent)
    : agents_(agents), actions_(actions_per_agent) {
  if (agents < 1) throw InvalidArgument("agent count must be at least 1");
  if (actions_per_agent < 2) throw InvalidArgument("per-agent action count must be at least 2");

  constexpr std::uint64_t kLimit = std::numeric_limits<std::uint64_t>::max() >> 1;
  const auto d = static_cast<std::uint64_t>(actions_per_agent);
  std::uint64_t card = 1;
  bool overflow = false;
  for (int i = 0; i < agents; ++i) {
    if (card > kLimit / d) {
      overflow = true;
      break;
    }
    card *= d;
  }
  if (!overflow) {
    cardinality_ = card;
    strides_.assign(static_cast<std::size_t>(agents), 1);
    for (int i = agents - 2; i >= 0; --i) {
      strides_[static_cast<std::size_t>(i)] = strides_[static_cast<std::size_t>(i + 1)] * d;
    }
  }
}

double JointActionSpace::log_cardinality() const {
  return static_cast<double>(agents_) * std::log(static_cast<double>(actions_));
}

bool JointActionSpace::contains(const JointAction& a) const {
  if (a.size() != static_cast<std::size_t>(agents_)) return false;
  for (int x : a) {
    if (x < 0 || x >= actions_) return false;
  }
  return true;
}

void JointActionSpace::validate(const JointAction& a) const {
  if (a.size() != static_cast<std::size_t>(agents_)) {
    throw InvalidAction("joint action " + a.to_string() + " has " + std::to_string(a.size()) +
                        " entries, expected " + std::to_string(agents_));
  }
  for (int x : a) {
    if (x < 0 || x >= actions_) {
      throw InvalidAction("joint action " + a.to_string() + " has an entry outside [0, " +
                          std::to_string(actions_) + ")");
    }
  }
}

void JointActionSpace::validate(const Direction& u) const {
  if (u.agent < 0 || u.agent >= agents_ || u.target < 0 || u.target >= actions_) {
    throw InvalidAction("direction (" + std::to_string(u.agent) + "<-" + std::to_string(u.target) +
                        ") outside the action space");
  }
}

std::uint64_t JointActionSpace::stride(int agent) const {
  if (!cardinality_) throw InvalidArgument("action space too large for linear indexing");
  return strides_[static_cast<std::size_t>(agent)];
}

std::uint64_t JointActionSpace::linear_index(const JointAction& a) const {
  if (!cardinality_) throw InvalidArgument("action space too large for linear indexing");
  validate(a);
  std::uint64_t index = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    index += static_cast<std::uint64_t>(a[i]) * strides_[i];
  }
  return index;
}

JointAction JointActionSpace::from_linear_index(std::uint64_t index) const {
  if (!cardinality_) throw InvalidArgument("action space too large for linear indexing");
  if (index >= *cardinality_) throw InvalidAction("linear index out of range");
  std::vector<int> actions(static_cast<std::size_t>(agents_));
  for (std::size_t i = 0; i < actions.size(); ++i) {
    actions[i] = static_cast<int>(index / strides_[i]);
    index %= strides_[i];
  }
  return JointAction(std::move(actions));
}

JointAction JointActionSpace::uniform_action(Rng& rng) const {
  std::vector<int> actions(static_cast<std::size_t>(agents_));
  for (auto& x : actions) x = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(actions_)));
  return JointAction(std::move(actions));
}

std::vector<double> encode_nhot(const JointActionSpace& space, const JointAction& a) {
  space.validate(a);
  std::vector<double> psi(space.encoding_size(), 0.0);
  for (int i = 0; i < space.agents(); ++i) {
    psi[nhot_position(space, i, a[static_cast<std::size_t>(i)])] = 1.0;
  }
  return psi;
}

JointAction apply_direction(const JointAction& a, const Direction& u) {
  if (u.agent < 0 || static_cast<std::size_t>(u.agent) >= a.size()) {
    throw InvalidAction("direction agent outside the joint action");
  }
  if (!is_feasible(a, u)) {
    throw InfeasibleDeviation("direction (" + std::to_string(u.agent) + "<-" +
                              std::to_string(u.target) + ") leaves " + a.to_string() + " unchanged");
  }
  JointAction out = a;
  out[static_cast<std::size_t>(u.agent)] = u.target;
  return out;
}

JointAction apply_pair(const JointAction& a, const Direction& u, const Direction& v) {
  if (u.agent == v.agent) {
    throw InvalidPair("paired directions must move distinct agents");
  }
  return apply_direction(apply_direction(a, u), v);
}

std::vector<Neighbor> neighbors(const JointActionSpace& space, const JointAction& a) {
  space.validate(a);
  std::vector<Neighbor> out;
  out.reserve(static_cast<std::size_t>(space.agents() * (space.actions_per_agent() - 1)));
  for (int i = 0; i < space.agents(); ++i) {
    for (int j = 0; j < space.actions_per_agent(); ++j) {
      if (j == a[static_cast<std::size_t>(i)]) continue;
      JointAction b = a;
      b[static_cast<std::size_t>(i)] = j;
      out.push_back({Direction{i, j}, std::move(b)});
    }
  }
  return out;
}

std::vector<std::pair<Direction, Direction>> feasible_pairs(const JointActionSpace& space,
                                                            const JointAction& a) {
  space.validate(a);
  std::vector<std::pair<Direction, Direction>> out;
  out.reserve(static_cast<std::size_t>(pair_count(space)));
  const int n = space.agents();
  const int d = space.actions_per_agent();
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      for (int j = 0; j < d; ++j) {
        if (j == a[static_cast<std::size_t>(i)]) continue;
        for (int l = 0; l < d; ++l) {
          if (l == a[static_cast<std::size_t>(k)]) continue;
          out.emplace_back(Direction{i, j}, Direction{k, l});
        }
      }
    }
  }
  return out;
}

std::uint64_t pair_count(const JointActionSpace& space) {
  const auto n = static_cast<std::uint64_t>(space.agents());
  const auto d1 = static_cast<std::uint64_t>(space.actions_per_agent() - 1);
  return n * (n - 1) / 2 * d1 * d1;
}

namespace {

int random_other_action(int current, int d, Rng& rng) {
  // Uniform over the d-1 actions different from current.
  int j = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(d - 1)));
  return j >= current ? j + 1 : j;
}

}  // namespace

std::pair<Direction, Direction> sample_direction_pair(const JointActionSpace& space,
                                                      const JointAction& a, Rng& rng) {
  const int n = space.agents();
  if (n < 2) throw NoPairAvailable("a direction pair needs at least two agents");
  space.validate(a);
  const int d = space.actions_per_agent();
  const int i = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(n)));
  int k = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(n - 1)));
  if (k >= i) ++k;
  const Direction u{i, random_other_action(a[static_cast<std::size_t>(i)], d, rng)};
  const Direction v{k, random_other_action(a[static_cast<std::size_t>(k)], d, rng)};
  return {u, v};
}

Direction sample_direction(const JointActionSpace& space, const JointAction& a, Rng& rng) {
  space.validate(a);
  const int i = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(space.agents())));
  return Direction{i, random_other_action(a[static_cast<std::size_t>(i)],
                                          space.actions_per_agent(), rng)};
}

int hamming_distance(const JointAction& a, const JointAction& b) {
  if (a.size() != b.size()) throw InvalidAction("hamming distance of mismatched joint actions");
  int dist = 0;
  for (std::size_t i = 0; i < a.size(); ++i) dist += a[i] != b[i];
  return dist;
}

}  // namespace nonzero
