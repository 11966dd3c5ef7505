#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "nonzero/action_space.hpp"
#include "nonzero/rng.hpp"
#include "nonzero/surrogate.hpp"

namespace nonzero {

struct ProposalConfig {
  int k_single = 2;
  // 0 gives the singles-only variant.
  int k_pair = 2;
  // Pairs are scored exhaustively up to this many, then sampled.
  std::uint64_t pair_sample_budget = 4096;
  // Maximum |C(s)|.
  int candidate_cap = 16;

  // Throws InvalidArgument.
  void validate() const;
};

nlohmann::json to_json(const ProposalConfig& cfg);

enum class ProposalKind { Single, Pair };

struct ScoredProposal {
  JointAction candidate;
  JointAction origin;
  ProposalKind kind = ProposalKind::Single;
  Direction u;
  std::optional<Direction> v;
  // Predicted gain eta(candidate) - eta(origin).
  double score = 0.0;
  // delta2 for pairs, 0 for singles.
  double interaction = 0.0;
};

nlohmann::json to_json(const ScoredProposal& p);

// Every feasible single deviation, best first; ties by (agent, target).
std::vector<ScoredProposal> score_singles(const SurrogateParams& p, const JointAction& base);

// Distinct-agent pairs scored by the full coordinated gain, best first; ties
// by (u.agent, v.agent, u.target, v.target). Exhaustive when the pair count is
// within budget, otherwise `budget` distinct pairs drawn uniformly. Empty for n = 1.
std::vector<ScoredProposal> score_pairs(const SurrogateParams& p, const JointAction& base,
                                        Rng& rng, std::uint64_t budget);

// argmax of eta over the candidates; ties to the smallest linear index.
const JointAction& best_by_eta(const SurrogateParams& p, std::span<const JointAction> candidates);

using ActionFilter = std::function<bool(const JointAction&)>;

// Up to k_single singles and k_pair pairs around best_by_eta(candidates),
// skipping current candidates and anything `exclude` rejects, then trimmed
// to `room` entries by dropping the lowest scores. Best first.
std::vector<ScoredProposal> propose_scored(const SurrogateParams& p,
                                           std::span<const JointAction> candidates,
                                           const ProposalConfig& cfg, Rng& rng,
                                           std::size_t room, const ActionFilter& exclude = {});

// New actions for a node, never exceeding candidate_cap in total.
std::vector<JointAction> propose(const SurrogateParams& p,
                                 std::span<const JointAction> candidates,
                                 const ProposalConfig& cfg, Rng& rng);

}  // namespace nonzero
