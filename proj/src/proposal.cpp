#include "nonzero/proposal.hpp"

#include <algorithm>
#include <unordered_set>

#include "nonzero/errors.hpp"

namespace nonzero {

void ProposalConfig::validate() const {
  if (k_single < 0 || k_pair < 0) throw InvalidArgument("proposal counts must be non-negative");
  if (k_single + k_pair < 1) throw InvalidArgument("proposal needs k_single + k_pair >= 1");
  if (candidate_cap < 1) throw InvalidArgument("candidate cap must be positive");
  if (k_single + k_pair > candidate_cap) {
    throw InvalidArgument("k_single + k_pair exceeds the candidate cap");
  }
  if (pair_sample_budget < 1) throw InvalidArgument("pair sample budget must be positive");
}

nlohmann::json to_json(const ProposalConfig& cfg) {
  return {{"k_single", cfg.k_single},
          {"k_pair", cfg.k_pair},
          {"pair_sample_budget", cfg.pair_sample_budget},
          {"candidate_cap", cfg.candidate_cap}};
}

nlohmann::json to_json(const ScoredProposal& p) {
  nlohmann::json j = {{"candidate", p.candidate.values()},
                      {"origin", p.origin.values()},
                      {"kind", p.kind == ProposalKind::Single ? "single" : "pair"},
                      {"u", {p.u.agent, p.u.target}},
                      {"score", p.score}};
  if (p.v) {
    j["v"] = {p.v->agent, p.v->target};
    j["interaction"] = p.interaction;
  }
  return j;
}

std::vector<ScoredProposal> score_singles(const SurrogateParams& p, const JointAction& base) {
  const double e0 = eta(p, base);
  std::vector<ScoredProposal> out;
  for (auto& nb : neighbors(p.space(), base)) {
    const double s = eta(p, nb.action) - e0;
    out.push_back({std::move(nb.action), base, ProposalKind::Single, nb.direction, std::nullopt,
                   s, 0.0});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ScoredProposal& x, const ScoredProposal& y) { return x.score > y.score; });
  return out;
}

namespace {

// Decodes the k-th entry of the feasible_pairs enumeration.
std::pair<Direction, Direction> pair_at(const JointActionSpace& space, const JointAction& a,
                                        std::uint64_t k) {
  const int n = space.agents();
  const auto d1 = static_cast<std::uint64_t>(space.actions_per_agent() - 1);
  const std::uint64_t block = d1 * d1;
  std::uint64_t b = k / block;
  const std::uint64_t r = k % block;
  int i = 0;
  while (b >= static_cast<std::uint64_t>(n - 1 - i)) {
    b -= static_cast<std::uint64_t>(n - 1 - i);
    ++i;
  }
  const int kk = i + 1 + static_cast<int>(b);
  auto skip = [](int x, int current) { return x >= current ? x + 1 : x; };
  const int j = skip(static_cast<int>(r / d1), a[static_cast<std::size_t>(i)]);
  const int l = skip(static_cast<int>(r % d1), a[static_cast<std::size_t>(kk)]);
  return {Direction{i, j}, Direction{kk, l}};
}

}  // namespace

std::vector<ScoredProposal> score_pairs(const SurrogateParams& p, const JointAction& base,
                                        Rng& rng, std::uint64_t budget) {
  const auto& space = p.space();
  space.validate(base);
  if (space.agents() < 2) return {};
  const std::uint64_t total = pair_count(space);

  std::vector<std::pair<Direction, Direction>> pairs;
  if (total <= budget) {
    pairs = feasible_pairs(space, base);
  } else {
    // Floyd's sampling of `budget` distinct enumeration indices.
    std::unordered_set<std::uint64_t> chosen;
    for (std::uint64_t j = total - budget; j < total; ++j) {
      const std::uint64_t t = uniform_below(rng, j + 1);
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    std::vector<std::uint64_t> order(chosen.begin(), chosen.end());
    std::sort(order.begin(), order.end());
    for (std::uint64_t k : order) pairs.push_back(pair_at(space, base, k));
  }

  const double e0 = eta(p, base);
  std::vector<ScoredProposal> out;
  out.reserve(pairs.size());
  for (const auto& [u, v] : pairs) {
    const JointAction au = apply_direction(base, u);
    const JointAction av = apply_direction(base, v);
    JointAction auv = apply_direction(au, v);
    const double e_uv = eta(p, auv);
    const double mixed = e_uv - eta(p, au) - eta(p, av) + e0;
    out.push_back({std::move(auv), base, ProposalKind::Pair, u, v, e_uv - e0, mixed});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ScoredProposal& x, const ScoredProposal& y) { return x.score > y.score; });
  return out;
}

const JointAction& best_by_eta(const SurrogateParams& p, std::span<const JointAction> candidates) {
  if (candidates.empty()) throw InvalidArgument("argmax over an empty candidate set");
  const JointAction* best = &candidates[0];
  double best_eta = eta(p, *best);
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    const double e = eta(p, candidates[k]);
    if (e > best_eta || (e == best_eta && candidates[k] < *best)) {
      best = &candidates[k];
      best_eta = e;
    }
  }
  return *best;
}

std::vector<ScoredProposal> propose_scored(const SurrogateParams& p,
                                           std::span<const JointAction> candidates,
                                           const ProposalConfig& cfg, Rng& rng,
                                           std::size_t room, const ActionFilter& exclude) {
  cfg.validate();
  if (room == 0) return {};
  const JointAction base = best_by_eta(p, candidates);
  std::unordered_set<JointAction, JointActionHash> present(candidates.begin(), candidates.end());
  auto admissible = [&](const JointAction& c) {
    return !present.contains(c) && !(exclude && exclude(c));
  };

  std::vector<ScoredProposal> picked;
  auto take = [&](std::vector<ScoredProposal> ranked, int quota) {
    int taken = 0;
    for (auto& s : ranked) {
      if (taken == quota) break;
      if (!admissible(s.candidate)) continue;
      present.insert(s.candidate);
      picked.push_back(std::move(s));
      ++taken;
    }
  };
  if (cfg.k_single > 0) take(score_singles(p, base), cfg.k_single);
  if (cfg.k_pair > 0) take(score_pairs(p, base, rng, cfg.pair_sample_budget), cfg.k_pair);

  std::stable_sort(picked.begin(), picked.end(),
                   [](const ScoredProposal& x, const ScoredProposal& y) { return x.score > y.score; });
  if (picked.size() > room) picked.resize(room);
  return picked;
}

std::vector<JointAction> propose(const SurrogateParams& p,
                                 std::span<const JointAction> candidates,
                                 const ProposalConfig& cfg, Rng& rng) {
  const auto cap = static_cast<std::size_t>(cfg.candidate_cap);
  const std::size_t room = candidates.size() >= cap ? 0 : cap - candidates.size();
  std::vector<JointAction> out;
  for (auto& s : propose_scored(p, candidates, cfg, rng, room)) out.push_back(std::move(s.candidate));
  return out;
}

}  // namespace nonzero
