#include <algorithm>
#include <cmath>
#include <map>
#include <limits>
#include <memory>

#include "nonzero/errors.hpp"
#include "nonzero/planner.hpp"

namespace nonzero {

BaselineResult run_flat_ucb(const PayoffTensor& tensor, std::int64_t budget,
                            double exploration_const, std::uint64_t /*seed*/) {
  if (budget < 1) throw InvalidArgument("budget must be at least 1");
  if (!(exploration_const > 0.0)) throw InvalidArgument("exploration constant must be positive");
  const JointActionSpace& space = tensor.space();
  if (!space.cardinality()) throw CapExceeded("flat UCB needs d^n to fit in 64 bits");
  const std::uint64_t card = *space.cardinality();

  // Arms are pulled in index order first, so the pulled set is always a prefix.
  std::vector<std::int64_t> pulls;
  std::vector<double> sums;
  std::uint64_t best = 0;
  auto mean = [&](std::uint64_t k) { return sums[k] / static_cast<double>(pulls[k]); };

  BaselineResult out;
  out.trace.planner = "flat_ucb";
  out.trace.steps.reserve(static_cast<std::size_t>(budget));
  for (std::int64_t t = 1; t <= budget; ++t) {
    std::uint64_t arm;
    if (pulls.size() < card) {
      arm = pulls.size();
      pulls.push_back(0);
      sums.push_back(0.0);
    } else {
      const double log_t = std::log(static_cast<double>(t));
      arm = 0;
      double best_ucb = -std::numeric_limits<double>::infinity();
      for (std::uint64_t k = 0; k < card; ++k) {
        const double ucb =
            mean(k) + exploration_const * std::sqrt(log_t / static_cast<double>(pulls[k]));
        if (ucb > best_ucb) {
          best_ucb = ucb;
          arm = k;
        }
      }
    }
    const double r = tensor.reward_at(arm);
    const double before = pulls[arm] > 0 ? mean(arm) : 0.0;
    pulls[arm] += 1;
    sums[arm] += r;
    if (arm == best && pulls[arm] > 1 && mean(arm) < before) {
      best = 0;
      for (std::uint64_t k = 1; k < pulls.size(); ++k) {
        if (mean(k) > mean(best)) best = k;
      }
    } else if (mean(arm) > mean(best) || (mean(arm) == mean(best) && arm < best)) {
      best = arm;
    }

    StepRecord rec;
    rec.iter = t;
    rec.selected = space.from_linear_index(arm);
    rec.reward = r;
    rec.incumbent = space.from_linear_index(best);
    rec.incumbent_value = tensor.reward_at(best);
    rec.q_incumbent = mean(best);
    rec.counters.env_executions = static_cast<std::uint64_t>(t);
    out.trace.steps.push_back(std::move(rec));
  }
  for (std::uint64_t k = 0; k < pulls.size(); ++k) {
    out.visits.emplace_back(space.from_linear_index(k), pulls[k]);
  }
  return out;
}

namespace {

struct PuctNode {
  std::vector<JointAction> arms;
  std::vector<double> prior;
  std::vector<std::int64_t> visits;
  std::vector<double> values;
  std::vector<std::unique_ptr<PuctNode>> children;
  std::int64_t total = 0;
};

void fill_puct_node(PuctNode& node, const JointActionSpace& space, std::uint64_t sample_count,
                    Rng& rng) {
  const auto card = space.cardinality();
  if (card && (sample_count == 0 || sample_count >= *card)) {
    // Exhaustive: beta_hat = beta, so the corrected prior is uniform.
    for (std::uint64_t k = 0; k < *card; ++k) {
      node.arms.push_back(space.from_linear_index(k));
      node.prior.push_back(1.0 / static_cast<double>(*card));
    }
  } else {
    if (sample_count == 0) throw InvalidArgument("action space too large to search exhaustively");
    std::map<JointAction, std::uint64_t> counts;  // ordered by linear index
    for (std::uint64_t s = 0; s < sample_count; ++s) counts[space.uniform_action(rng)] += 1;
    for (const auto& [a, c] : counts) {
      node.arms.push_back(a);
      node.prior.push_back(static_cast<double>(c) / static_cast<double>(sample_count));
    }
  }
  node.visits.assign(node.arms.size(), 0);
  node.values.assign(node.arms.size(), 0.0);
  node.children.resize(node.arms.size());
}

std::size_t puct_select(const PuctNode& node, double c) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < node.arms.size(); ++k) {
    if (node.visits[k] == 0) continue;
    lo = std::min(lo, node.values[k]);
    hi = std::max(hi, node.values[k]);
  }
  const double sqrt_total = std::sqrt(static_cast<double>(node.total));
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < node.arms.size(); ++k) {
    double q = 0.0;
    if (node.visits[k] > 0 && hi > lo) q = (node.values[k] - lo) / (hi - lo);
    const double score =
        q + c * node.prior[k] * sqrt_total / (1.0 + static_cast<double>(node.visits[k]));
    if (score > best_score) {
      best = k;
      best_score = score;
    }
  }
  return best;
}

BaselineResult run_puct(const EpisodicMatGame& env, std::int64_t budget, double c,
                        std::uint64_t sample_count, std::uint64_t seed, const char* name) {
  if (budget < 1) throw InvalidArgument("budget must be at least 1");
  if (!(c > 0.0)) throw InvalidArgument("exploration constant must be positive");
  Rng rng(seed);
  const auto& space = env.space();
  PuctNode root;
  fill_puct_node(root, space, sample_count, rng);

  BaselineResult out;
  out.trace.planner = name;
  out.trace.steps.reserve(static_cast<std::size_t>(budget));
  QueryCounters counters;
  for (std::int64_t t = 1; t <= budget; ++t) {
    std::vector<std::pair<PuctNode*, std::size_t>> path;
    std::vector<double> rewards;
    PuctNode* node = &root;
    for (int depth = 0; depth < env.horizon(); ++depth) {
      const std::size_t k = puct_select(*node, c);
      rewards.push_back(env.step_reward(depth, node->arms[k], rng));
      counters.env_executions += 1;
      path.emplace_back(node, k);
      if (depth + 1 < env.horizon()) {
        auto& child = node->children[k];
        if (!child) {
          child = std::make_unique<PuctNode>();
          fill_puct_node(*child, space, sample_count, rng);
        }
        node = child.get();
      }
    }
    double ret = 0.0;
    for (std::size_t s = path.size(); s-- > 0;) {
      ret = rewards[s] + env.discount() * ret;
      auto& [nd, k] = path[s];
      nd->visits[k] += 1;
      nd->values[k] += (ret - nd->values[k]) / static_cast<double>(nd->visits[k]);
      nd->total += 1;
    }

    std::size_t inc = root.arms.size();
    for (std::size_t k = 0; k < root.arms.size(); ++k) {
      if (root.visits[k] == 0) continue;
      if (inc == root.arms.size() || root.values[k] > root.values[inc]) inc = k;
    }
    StepRecord rec;
    rec.iter = t;
    rec.selected = path.front().first->arms[path.front().second];
    rec.reward = rewards.front();
    rec.incumbent = root.arms[inc];
    rec.incumbent_value = env.tensor().reward(rec.incumbent);
    rec.q_incumbent = root.values[inc];
    rec.counters = counters;
    out.trace.steps.push_back(std::move(rec));
  }
  for (std::size_t k = 0; k < root.arms.size(); ++k) {
    out.visits.emplace_back(root.arms[k], root.visits[k]);
  }
  return out;
}

}  // namespace

BaselineResult run_sampled_puct(const EpisodicMatGame& env, std::int64_t budget,
                                const PuctConfig& cfg, std::uint64_t seed) {
  if (cfg.sample_count < 1) throw InvalidArgument("sample_count must be at least 1");
  return run_puct(env, budget, cfg.exploration_const, cfg.sample_count, seed, "sampled_puct");
}

BaselineResult run_full_puct(const EpisodicMatGame& env, std::int64_t budget,
                             double exploration_const, std::uint64_t seed) {
  return run_puct(env, budget, exploration_const, 0, seed, "full_puct");
}

}  // namespace nonzero
