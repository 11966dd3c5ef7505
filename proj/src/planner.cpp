#include "nonzero/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nonzero/errors.hpp"

namespace nonzero {

void PlannerConfig::validate() const {
  if (n_sim < 1) throw InvalidArgument("n_sim must be at least 1");
  proposal.validate();
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning rate must be positive");
  }
  if (grad_steps_per_backup < 0) throw InvalidArgument("grad_steps_per_backup must be >= 0");
  if (!(discount >= 0.0 && discount < 1.0)) throw InvalidArgument("discount must lie in [0, 1)");
  if (visit_bonus < 0.0) throw InvalidArgument("visit bonus must be non-negative");
  if (link_c < 0.0 || link_alpha < 0.0) throw InvalidArgument("link constants must be >= 0");
  if (initial_candidates < 0) throw InvalidArgument("initial_candidates must be >= 0");
  if (propose_interval < 1) throw InvalidArgument("propose_interval must be at least 1");
  if (gain_relaxation <= 0.0 || gain_relaxation > 2.0) {
    throw InvalidArgument("gain relaxation must lie in (0, 2]");
  }
  if (theta_snapshot_every < 0) throw InvalidArgument("theta snapshot cadence must be >= 0");
}

nlohmann::json to_json(const PlannerConfig& cfg) {
  nlohmann::json roots = nlohmann::json::array();
  for (const auto& a : cfg.root_actions) roots.push_back(a.values());
  return {{"n_sim", cfg.n_sim},
          {"proposal", to_json(cfg.proposal)},
          {"learning_rate", cfg.learning_rate},
          {"grad_steps_per_backup", cfg.grad_steps_per_backup},
          {"discount", cfg.discount},
          {"selection_mode", cfg.selection_mode == SelectionMode::EtaOnly ? "eta" : "eta+visit"},
          {"visit_bonus", cfg.visit_bonus},
          {"warm_start", cfg.warm_start == WarmStart::ParentCopy ? "parent" : "zero"},
          {"link_c", cfg.link_c},
          {"link_alpha", cfg.link_alpha},
          {"initial_candidates", cfg.initial_candidates},
          {"root_actions", roots},
          {"propose_interval", cfg.propose_interval},
          {"evaluate_proposals", cfg.evaluate_proposals},
          {"gain_relaxation", cfg.gain_relaxation},
          {"prune_rejected", cfg.prune_rejected},
          {"explore_random", cfg.explore_random},
          {"theta_snapshot_every", cfg.theta_snapshot_every}};
}

std::pair<double, double> resolve_link(const PlannerConfig& cfg, const JointActionSpace& space) {
  const double scale =
      std::max(1.0, static_cast<double>(space.agents()) * (space.actions_per_agent() - 1));
  const double c = cfg.link_c > 0.0 ? cfg.link_c : scale;
  const double alpha = cfg.link_alpha > 0.0 ? cfg.link_alpha : 1.0 / c;
  return {c, alpha};
}

std::size_t SearchNode::index_of(const JointAction& a) const {
  const auto it = std::find(candidates.begin(), candidates.end(), a);
  return static_cast<std::size_t>(it - candidates.begin());
}

bool SearchNode::has_children() const {
  return std::any_of(children.begin(), children.end(), [](const auto& c) { return c != nullptr; });
}

std::size_t SearchNode::insert(JointAction a) {
  archive.insert(a);
  candidates.push_back(std::move(a));
  visits.push_back(0);
  values.push_back(0.0);
  children.emplace_back();
  return candidates.size() - 1;
}

void SearchNode::evict(std::size_t k) {
  retired_visits += visits[k];
  const auto off = static_cast<std::ptrdiff_t>(k);
  candidates.erase(candidates.begin() + off);
  visits.erase(visits.begin() + off);
  values.erase(values.begin() + off);
  children.erase(children.begin() + off);
}

namespace {

double visit_score(const SearchNode& node, std::size_t k, const PlannerConfig& cfg) {
  const double e = eta(node.params, node.candidates[k]);
  if (cfg.selection_mode == SelectionMode::EtaOnly) return e;
  const double total = static_cast<double>(node.node_visits);
  return e + cfg.visit_bonus * node.params.c() * std::sqrt(total) /
                 (1.0 + static_cast<double>(node.visits[k]));
}

std::size_t argmax_candidate(const SearchNode& node, const PlannerConfig& cfg) {
  std::size_t best = 0;
  double best_score = visit_score(node, 0, cfg);
  for (std::size_t k = 1; k < node.candidates.size(); ++k) {
    const double s = visit_score(node, k, cfg);
    if (s > best_score || (s == best_score && node.candidates[k] < node.candidates[best])) {
      best = k;
      best_score = s;
    }
  }
  return best;
}

void record_diagnostic(const SearchNode& node, const JointAction& a, Rng& rng,
                       std::vector<ExpansionDiagnostic>& out, std::int64_t iter) {
  const auto& space = node.params.space();
  ExpansionDiagnostic diag;
  diag.iter = iter;
  diag.depth = node.depth;
  diag.action = a;
  if (space.agents() >= 2) {
    const auto [u, v] = sample_direction_pair(space, a, rng);
    diag.u = u;
    diag.v = v;
    diag.full_gain = eta(node.params, apply_pair(a, u, v)) - eta(node.params, a);
    diag.mixed = delta2(node.params, a, u, v);
  } else {
    diag.u = sample_direction(space, a, rng);
  }
  diag.delta_u = delta1(node.params, a, diag.u);
  out.push_back(std::move(diag));
}

}  // namespace

void expand_node(SearchNode& node, const JointActionSpace& space, const PlannerConfig& cfg,
                 Rng& rng, std::size_t count, const JointAction* parent_best,
                 std::vector<ExpansionDiagnostic>* diagnostics, std::int64_t iter) {
  if (node.expanded) throw InvalidArgument("node is already expanded");
  const auto cap = static_cast<std::size_t>(cfg.proposal.candidate_cap);
  const auto card = space.cardinality();
  std::size_t target = count == 0 ? cap : std::min(cap, count + (parent_best ? 1 : 0));
  if (card) target = static_cast<std::size_t>(std::min<std::uint64_t>(target, *card));

  if (parent_best && node.candidates.size() < target) node.insert(*parent_best);
  if (card && target == *card) {
    for (std::uint64_t k = 0; k < *card; ++k) {
      JointAction a = space.from_linear_index(k);
      if (!node.archive.contains(a)) node.insert(std::move(a));
    }
  } else {
    std::size_t attempts = 64 * target + 64;
    while (node.candidates.size() < target && attempts-- > 0) {
      JointAction a = space.uniform_action(rng);
      if (!node.archive.contains(a)) node.insert(std::move(a));
    }
  }
  node.expanded = true;
  if (diagnostics) {
    for (const auto& a : node.candidates) record_diagnostic(node, a, rng, *diagnostics, iter);
  }
}

std::vector<PathStep> select_path(SearchNode& root, const PlannerConfig& cfg) {
  std::vector<PathStep> path;
  SearchNode* node = &root;
  while (node && node->expanded && !node->candidates.empty()) {
    const std::size_t k = argmax_candidate(*node, cfg);
    path.push_back({node, k});
    node = node->children[k].get();
  }
  return path;
}

std::vector<double> backup_path(const std::vector<PathStep>& path,
                                const std::vector<double>& rewards, const RewardLookup& model,
                                const PlannerConfig& cfg, Rng& rng, QueryCounters& counters) {
  if (path.size() != rewards.size()) throw InvalidArgument("one reward per path step required");
  std::vector<double> xis(path.size(), 0.0);
  double ret = 0.0;
  for (std::size_t t = path.size(); t-- > 0;) {
    ret = rewards[t] + cfg.discount * ret;
    SearchNode& node = *path[t].node;
    const std::size_t k = path[t].choice;
    node.visits[k] += 1;
    node.values[k] += (ret - node.values[k]) / static_cast<double>(node.visits[k]);
    node.node_visits += 1;

    const auto& space = node.params.space();
    const JointAction& a = node.candidates[k];
    std::optional<SupervisionSample> sample;
    if (space.agents() >= 2) {
      const auto [u, v] = sample_direction_pair(space, a, rng);
      sample = SupervisionSample::from_rewards(a, u, v, model);
      counters.model_queries += 4;
    } else {
      sample = SupervisionSample::from_rewards(a, sample_direction(space, a, rng), std::nullopt,
                                               model);
      counters.model_queries += 2;
    }
    xis[t] = composite_error(node.params, *sample);
    const std::span<const SupervisionSample> batch(&*sample, 1);
    for (int s = 0; s < cfg.grad_steps_per_backup; ++s) {
      node.params = sgd_step(node.params, batch, cfg.learning_rate);
    }
  }
  return xis;
}

NonZeroSearch::NonZeroSearch(const EpisodicMatGame& env, PlannerConfig cfg, std::uint64_t seed)
    : env_(env), cfg_(std::move(cfg)), rng_(seed) {
  cfg_.validate();
  const auto [c, alpha] = resolve_link(cfg_, env_.space());
  root_ = std::make_unique<SearchNode>(SurrogateParams::zeros(env_.space(), c, alpha), 0);
  trace_.planner = "nonzero";
}

double NonZeroSearch::model_reward(const JointAction& a) {
  counters_.model_queries += 1;
  return env_.tensor().reward(a);
}

JointAction NonZeroSearch::incumbent() const {
  if (root_->candidates.empty()) throw InvalidArgument("search has not run");
  return best_by_eta(root_->params, root_->candidates);
}

bool NonZeroSearch::insert_evaluated(SearchNode& node, const JointAction& base,
                                     double base_reward, JointAction candidate,
                                     const JointAction* protect) {
  const std::size_t k = node.insert(std::move(candidate));
  if (cfg_.evaluate_proposals) {
    const double gain = model_reward(node.candidates[k]) - base_reward;
    node.params = fit_gain(node.params, base, node.candidates[k], gain, cfg_.gain_relaxation);
    if (cfg_.prune_rejected && !(gain > 0.0)) {
      node.evict(k);
      return false;
    }
  }
  const auto cap = static_cast<std::size_t>(cfg_.proposal.candidate_cap);
  if (node.candidates.size() <= cap) return true;
  // Evict the lowest-eta candidate other than the protected one; ties drop
  // the larger action.
  std::size_t victim = node.candidates.size();
  double lowest = 0.0;
  for (std::size_t j = 0; j < node.candidates.size(); ++j) {
    if (protect && node.candidates[j] == *protect) continue;
    const double e = eta(node.params, node.candidates[j]);
    if (victim == node.candidates.size() || e < lowest ||
        (e == lowest && node.candidates[j] > node.candidates[victim])) {
      victim = j;
      lowest = e;
    }
  }
  const bool kept = victim != k;
  node.evict(victim);
  return kept;
}

void NonZeroSearch::refresh(SearchNode& node, const JointAction& base) {
  const double base_reward = model_reward(base);
  for (std::size_t k = node.candidates.size(); k-- > 0;) {
    if (node.candidates[k] == base) continue;
    const double gain = model_reward(node.candidates[k]) - base_reward;
    node.params = fit_gain(node.params, base, node.candidates[k], gain, cfg_.gain_relaxation);
    if (cfg_.prune_rejected && !(gain > 0.0)) node.evict(k);
  }
}

void NonZeroSearch::refine(SearchNode& node) {
  const auto& space = env_.space();
  const auto cap = static_cast<std::size_t>(cfg_.proposal.candidate_cap);
  if (cap < 2) return;
  const std::size_t room =
      std::min<std::size_t>(cap - 1, static_cast<std::size_t>(cfg_.proposal.k_single +
                                                              cfg_.proposal.k_pair));
  const JointAction base = best_by_eta(node.params, node.candidates);
  const ActionFilter seen = [&node](const JointAction& a) { return node.archive.contains(a); };
  std::vector<JointAction> fresh;
  for (auto& s : propose_scored(node.params, node.candidates, cfg_.proposal, rng_, room, seen)) {
    fresh.push_back(std::move(s.candidate));
  }
  if (fresh.empty()) {
    if (cfg_.evaluate_proposals) refresh(node, base);
    if (cfg_.explore_random) {
      const auto card = space.cardinality();
      for (std::size_t attempt = 0; attempt < 32 * room && fresh.size() < room; ++attempt) {
        if (card && node.archive.size() + fresh.size() >= *card) break;
        JointAction a = space.uniform_action(rng_);
        if (!node.archive.contains(a) && std::find(fresh.begin(), fresh.end(), a) == fresh.end()) {
          fresh.push_back(std::move(a));
        }
      }
    }
  }
  if (fresh.empty()) return;
  const double base_reward = model_reward(base);
  for (auto& c : fresh) insert_evaluated(node, base, base_reward, std::move(c), &base);
}

void NonZeroSearch::simulate() {
  ++iter_;
  const auto& space = env_.space();
  if (!root_->expanded) {
    if (!cfg_.root_actions.empty()) {
      for (const auto& a : cfg_.root_actions) {
        space.validate(a);
        if (root_->candidates.size() >= static_cast<std::size_t>(cfg_.proposal.candidate_cap)) {
          break;
        }
        if (!root_->archive.contains(a)) root_->insert(a);
      }
      root_->expanded = true;
      for (const auto& a : root_->candidates) {
        record_diagnostic(*root_, a, rng_, trace_.diagnostics, iter_);
      }
    } else {
      expand_node(*root_, space, cfg_, rng_, static_cast<std::size_t>(cfg_.initial_candidates),
                  nullptr, &trace_.diagnostics, iter_);
    }
  }

  std::vector<PathStep> path;
  std::vector<double> rewards;
  SearchNode* node = root_.get();
  for (int t = 0; t < env_.horizon(); ++t) {
    if (!node->expanded) {
      const JointAction& parent_best =
          best_by_eta(path.back().node->params, path.back().node->candidates);
      expand_node(*node, space, cfg_, rng_, static_cast<std::size_t>(cfg_.initial_candidates),
                  &parent_best, &trace_.diagnostics, iter_);
    }
    if (node->node_visits % cfg_.propose_interval == 0) refine(*node);
    const std::size_t k = argmax_candidate(*node, cfg_);
    rewards.push_back(env_.step_reward(t, node->candidates[k], rng_));
    counters_.env_executions += 1;
    path.push_back({node, k});
    if (t + 1 < env_.horizon()) {
      auto& child = node->children[k];
      if (!child) {
        SurrogateParams p = cfg_.warm_start == WarmStart::ParentCopy
                                ? node->params
                                : SurrogateParams::zeros(space, node->params.c(),
                                                         node->params.alpha());
        child = std::make_unique<SearchNode>(std::move(p), t + 1);
      }
      node = child.get();
    }
  }

  const JointAction executed = path.front().node->candidates[path.front().choice];
  const RewardLookup model = [this](const JointAction& a) { return env_.tensor().reward(a); };
  const std::vector<double> xis = backup_path(path, rewards, model, cfg_, rng_, counters_);

  StepRecord rec;
  rec.iter = iter_;
  rec.selected = executed;
  rec.reward = rewards.front();
  rec.xi = xis.front();
  rec.incumbent = incumbent();
  rec.incumbent_value = env_.tensor().reward(rec.incumbent);
  const std::size_t ki = root_->index_of(rec.incumbent);
  if (root_->visits[ki] > 0) rec.q_incumbent = root_->values[ki];
  rec.counters = counters_;
  trace_.steps.push_back(std::move(rec));

  if (cfg_.theta_snapshot_every > 0 && iter_ % cfg_.theta_snapshot_every == 0) {
    trace_.snapshots.push_back(
        {iter_, std::vector<double>(root_->params.theta().begin(), root_->params.theta().end())});
  }
}

SearchResult run_search(const EpisodicMatGame& env, const PlannerConfig& cfg, std::uint64_t seed) {
  NonZeroSearch search(env, cfg, seed);
  for (int s = 0; s < cfg.n_sim; ++s) search.simulate();
  SearchResult out;
  const SearchNode& root = search.root();
  const double live = static_cast<double>(
      std::accumulate(root.visits.begin(), root.visits.end(), std::int64_t{0}));
  for (std::size_t k = 0; k < root.candidates.size(); ++k) {
    out.policy.emplace_back(root.candidates[k],
                            live > 0 ? static_cast<double>(root.visits[k]) / live : 0.0);
  }
  out.counters = search.counters();
  out.trace = search.take_trace();
  return out;
}

}  // namespace nonzero
