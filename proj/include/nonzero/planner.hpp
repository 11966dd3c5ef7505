#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nonzero/action_space.hpp"
#include "nonzero/environment.hpp"
#include "nonzero/proposal.hpp"
#include "nonzero/rng.hpp"
#include "nonzero/surrogate.hpp"
#include "nonzero/trace.hpp"

namespace nonzero {

enum class SelectionMode { EtaOnly, EtaPlusVisit };
enum class WarmStart { ParentCopy, Zero };

struct PlannerConfig {
  int n_sim = 200;
  ProposalConfig proposal;
  double learning_rate = 0.05;
  int grad_steps_per_backup = 1;
  double discount = 0.0;
  SelectionMode selection_mode = SelectionMode::EtaOnly;
  // Weight of the visit bonus under EtaPlusVisit, in units of the link scale.
  double visit_bonus = 1.0;
  WarmStart warm_start = WarmStart::ParentCopy;

  // Link constants; 0 picks c = 1/alpha = max(1, n(d-1)), the reward scale.
  double link_c = 0.0;
  double link_alpha = 0.0;

  // Random legal actions drawn at expansion (plus the parent's best).
  // 0 fills the node up to the candidate cap.
  int initial_candidates = 1;
  // Explicit root candidates; replaces the random draw when nonempty.
  std::vector<JointAction> root_actions;

  // A proposal round runs at a node every this many visits.
  int propose_interval = 1;
  // New candidates are scored by a gain fit against the incumbent.
  bool evaluate_proposals = true;
  double gain_relaxation = 1.0;
  // Evaluated candidates that do not beat the incumbent leave C.
  bool prune_rejected = true;
  // When a proposal round yields nothing, re-evaluate C against the incumbent
  // and insert up to k_single + k_pair random unseen actions.
  bool explore_random = true;

  // Root theta snapshot cadence in iterations; 0 disables.
  int theta_snapshot_every = 0;

  // Throws InvalidArgument.
  void validate() const;
};

nlohmann::json to_json(const PlannerConfig& cfg);

std::pair<double, double> resolve_link(const PlannerConfig& cfg, const JointActionSpace& space);

struct SearchNode {
  int depth = 0;
  std::vector<JointAction> candidates;
  std::vector<std::int64_t> visits;
  std::vector<double> values;  // incremental-mean return
  std::vector<std::unique_ptr<SearchNode>> children;  // parallel to candidates
  SurrogateParams params;
  bool expanded = false;
  std::int64_t node_visits = 0;
  // Visits credited to candidates that were later evicted.
  std::int64_t retired_visits = 0;
  // Every action ever inserted into this node.
  std::unordered_set<JointAction, JointActionHash> archive;

  explicit SearchNode(SurrogateParams p, int depth_ = 0) : depth(depth_), params(std::move(p)) {}

  std::size_t index_of(const JointAction& a) const;  // candidates.size() if absent
  bool has_children() const;
  // Inserts a candidate with zero statistics; returns its index.
  std::size_t insert(JointAction a);
  // Removes candidate k, moving its visits to retired_visits.
  void evict(std::size_t k);
};

struct PathStep {
  SearchNode* node;
  std::size_t choice;
};

// Runs the search-time machinery on one tree. Rewards come from `env`;
// counterfactual lookups use its noise-free tensor and count as model queries.
class NonZeroSearch {
 public:
  NonZeroSearch(const EpisodicMatGame& env, PlannerConfig cfg, std::uint64_t seed);

  // One select / expand / backup iteration.
  void simulate();

  const SearchNode& root() const { return *root_; }
  const SearchTrace& trace() const { return trace_; }
  SearchTrace take_trace() { return std::move(trace_); }
  const QueryCounters& counters() const { return counters_; }
  std::int64_t iterations() const { return iter_; }

  // argmax of eta over the root candidates.
  JointAction incumbent() const;

 private:
  void refine(SearchNode& node);
  void refresh(SearchNode& node, const JointAction& base);
  bool insert_evaluated(SearchNode& node, const JointAction& base, double base_reward,
                        JointAction candidate, const JointAction* protect);
  double model_reward(const JointAction& a);

  const EpisodicMatGame& env_;
  PlannerConfig cfg_;
  Rng rng_;
  std::unique_ptr<SearchNode> root_;
  SearchTrace trace_;
  QueryCounters counters_;
  std::int64_t iter_ = 0;
};

// Fills C(node) and records one (a, u, v) surrogate diagnostic.
// `count` random legal actions (0 = up to the cap) plus `parent_best`.
void expand_node(SearchNode& node, const JointActionSpace& space, const PlannerConfig& cfg,
                 Rng& rng, std::size_t count, const JointAction* parent_best,
                 std::vector<ExpansionDiagnostic>* diagnostics = nullptr, std::int64_t iter = 0);

// Follows argmax selection through existing children.
std::vector<PathStep> select_path(SearchNode& root, const PlannerConfig& cfg);

// Credits `rewards[t]` along the path (discounted returns), then trains
// theta at each node on one sampled supervision point. Returns the
// composite error at each node before its update, in path order.
std::vector<double> backup_path(const std::vector<PathStep>& path,
                                const std::vector<double>& rewards, const RewardLookup& model,
                                const PlannerConfig& cfg, Rng& rng, QueryCounters& counters);

struct SearchResult {
  // Normalized visit counts of the live root candidates.
  std::vector<std::pair<JointAction, double>> policy;
  SearchTrace trace;
  QueryCounters counters;
};

SearchResult run_search(const EpisodicMatGame& env, const PlannerConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------- baselines

struct BaselineResult {
  SearchTrace trace;
  // Visit counts per arm searched at the root, in arm order.
  std::vector<std::pair<JointAction, std::int64_t>> visits;
};

// UCB1 over every joint action. Unpulled arms are optimistic and pulled in
// linear index order; the arm table is lazy so d^n may exceed memory.
BaselineResult run_flat_ucb(const PayoffTensor& tensor, std::int64_t budget,
                            double exploration_const, std::uint64_t seed);

struct PuctConfig {
  double exploration_const = 1.25;
  // Draws with replacement per node; >= d^n searches all of A.
  std::uint64_t sample_count = 16;
};

// pUCT with the sampled-prior correction: prior beta_hat(a) / beta(a) * beta(a)
// where beta is uniform and beta_hat the empirical draw frequency.
BaselineResult run_sampled_puct(const EpisodicMatGame& env, std::int64_t budget,
                                const PuctConfig& cfg, std::uint64_t seed);

// pUCT with a uniform prior over all of A.
BaselineResult run_full_puct(const EpisodicMatGame& env, std::int64_t budget,
                             double exploration_const, std::uint64_t seed);

}  // namespace nonzero
