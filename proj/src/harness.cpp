#include "nonzero/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <thread>

#include "nonzero/errors.hpp"
#include "nonzero/metrics.hpp"
#include "nonzero/oracle.hpp"

namespace fs = std::filesystem;

namespace nonzero {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

using KeyValues = std::map<std::string, std::string>;

// Reads typed values out of one section and reports keys nobody asked for.
class SectionReader {
 public:
  SectionReader(std::string section, KeyValues kv) : section_(std::move(section)), kv_(std::move(kv)) {}

  const std::string* raw(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  template <class T>
  void read(const std::string& key, T& out) {
    const std::string* v = raw(key);
    if (!v) return;
    try {
      out = convert<T>(*v);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      fail(key, *v);
    }
  }

  void finish() const {
    for (const auto& [k, v] : kv_) {
      if (!used_.contains(k)) {
        throw ConfigError("[" + section_ + "] unknown key '" + k + "'");
      }
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& value) const {
    throw ConfigError("[" + section_ + "] bad value for '" + key + "': '" + value + "'");
  }

 private:
  template <class T>
  T convert(const std::string& v) const {
    std::size_t pos = 0;
    if constexpr (std::is_same_v<T, bool>) {
      if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
      if (v == "false" || v == "no" || v == "off" || v == "0") return false;
      throw std::invalid_argument(v);
    } else if constexpr (std::is_same_v<T, double>) {
      const double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
      // Accepts 1e7 style literals for caps.
      const double x = std::stod(v, &pos);
      if (pos != v.size() || x != std::floor(x) || x > 1.8e19) throw std::invalid_argument(v);
      return static_cast<std::uint64_t>(x);
    } else if constexpr (std::is_integral_v<T>) {
      const long long x = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) {
        throw std::out_of_range(v);
      }
      return static_cast<T>(x);
    } else {
      return v;
    }
  }

  std::string section_;
  KeyValues kv_;
  std::set<std::string> used_;
};

ExperimentConfig build_experiment(const std::string& name, const KeyValues& kv) {
  SectionReader r(name, kv);
  ExperimentConfig cfg;
  cfg.name = name;
  if (const auto* v = r.raw("env.kind")) {
    if (*v == "linear") cfg.kind = TensorKind::Linear;
    else if (*v == "nonlinear") cfg.kind = TensorKind::Nonlinear;
    else r.fail("env.kind", *v);
  }
  r.read("env.n", cfg.n);
  r.read("env.d", cfg.d);
  r.read("env.dense_cap", cfg.dense_cap);
  if (const auto* v = r.raw("env.seeds")) cfg.seeds = parse_seed_list(*v);
  r.read("env.horizon", cfg.horizon);
  r.read("env.discount", cfg.discount);
  r.read("env.noise", cfg.reward_noise);

  if (const auto* v = r.raw("planners")) {
    for (const auto& p : split_list(*v)) cfg.planners.push_back(planner_kind_from_string(p));
  }
  r.read("budget", cfg.budget);
  r.read("eps1", cfg.eps1);
  r.read("eps2", cfg.eps2);
  r.read("oracle", cfg.oracle);
  r.read("oracle.cap", cfg.oracle_cap);
  r.read("slope.t_min", cfg.slope_t_min);
  r.read("parallel", cfg.parallel);
  r.read("out", cfg.out);

  PlannerConfig& p = cfg.nonzero;
  r.read("nonzero.k_single", p.proposal.k_single);
  r.read("nonzero.k_pair", p.proposal.k_pair);
  r.read("nonzero.pair_sample_budget", p.proposal.pair_sample_budget);
  r.read("nonzero.candidate_cap", p.proposal.candidate_cap);
  r.read("nonzero.learning_rate", p.learning_rate);
  r.read("nonzero.grad_steps", p.grad_steps_per_backup);
  r.read("nonzero.discount", p.discount);
  if (const auto* v = r.raw("nonzero.selection")) {
    if (*v == "eta") p.selection_mode = SelectionMode::EtaOnly;
    else if (*v == "eta+visit") p.selection_mode = SelectionMode::EtaPlusVisit;
    else r.fail("nonzero.selection", *v);
  }
  r.read("nonzero.visit_bonus", p.visit_bonus);
  if (const auto* v = r.raw("nonzero.warm_start")) {
    if (*v == "parent") p.warm_start = WarmStart::ParentCopy;
    else if (*v == "zero") p.warm_start = WarmStart::Zero;
    else r.fail("nonzero.warm_start", *v);
  }
  r.read("nonzero.link_c", p.link_c);
  r.read("nonzero.link_alpha", p.link_alpha);
  r.read("nonzero.initial_candidates", p.initial_candidates);
  r.read("nonzero.propose_interval", p.propose_interval);
  r.read("nonzero.evaluate_proposals", p.evaluate_proposals);
  r.read("nonzero.gain_relaxation", p.gain_relaxation);
  r.read("nonzero.prune_rejected", p.prune_rejected);
  r.read("nonzero.explore_random", p.explore_random);
  r.read("nonzero.theta_snapshot_every", p.theta_snapshot_every);

  r.read("flat_ucb.c", cfg.ucb_c);
  r.read("sampled_puct.c", cfg.sampled_puct.exploration_const);
  r.read("sampled_puct.sample_count", cfg.sampled_puct.sample_count);
  r.read("full_puct.c", cfg.full_puct_c);
  r.finish();
  return cfg;
}

// Expands grid.nd = "2x3, 4x5" and grid.kind = "linear, nonlinear".
std::vector<std::pair<std::string, KeyValues>> expand_grid(const std::string& name, KeyValues kv) {
  std::vector<std::pair<int, int>> nds;
  std::vector<std::string> kinds;
  if (auto it = kv.find("grid.nd"); it != kv.end()) {
    for (const auto& item : split_list(it->second)) {
      const auto x = item.find('x');
      try {
        if (x == std::string::npos) throw std::invalid_argument(item);
        std::size_t pn = 0;
        std::size_t pd = 0;
        const std::string ns = item.substr(0, x);
        const std::string ds = item.substr(x + 1);
        const int n = std::stoi(ns, &pn);
        const int d = std::stoi(ds, &pd);
        if (pn != ns.size() || pd != ds.size()) throw std::invalid_argument(item);
        nds.emplace_back(n, d);
      } catch (const std::exception&) {
        throw ConfigError("[" + name + "] bad grid.nd entry '" + item + "'");
      }
    }
    if (nds.empty()) throw ConfigError("[" + name + "] grid.nd is empty");
    kv.erase(it);
  }
  if (auto it = kv.find("grid.kind"); it != kv.end()) {
    kinds = split_list(it->second);
    if (kinds.empty()) throw ConfigError("[" + name + "] grid.kind is empty");
    kv.erase(it);
  }
  if (nds.empty() && kinds.empty()) return {{name, kv}};
  if (nds.empty()) nds.emplace_back(-1, -1);
  if (kinds.empty()) kinds.emplace_back("");
  std::vector<std::pair<std::string, KeyValues>> out;
  for (const auto& [n, d] : nds) {
    for (const auto& kind : kinds) {
      KeyValues point = kv;
      std::string label = name;
      if (n > 0) {
        point["env.n"] = std::to_string(n);
        point["env.d"] = std::to_string(d);
        label += "_n" + std::to_string(n) + "_d" + std::to_string(d);
      }
      if (!kind.empty()) {
        point["env.kind"] = kind;
        label += "_" + kind;
      }
      out.emplace_back(label, std::move(point));
    }
  }
  return out;
}

struct SeedEnv {
  std::unique_ptr<EpisodicMatGame> env;
  std::optional<LocalSet> local;
  std::optional<Landscape> landscape;
};

struct JobOutput {
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<double> indicator;  // empty without the oracle
  std::optional<HittingTime> hit;
};

nlohmann::json env_json(const ExperimentConfig& cfg, std::uint64_t seed) {
  nlohmann::json j = to_json(cfg.tensor_spec(seed));
  j["horizon"] = cfg.horizon;
  j["discount"] = cfg.discount;
  j["reward_noise"] = cfg.reward_noise;
  return j;
}

nlohmann::json planner_json(const ExperimentConfig& cfg, PlannerKind kind) {
  switch (kind) {
    case PlannerKind::NonZero:
      return to_json(cfg.planner_config());
    case PlannerKind::FlatUcb:
      return {{"exploration_const", cfg.ucb_c}};
    case PlannerKind::SampledPuct:
      return {{"exploration_const", cfg.sampled_puct.exploration_const},
              {"sample_count", cfg.sampled_puct.sample_count}};
    case PlannerKind::FullPuct:
      return {{"exploration_const", cfg.full_puct_c}};
  }
  return {};
}

SearchTrace run_planner(const ExperimentConfig& cfg, PlannerKind kind, const EpisodicMatGame& env,
                        std::uint64_t seed) {
  switch (kind) {
    case PlannerKind::NonZero:
      return run_search(env, cfg.planner_config(), seed).trace;
    case PlannerKind::FlatUcb:
      return run_flat_ucb(env.tensor(), cfg.budget, cfg.ucb_c, seed).trace;
    case PlannerKind::SampledPuct:
      return run_sampled_puct(env, cfg.budget, cfg.sampled_puct, seed).trace;
    case PlannerKind::FullPuct:
      return run_full_puct(env, cfg.budget, cfg.full_puct_c, seed).trace;
  }
  throw InvalidArgument("unknown planner");
}

JobOutput run_job(const ExperimentConfig& cfg, PlannerKind kind, std::uint64_t seed,
                  const SeedEnv& se, const fs::path& dir) {
  SearchTrace trace = run_planner(cfg, kind, *se.env, seed);
  for (const auto& s : trace.steps) {
    if (!std::isfinite(s.reward) || !std::isfinite(s.incumbent_value)) {
      throw NumericFailure(std::string(to_string(kind)) + " produced a non-finite reward at iteration " +
                           std::to_string(s.iter));
    }
  }

  fs::create_directories(dir);
  {
    std::ofstream out(dir / "trace.jsonl", std::ios::binary);
    nlohmann::json header = {{"exp", cfg.name},
                             {"planner", to_string(kind)},
                             {"seed", seed},
                             {"budget", cfg.budget},
                             {"env", env_json(cfg, seed)},
                             {"config", planner_json(cfg, kind)}};
    write_trace_jsonl(out, header, trace);
    if (!out) throw Error("cannot write " + (dir / "trace.jsonl").string());
  }

  JobOutput o;
  const auto& last = trace.steps.back();
  double reward_sum = 0.0;
  for (const auto& s : trace.steps) reward_sum += s.reward;
  o.metrics.emplace_back("final_incumbent_value", last.incumbent_value);
  o.metrics.emplace_back("mean_reward", reward_sum / static_cast<double>(trace.steps.size()));
  o.metrics.emplace_back("env_executions", static_cast<double>(last.counters.env_executions));
  o.metrics.emplace_back("model_queries", static_cast<double>(last.counters.model_queries));
  if (se.local) {
    const auto& space = se.env->space();
    const auto actions = trace.selected_actions();
    o.indicator = indicator_regret(actions, space, *se.local);
    const auto gap = gap_regret(actions, *se.landscape, *se.local);
    const HittingTime h = hitting_time(actions, space, *se.local, cfg.budget);
    o.hit = h;
    const double queries_at_hit =
        h.censored ? static_cast<double>(last.counters.total())
                   : static_cast<double>(trace.steps[static_cast<std::size_t>(h.time - 1)].counters.total());
    o.metrics.emplace_back("indicator_regret", o.indicator.back());
    o.metrics.emplace_back("gap_regret", gap.back());
    o.metrics.emplace_back("hitting_time", static_cast<double>(h.time));
    o.metrics.emplace_back("hitting_censored", h.censored ? 1.0 : 0.0);
    o.metrics.emplace_back("queries_at_hit", queries_at_hit);
    o.metrics.emplace_back("incumbent_is_local", se.local->contains(space, last.incumbent) ? 1.0 : 0.0);
  }
  return o;
}

// Runs tasks 0..count-1 on `threads` workers; rethrows the failure of the
// lowest-numbered task.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

nlohmann::json describe(std::span<const double> xs) {
  return {{"mean", mean(xs)},
          {"std", stddev(xs)},
          {"median", median(xs)},
          {"q25", quantile(xs, 0.25)},
          {"q75", quantile(xs, 0.75)}};
}

nlohmann::json config_json_for_summary(const ExperimentConfig& cfg) {
  nlohmann::json j = to_json(cfg);
  j.erase("out");
  j.erase("parallel");
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

const char* to_string(PlannerKind k) {
  switch (k) {
    case PlannerKind::NonZero:
      return "nonzero";
    case PlannerKind::FlatUcb:
      return "flat_ucb";
    case PlannerKind::SampledPuct:
      return "sampled_puct";
    case PlannerKind::FullPuct:
      return "full_puct";
  }
  return "?";
}

PlannerKind planner_kind_from_string(const std::string& s) {
  for (auto k : {PlannerKind::NonZero, PlannerKind::FlatUcb, PlannerKind::SampledPuct,
                 PlannerKind::FullPuct}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown planner '" + s + "'");
}

TensorSpec ExperimentConfig::tensor_spec(std::uint64_t seed) const {
  return {kind, n, d, kind == TensorKind::Linear ? 0 : seed, dense_cap};
}

PlannerConfig ExperimentConfig::planner_config() const {
  PlannerConfig p = nonzero;
  p.n_sim = static_cast<int>(budget);
  return p;
}

std::int64_t ExperimentConfig::slope_start() const {
  return slope_t_min > 0 ? slope_t_min : std::max<std::int64_t>(1, budget / 100);
}

void ExperimentConfig::validate() const {
  const std::string where = "[" + name + "] ";
  if (name.empty()) throw ConfigError("experiment name is empty");
  if (kind == TensorKind::Table) throw ConfigError(where + "table environments are not configurable");
  if (n < 1 || d < 2) throw ConfigError(where + "need n >= 1 and d >= 2");
  if (seeds.empty()) throw ConfigError(where + "seed list is empty");
  if (planners.empty()) throw ConfigError(where + "planner set is empty");
  if (budget < 1) throw ConfigError(where + "budget must be at least 1");
  if (budget > std::numeric_limits<int>::max()) throw ConfigError(where + "budget too large");
  if (horizon < 1) throw ConfigError(where + "horizon must be at least 1");
  if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError(where + "env.discount must lie in [0, 1)");
  if (!(reward_noise >= 0.0)) throw ConfigError(where + "env.noise must be non-negative");
  if (eps1 < 0.0 || eps2 < 0.0) throw ConfigError(where + "eps targets must be non-negative");
  if (slope_t_min < 0) throw ConfigError(where + "slope.t_min must be non-negative");
  if (parallel < 1) throw ConfigError(where + "parallel must be at least 1");
  if (!(ucb_c > 0.0) || !(full_puct_c > 0.0) || !(sampled_puct.exploration_const > 0.0)) {
    throw ConfigError(where + "exploration constants must be positive");
  }
  if (sampled_puct.sample_count < 1) throw ConfigError(where + "sampled_puct.sample_count must be at least 1");
  try {
    JointActionSpace space(n, d);
    planner_config().validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(where + e.what());
  }
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json planners = nlohmann::json::array();
  for (auto p : cfg.planners) planners.push_back(to_string(p));
  nlohmann::json j = {{"name", cfg.name},
                      {"env",
                       {{"kind", to_string(cfg.kind)},
                        {"n", cfg.n},
                        {"d", cfg.d},
                        {"dense_cap", cfg.dense_cap},
                        {"seeds", cfg.seeds},
                        {"horizon", cfg.horizon},
                        {"discount", cfg.discount},
                        {"noise", cfg.reward_noise}}},
                      {"planners", planners},
                      {"budget", cfg.budget},
                      {"eps1", cfg.eps1},
                      {"eps2", cfg.eps2},
                      {"oracle", cfg.oracle},
                      {"oracle_cap", cfg.oracle_cap},
                      {"slope_t_min", cfg.slope_t_min},
                      {"parallel", cfg.parallel},
                      {"out", cfg.out}};
  for (auto p : cfg.planners) j["planner_config"][to_string(p)] = planner_json(cfg, p);
  return j;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  auto number = [&](const std::string& s) {
    std::size_t pos = 0;
    if (s.empty() || s[0] == '-') throw ConfigError("bad seed '" + s + "'");
    try {
      const auto v = std::stoull(s, &pos);
      if (pos != s.size()) throw ConfigError("bad seed '" + s + "'");
      return static_cast<std::uint64_t>(v);
    } catch (const std::logic_error&) {
      throw ConfigError("bad seed '" + s + "'");
    }
  };
  for (const auto& item : split_list(text)) {
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      seeds.push_back(number(item));
      continue;
    }
    const auto lo = number(trim(item.substr(0, dash)));
    const auto hi = number(trim(item.substr(dash + 1)));
    if (hi < lo) throw ConfigError("bad seed range '" + item + "'");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

std::vector<ExperimentConfig> parse_config(std::istream& in) {
  KeyValues defaults;
  std::vector<std::pair<std::string, KeyValues>> sections;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) throw ConfigError(where + "empty section name");
      for (char ch : name) {
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-' && ch != '.') {
          throw ConfigError(where + "section names use letters, digits, '_', '-' and '.'");
        }
      }
      for (const auto& s : sections) {
        if (s.first == name) throw ConfigError(where + "duplicate section [" + name + "]");
      }
      sections.emplace_back(name, KeyValues{});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "empty key");
    KeyValues& target = sections.empty() ? defaults : sections.back().second;
    if (target.contains(key)) throw ConfigError(where + "duplicate key '" + key + "'");
    target[key] = value;
  }
  if (sections.empty()) throw ConfigError("config defines no experiments");

  std::vector<ExperimentConfig> out;
  std::set<std::string> names;
  for (const auto& [name, kv] : sections) {
    KeyValues merged = defaults;
    for (const auto& [k, v] : kv) merged[k] = v;
    for (auto& [label, point] : expand_grid(name, merged)) {
      if (!names.insert(label).second) throw ConfigError("duplicate experiment '" + label + "'");
      ExperimentConfig cfg = build_experiment(label, point);
      cfg.validate();
      out.push_back(std::move(cfg));
    }
  }
  return out;
}

std::vector<ExperimentConfig> load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

void apply_overrides(std::vector<ExperimentConfig>& cfgs, const Overrides& o) {
  for (auto& c : cfgs) {
    if (o.out) c.out = *o.out;
    if (o.seeds) c.seeds = *o.seeds;
    if (o.parallel) c.parallel = *o.parallel;
    if (o.budget) c.budget = *o.budget;
    c.validate();
  }
}

fs::path output_root(const ExperimentConfig& cfg) {
  if (!cfg.out.empty()) return cfg.out;
  if (const char* env = std::getenv(kOutputEnvVar); env && *env) return env;
  return "results";
}

std::vector<double> ExperimentResult::values(PlannerKind planner, const std::string& metric) const {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.planner == planner && r.metric == metric) out.push_back(r.value);
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path dir = output_root(cfg) / cfg.name;
  const JointActionSpace space(cfg.n, cfg.d);
  if (cfg.oracle) {
    require_enumerable(space, cfg.oracle_cap, "indicator_regret (oracle local set)");
  }

  std::vector<SeedEnv> envs(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.parallel, [&](std::size_t i) {
    PayoffTensor tensor = PayoffTensor::from_spec(cfg.tensor_spec(cfg.seeds[i]));
    SeedEnv& se = envs[i];
    if (cfg.oracle) {
      se.landscape = Landscape::from_tensor(tensor, cfg.oracle_cap);
      se.local = local_maximizer_set(*se.landscape, cfg.eps1, cfg.eps2);
    }
    se.env = std::make_unique<EpisodicMatGame>(std::move(tensor), cfg.horizon, cfg.discount,
                                               cfg.reward_noise);
  });

  if (fs::exists(dir)) {
    log << "warning: overwriting " << dir.string() << "\n";
    fs::remove_all(dir);
  }
  fs::create_directories(dir);

  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t n_jobs = cfg.planners.size() * n_seeds;
  std::vector<JobOutput> outputs(n_jobs);
  parallel_for(n_jobs, cfg.parallel, [&](std::size_t j) {
    const PlannerKind kind = cfg.planners[j / n_seeds];
    const std::size_t s = j % n_seeds;
    const std::uint64_t seed = cfg.seeds[s];
    outputs[j] = run_job(cfg, kind, seed, envs[s], dir / to_string(kind) / std::to_string(seed));
  });

  ExperimentResult result;
  result.name = cfg.name;
  result.dir = dir;
  for (std::size_t j = 0; j < n_jobs; ++j) {
    for (const auto& [metric, value] : outputs[j].metrics) {
      result.rows.push_back({cfg.planners[j / n_seeds], cfg.seeds[j % n_seeds], metric, value});
    }
  }

  const std::string stamp = utc_timestamp();
  std::ostringstream csv;
  csv << "# " << kSummarySchema << " exp=" << cfg.name << " generated=" << stamp << "\n";
  csv << "exp,planner,seed,metric,value\n";
  for (const auto& r : result.rows) {
    csv << cfg.name << ',' << to_string(r.planner) << ',' << r.seed << ',' << r.metric << ','
        << format_double(r.value) << "\n";
  }
  write_text(dir / "summary.csv", csv.str());

  nlohmann::json summary = {{"schema", kSummarySchema},
                            {"exp", cfg.name},
                            {"generated", stamp},
                            {"config", config_json_for_summary(cfg)}};
  for (std::size_t p = 0; p < cfg.planners.size(); ++p) {
    const PlannerKind kind = cfg.planners[p];
    nlohmann::json entry;
    for (const auto& [metric, unused] : outputs[p * n_seeds].metrics) {
      const auto xs = result.values(kind, metric);
      entry["metrics"][metric] = describe(xs);
    }
    if (cfg.oracle) {
      // Slope of the seed-averaged indicator regret.
      std::vector<double> avg(static_cast<std::size_t>(cfg.budget), 0.0);
      for (std::size_t s = 0; s < n_seeds; ++s) {
        const auto& series = outputs[p * n_seeds + s].indicator;
        for (std::size_t t = 0; t < avg.size() && t < series.size(); ++t) {
          avg[t] += series[t] / static_cast<double>(n_seeds);
        }
      }
      nlohmann::json slope = nullptr;
      const std::int64_t t_min = cfg.slope_start();
      if (cfg.budget >= 10 * t_min) {
        if (avg.back() == 0.0) slope = 0.0;
        else if (avg[static_cast<std::size_t>(t_min - 1)] > 0.0) slope = loglog_slope(avg, t_min, cfg.budget);
      }
      entry["regret_slope"] = {{"t_min", t_min}, {"t_max", cfg.budget}, {"slope", slope}};
    }
    summary["planners"][to_string(kind)] = entry;
  }
  if (cfg.oracle) {
    nlohmann::json sizes = nlohmann::json::array();
    for (std::size_t s = 0; s < n_seeds; ++s) {
      sizes.push_back({{"seed", cfg.seeds[s]}, {"local_set_size", envs[s].local->count()}});
    }
    summary["local_sets"] = sizes;
    const auto ucb = std::find(cfg.planners.begin(), cfg.planners.end(), PlannerKind::FlatUcb);
    const auto nz = std::find(cfg.planners.begin(), cfg.planners.end(), PlannerKind::NonZero);
    if (ucb != cfg.planners.end() && nz != cfg.planners.end()) {
      const std::size_t pu = static_cast<std::size_t>(ucb - cfg.planners.begin());
      const std::size_t pn = static_cast<std::size_t>(nz - cfg.planners.begin());
      std::vector<double> ratios;
      int ucb_censored = 0;
      int nz_finite = 0;
      int comparable = 0;
      for (std::size_t s = 0; s < n_seeds; ++s) {
        const auto r = separation_ratio(*outputs[pu * n_seeds + s].hit, *outputs[pn * n_seeds + s].hit);
        ucb_censored += r.ucb_censored;
        nz_finite += !r.nonzero_censored;
        if (r.comparable) {
          ++comparable;
          ratios.push_back(r.ratio);
        }
      }
      summary["separation"] = {{"median_ratio", ratios.empty() ? nlohmann::json(nullptr)
                                                               : nlohmann::json(median(ratios))},
                               {"comparable_seeds", comparable},
                               {"ucb_censored", ucb_censored},
                               {"nonzero_finite", nz_finite},
                               {"seeds", n_seeds}};
    }
  }
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  result.summary = std::move(summary);
  log << cfg.name << ": " << n_jobs << " runs written to " << dir.string() << "\n";
  return result;
}

MatrixResult run_matrix(const std::vector<ExperimentConfig>& cfgs, const fs::path& root,
                        std::ostream& log) {
  std::set<PlannerKind> planners;
  for (const auto& c : cfgs) {
    c.validate();
    planners.insert(c.planners.begin(), c.planners.end());
  }
  if (planners.size() < 2) throw ConfigError("matrix needs at least two planners");

  MatrixResult m;
  for (auto c : cfgs) {
    c.out = root.string();
    m.experiments.push_back(run_experiment(c, log));
  }

  const std::string stamp = utc_timestamp();
  std::ostringstream csv;
  csv << "# " << kComparisonSchema << " generated=" << stamp << "\n";
  csv << "exp,kind,n,d,planner,seeds,final_value_mean,final_value_std,hitting_time_mean,"
         "hitting_time_std,hit_fraction\n";
  std::ostringstream txt;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-28s %-10s %3s %3s %-13s %18s %18s %6s\n", "experiment", "kind",
                "n", "d", "planner", "final value", "hitting time", "hits");
  txt << buf;
  for (std::size_t e = 0; e < cfgs.size(); ++e) {
    const auto& c = cfgs[e];
    const auto& r = m.experiments[e];
    for (auto kind : c.planners) {
      const auto fv = r.values(kind, "final_incumbent_value");
      const auto ht = r.values(kind, "hitting_time");
      const auto cens = r.values(kind, "hitting_censored");
      csv << c.name << ',' << to_string(c.kind) << ',' << c.n << ',' << c.d << ',' << to_string(kind)
          << ',' << fv.size() << ',' << format_double(mean(fv)) << ',' << format_double(stddev(fv));
      std::string hit_cell = "-";
      std::string frac_cell = "-";
      if (!ht.empty()) {
        const double frac = 1.0 - mean(cens);
        csv << ',' << format_double(mean(ht)) << ',' << format_double(stddev(ht)) << ','
            << format_double(frac);
        std::snprintf(buf, sizeof buf, "%.1f +- %.1f", mean(ht), stddev(ht));
        hit_cell = buf;
        std::snprintf(buf, sizeof buf, "%.2f", frac);
        frac_cell = buf;
      } else {
        csv << ",,,";
      }
      csv << "\n";
      char value_cell[64];
      std::snprintf(value_cell, sizeof value_cell, "%.3f +- %.3f", mean(fv), stddev(fv));
      std::snprintf(buf, sizeof buf, "%-28s %-10s %3d %3d %-13s %18s %18s %6s\n", c.name.c_str(),
                    to_string(c.kind).c_str(), c.n, c.d, to_string(kind), value_cell,
                    hit_cell.c_str(), frac_cell.c_str());
      txt << buf;
    }
  }
  fs::create_directories(root);
  m.comparison_csv = root / "comparison.csv";
  m.comparison_txt = root / "comparison.txt";
  write_text(m.comparison_csv, csv.str());
  write_text(m.comparison_txt, txt.str());
  log << txt.str();
  return m;
}

std::vector<std::string> verify_trace(const LoadedTrace& loaded) {
  std::vector<std::string> problems;
  const auto& h = loaded.header;
  if (h.value("schema", "") != kTraceSchema) problems.push_back("header schema is not " + std::string(kTraceSchema));
  if (!h.contains("env")) {
    problems.push_back("header has no env block");
    return problems;
  }
  const auto& ej = h.at("env");
  const PayoffTensor tensor = PayoffTensor::from_spec(tensor_spec_from_json(ej));
  const auto& space = tensor.space();
  const int horizon = ej.value("horizon", 1);
  const double noise = ej.value("reward_noise", 0.0);
  const auto& steps = loaded.trace.steps;
  if (steps.empty()) problems.push_back("trace has no steps");
  if (h.contains("budget") && static_cast<std::int64_t>(steps.size()) != h.at("budget").get<std::int64_t>()) {
    problems.push_back("trace has " + std::to_string(steps.size()) + " steps, budget is " +
                       h.at("budget").dump());
  }
  QueryCounters prev;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const auto& s = steps[k];
    const std::string at = "iteration " + std::to_string(s.iter) + ": ";
    if (s.iter != static_cast<std::int64_t>(k) + 1) {
      problems.push_back(at + "expected iteration " + std::to_string(k + 1));
    }
    if (!space.contains(s.selected)) problems.push_back(at + "selected action is illegal");
    if (!space.contains(s.incumbent)) {
      problems.push_back(at + "incumbent is illegal");
      continue;
    }
    const double f = tensor.reward(s.incumbent);
    if (std::abs(f - s.incumbent_value) > 1e-9 * std::max(1.0, std::abs(f))) {
      problems.push_back(at + "incumbent value " + format_double(s.incumbent_value) + " != f = " +
                         format_double(f));
    }
    if (horizon == 1 && noise == 0.0 && space.contains(s.selected)) {
      const double r = tensor.reward(s.selected);
      if (std::abs(r - s.reward) > 1e-9 * std::max(1.0, std::abs(r))) {
        problems.push_back(at + "reward " + format_double(s.reward) + " != f(selected) = " +
                           format_double(r));
      }
    }
    if (s.counters.env_executions <= prev.env_executions ||
        s.counters.model_queries < prev.model_queries) {
      problems.push_back(at + "query counters are not monotone");
    }
    if (s.xi && !(std::isfinite(*s.xi) && *s.xi >= 0.0)) problems.push_back(at + "xi is not a finite non-negative value");
    prev = s.counters;
  }
  return problems;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const CapExceeded*>(&e)) return 3;
  if (dynamic_cast<const NumericFailure*>(&e)) return 4;
  return 1;
}

}  // namespace nonzero
