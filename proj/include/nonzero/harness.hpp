#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nonzero/environment.hpp"
#include "nonzero/oracle.hpp"
#include "nonzero/planner.hpp"
#include "nonzero/trace.hpp"

namespace nonzero {

inline constexpr const char* kSummarySchema = "nonzero-summary/1";
inline constexpr const char* kComparisonSchema = "nonzero-comparison/1";
inline constexpr const char* kOutputEnvVar = "NONZERO_OUT";

enum class PlannerKind { NonZero, FlatUcb, SampledPuct, FullPuct };

const char* to_string(PlannerKind k);
PlannerKind planner_kind_from_string(const std::string& s);  // throws ConfigError

struct ExperimentConfig {
  std::string name;
  TensorKind kind = TensorKind::Linear;
  int n = 2;
  int d = 3;
  std::uint64_t dense_cap = kDefaultDenseCap;
  std::vector<std::uint64_t> seeds{0};
  int horizon = 1;
  double discount = 0.0;
  double reward_noise = 0.0;

  std::vector<PlannerKind> planners;
  PlannerConfig nonzero;
  double ucb_c = 1.0;
  PuctConfig sampled_puct;
  double full_puct_c = 1.25;

  std::int64_t budget = 100;
  double eps1 = 0.0;
  double eps2 = 0.0;
  // Regret and hitting-time metrics need the oracle local set.
  bool oracle = true;
  std::uint64_t oracle_cap = kDefaultEnumerationCap;
  // Left end of the log-log regret window; 0 picks budget / 100. The slope
  // is skipped when budget < 10 t_min.
  std::int64_t slope_t_min = 0;

  int parallel = 1;
  std::string out;

  TensorSpec tensor_spec(std::uint64_t seed) const;
  PlannerConfig planner_config() const;  // nonzero with n_sim = budget
  std::int64_t slope_start() const;
  // Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);

// "0-4,7" -> {0,1,2,3,4,7}. Throws ConfigError.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

// Sections "[name]" hold "key = value" lines; '#' and ';' start comments.
// Keys before the first section apply to every experiment. A section with
// grid.nd and/or grid.kind expands into one experiment per grid point.
std::vector<ExperimentConfig> parse_config(std::istream& in);
std::vector<ExperimentConfig> load_config(const std::filesystem::path& path);

struct Overrides {
  std::optional<std::string> out;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<int> parallel;
  std::optional<std::int64_t> budget;
};

void apply_overrides(std::vector<ExperimentConfig>& cfgs, const Overrides& o);

// Output root: the config value, else $NONZERO_OUT, else "results".
std::filesystem::path output_root(const ExperimentConfig& cfg);

struct MetricRow {
  PlannerKind planner;
  std::uint64_t seed;
  std::string metric;
  double value;
};

struct ExperimentResult {
  std::string name;
  std::vector<MetricRow> rows;  // planner order, then seed, then metric
  nlohmann::json summary;
  std::filesystem::path dir;

  // Values of one metric over seeds for one planner.
  std::vector<double> values(PlannerKind planner, const std::string& metric) const;
};

// Runs every (planner, seed) job, writes traces, summary.csv and summary.json
// under <out>/<name>. Throws ConfigError, CapExceeded, NumericFailure.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream& log);

struct MatrixResult {
  std::vector<ExperimentResult> experiments;
  std::filesystem::path comparison_csv;
  std::filesystem::path comparison_txt;
};

// Runs each experiment under `root`, then writes comparison.csv and
// comparison.txt there. Needs at least two planners in total.
MatrixResult run_matrix(const std::vector<ExperimentConfig>& cfgs,
                        const std::filesystem::path& root, std::ostream& log);

// Checks a trace against its header's environment: consecutive iterations,
// legal actions, monotone counters, incumbent values, and noise-free rewards.
std::vector<std::string> verify_trace(const LoadedTrace& trace);

// Maps library errors to the CLI exit codes: 2 config, 3 cap, 4 numeric, 1 other.
int exit_code_for(const std::exception& e);

}  // namespace nonzero
