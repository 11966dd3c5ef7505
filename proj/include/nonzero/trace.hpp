#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nonzero/action_space.hpp"

namespace nonzero {

inline constexpr const char* kTraceSchema = "nonzero-trace/1";

// Environment executions are real steps; model queries are counterfactual
// reward lookups used for supervision and candidate evaluation.
struct QueryCounters {
  std::uint64_t env_executions = 0;
  std::uint64_t model_queries = 0;

  std::uint64_t total() const { return env_executions + model_queries; }
  friend bool operator==(const QueryCounters&, const QueryCounters&) = default;
};

struct StepRecord {
  std::int64_t iter = 0;  // 1-based
  JointAction selected;   // root action executed this iteration
  double reward = 0.0;    // root step reward observed
  std::optional<double> xi;  // composite error at the root before the update
  JointAction incumbent;
  double incumbent_value = 0.0;  // noise-free reward of the incumbent
  std::optional<double> q_incumbent;
  QueryCounters counters;  // cumulative after this iteration
};

struct ThetaSnapshot {
  std::int64_t iter = 0;
  std::vector<double> theta;
};

// Expansion-time surrogate diagnostics of one (a, u, v) draw.
struct ExpansionDiagnostic {
  std::int64_t iter = 0;
  int depth = 0;
  JointAction action;
  Direction u;
  std::optional<Direction> v;
  double delta_u = 0.0;      // eta(a^(u)) - eta(a)
  double full_gain = 0.0;    // eta(a^(u,v)) - eta(a)
  double mixed = 0.0;        // delta2(u, v)
};

struct SearchTrace {
  std::string planner;
  std::vector<StepRecord> steps;
  std::vector<ThetaSnapshot> snapshots;
  std::vector<ExpansionDiagnostic> diagnostics;

  std::vector<JointAction> selected_actions() const;
  std::vector<JointAction> incumbents() const;
};

nlohmann::json to_json(const StepRecord& r);
StepRecord step_record_from_json(const nlohmann::json& j);

// Header line, then step/snapshot/diagnostic lines ordered by iteration.
void write_trace_jsonl(std::ostream& out, const nlohmann::json& header, const SearchTrace& trace);

struct LoadedTrace {
  nlohmann::json header;
  SearchTrace trace;
};
LoadedTrace read_trace_jsonl(std::istream& in);

}  // namespace nonzero
