#include "nonzero/trace.hpp"

#include <istream>
#include <ostream>

#include "nonzero/errors.hpp"

namespace nonzero {

std::vector<JointAction> SearchTrace::selected_actions() const {
  std::vector<JointAction> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.selected);
  return out;
}

std::vector<JointAction> SearchTrace::incumbents() const {
  std::vector<JointAction> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.incumbent);
  return out;
}

nlohmann::json to_json(const StepRecord& r) {
  nlohmann::json j = {{"type", "step"},
                      {"iter", r.iter},
                      {"selected_action", r.selected.values()},
                      {"reward", r.reward},
                      {"xi", r.xi ? nlohmann::json(*r.xi) : nlohmann::json(nullptr)},
                      {"incumbent", r.incumbent.values()},
                      {"incumbent_value", r.incumbent_value},
                      {"counters",
                       {{"env", r.counters.env_executions}, {"model", r.counters.model_queries}}}};
  if (r.q_incumbent) j["q1_of_incumbent"] = *r.q_incumbent;
  return j;
}

StepRecord step_record_from_json(const nlohmann::json& j) {
  StepRecord r;
  r.iter = j.at("iter").get<std::int64_t>();
  r.selected = JointAction(j.at("selected_action").get<std::vector<int>>());
  r.reward = j.at("reward").get<double>();
  if (!j.at("xi").is_null()) r.xi = j.at("xi").get<double>();
  r.incumbent = JointAction(j.at("incumbent").get<std::vector<int>>());
  r.incumbent_value = j.at("incumbent_value").get<double>();
  if (j.contains("q1_of_incumbent")) r.q_incumbent = j.at("q1_of_incumbent").get<double>();
  r.counters.env_executions = j.at("counters").at("env").get<std::uint64_t>();
  r.counters.model_queries = j.at("counters").at("model").get<std::uint64_t>();
  return r;
}

namespace {

nlohmann::json to_json(const ThetaSnapshot& s) {
  return {{"type", "theta"}, {"iter", s.iter}, {"theta", s.theta}};
}

nlohmann::json to_json(const ExpansionDiagnostic& e) {
  nlohmann::json j = {{"type", "expand"},
                      {"iter", e.iter},
                      {"depth", e.depth},
                      {"action", e.action.values()},
                      {"u", {e.u.agent, e.u.target}},
                      {"delta_u", e.delta_u}};
  if (e.v) {
    j["v"] = {e.v->agent, e.v->target};
    j["full_gain"] = e.full_gain;
    j["mixed"] = e.mixed;
  }
  return j;
}

}  // namespace

void write_trace_jsonl(std::ostream& out, const nlohmann::json& header, const SearchTrace& trace) {
  nlohmann::json head = header;
  head["type"] = "header";
  head["schema"] = kTraceSchema;
  head["planner"] = trace.planner;
  out << head.dump() << '\n';

  // Merge the three record streams by iteration; diagnostics precede the
  // step they were produced in, snapshots follow it.
  std::size_t di = 0;
  std::size_t si = 0;
  for (const auto& step : trace.steps) {
    while (di < trace.diagnostics.size() && trace.diagnostics[di].iter <= step.iter) {
      out << to_json(trace.diagnostics[di++]).dump() << '\n';
    }
    out << to_json(step).dump() << '\n';
    while (si < trace.snapshots.size() && trace.snapshots[si].iter <= step.iter) {
      out << to_json(trace.snapshots[si++]).dump() << '\n';
    }
  }
  while (di < trace.diagnostics.size()) out << to_json(trace.diagnostics[di++]).dump() << '\n';
  while (si < trace.snapshots.size()) out << to_json(trace.snapshots[si++]).dump() << '\n';
}

LoadedTrace read_trace_jsonl(std::istream& in) {
  LoadedTrace out;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InvalidArgument(std::string("malformed trace line: ") + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "header") {
      if (j.value("schema", "") != kTraceSchema) throw InvalidArgument("unknown trace schema");
      out.header = j;
      out.trace.planner = j.value("planner", "");
      have_header = true;
    } else if (type == "step") {
      out.trace.steps.push_back(step_record_from_json(j));
    } else if (type == "theta") {
      out.trace.snapshots.push_back(
          {j.at("iter").get<std::int64_t>(), j.at("theta").get<std::vector<double>>()});
    }
  }
  if (!have_header) throw InvalidArgument("trace has no header line");
  return out;
}

}  // namespace nonzero
