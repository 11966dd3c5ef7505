#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nonzero/errors.hpp"
#include "nonzero/harness.hpp"

namespace fs = std::filesystem;
using namespace nonzero;

namespace {

std::vector<ExperimentConfig> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nonzero_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// File contents without lines that carry a generation timestamp.
std::string stable(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::string line;
  std::string out;
  while (std::getline(in, line)) {
    if (line.rfind("# nonzero-", 0) == 0 || line.find("\"generated\"") != std::string::npos) continue;
    out += line + "\n";
  }
  return out;
}

int code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return exit_code_for(e);
  }
  return 0;
}

const char* kSmallRun = R"(
planners = nonzero, flat_ucb
budget = 60
env.seeds = 0-1
[small]
env.kind = nonlinear
env.n = 2
env.d = 3
)";

}  // namespace

TEST_CASE("config parsing") {
  const auto cfgs = parse(R"(
# shared
budget = 50
planners = nonzero
[a]
env.kind = nonlinear
env.n = 3
env.d = 4
env.seeds = 0-2,9
nonzero.candidate_cap = 12
nonzero.selection = eta+visit
[b]
budget = 70 ; overrides the default
planners = flat_ucb, full_puct
)");
  REQUIRE(cfgs.size() == 2);
  CHECK(cfgs[0].name == "a");
  CHECK(cfgs[0].kind == TensorKind::Nonlinear);
  CHECK(cfgs[0].seeds == std::vector<std::uint64_t>{0, 1, 2, 9});
  CHECK(cfgs[0].budget == 50);
  CHECK(cfgs[0].nonzero.proposal.candidate_cap == 12);
  CHECK(cfgs[0].nonzero.selection_mode == SelectionMode::EtaPlusVisit);
  CHECK(cfgs[0].planner_config().n_sim == 50);
  CHECK(cfgs[1].budget == 70);
  CHECK(cfgs[1].planners == std::vector<PlannerKind>{PlannerKind::FlatUcb, PlannerKind::FullPuct});
  CHECK(to_json(cfgs[0]).at("env").at("n") == 3);
}

TEST_CASE("grid expansion") {
  const auto cfgs = parse(R"(
planners = nonzero, flat_ucb
[m]
grid.nd = 2x3, 4x5
grid.kind = linear, nonlinear
)");
  REQUIRE(cfgs.size() == 4);
  CHECK(cfgs[0].name == "m_n2_d3_linear");
  CHECK(cfgs[1].name == "m_n2_d3_nonlinear");
  CHECK(cfgs[3].name == "m_n4_d5_nonlinear");
  CHECK(cfgs[3].n == 4);
  CHECK(cfgs[3].d == 5);
}

TEST_CASE("config errors map to exit code 2") {
  for (const char* bad : {"[a]\nplanners = nonzero\nbogus = 1\n", "[a]\nplanners =\n",
                          "[a]\nplanners = mcts\n", "[a]\nplanners = nonzero\nbudget = x\n",
                          "[a]\nplanners = nonzero\nbudget = 1\nbudget = 2\n",
                          "[a]\nplanners = nonzero\n[a]\n", "planners = nonzero\n",
                          "[a\n", "[a]\nplanners = nonzero\nenv.seeds = 3-1\n",
                          "[a]\nplanners = nonzero\nflat_ucb.c = 0\n"}) {
    CAPTURE(bad);
    CHECK(code_of([&] { parse(bad); }) == 2);
  }
  CHECK_THROWS_AS(parse_seed_list("1,x"), ConfigError);
  CHECK_THROWS_AS(parse_seed_list(""), ConfigError);
  CHECK(parse_seed_list("3, 1-2") == std::vector<std::uint64_t>{3, 1, 2});
  CHECK_THROWS_AS(planner_kind_from_string("ucb"), ConfigError);
  CHECK(code_of([] { load_config("/nonexistent/cfg.ini"); }) == 2);
}

TEST_CASE("oracle over the enumeration cap exits with code 3") {
  auto cfgs = parse("[big]\nplanners = nonzero\nenv.kind = nonlinear\nenv.n = 8\nenv.d = 10\n");
  cfgs[0].out = scratch_dir("cap").string();
  std::ostringstream log;
  try {
    run_experiment(cfgs[0], log);
    FAIL("expected CapExceeded");
  } catch (const CapExceeded& e) {
    CHECK(std::string(e.what()).find("indicator_regret") != std::string::npos);
    CHECK(exit_code_for(e) == 3);
  }
  CHECK(exit_code_for(NumericFailure("x")) == 4);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
}

TEST_CASE("smoke run writes traces and summaries") {
  const fs::path root = scratch_dir("smoke");
  auto cfgs = parse(kSmallRun);
  cfgs[0].out = root.string();
  std::ostringstream log;
  const auto res = run_experiment(cfgs[0], log);
  CHECK(res.dir == root / "small");
  for (const char* p : {"nonzero", "flat_ucb"}) {
    for (const char* s : {"0", "1"}) {
      const fs::path trace = res.dir / p / s / "trace.jsonl";
      REQUIRE(fs::exists(trace));
      std::ifstream in(trace);
      const auto loaded = read_trace_jsonl(in);
      CHECK(loaded.trace.steps.size() == 60);
      CHECK(verify_trace(loaded).empty());
    }
  }
  REQUIRE(fs::exists(res.dir / "summary.csv"));
  REQUIRE(fs::exists(res.dir / "summary.json"));
  CHECK(read_file(res.dir / "summary.csv").rfind(std::string("# ") + kSummarySchema, 0) == 0);
  const auto j = nlohmann::json::parse(read_file(res.dir / "summary.json"));
  CHECK(j.at("schema") == kSummarySchema);
  CHECK(j.at("planners").contains("nonzero"));
  CHECK(j.at("planners").at("flat_ucb").at("metrics").contains("hitting_time"));
  CHECK(res.values(PlannerKind::NonZero, "env_executions") == std::vector<double>{60, 60});
  CHECK(res.values(PlannerKind::FlatUcb, "final_incumbent_value").size() == 2);
}

TEST_CASE("runs are reproducible and independent of the worker count") {
  const fs::path root = scratch_dir("repro");
  auto cfgs = parse(kSmallRun);
  std::ostringstream log;
  cfgs[0].out = (root / "a").string();
  const auto a = run_experiment(cfgs[0], log);
  cfgs[0].out = (root / "b").string();
  cfgs[0].parallel = 3;
  const auto b = run_experiment(cfgs[0], log);
  CHECK(stable(a.dir / "summary.csv") == stable(b.dir / "summary.csv"));
  CHECK(stable(a.dir / "summary.json") == stable(b.dir / "summary.json"));
  for (const char* p : {"nonzero/0", "nonzero/1", "flat_ucb/0", "flat_ucb/1"}) {
    CHECK(read_file(a.dir / p / "trace.jsonl") == read_file(b.dir / p / "trace.jsonl"));
  }
  cfgs[0].parallel = 1;
  const auto again = run_experiment(cfgs[0], log);
  CHECK(log.str().find("overwriting") != std::string::npos);
  CHECK(stable(again.dir / "summary.csv") == stable(a.dir / "summary.csv"));
}

TEST_CASE("matrix writes a comparison table") {
  const fs::path root = scratch_dir("matrix");
  auto cfgs = parse(kSmallRun);
  std::ostringstream log;
  const auto m = run_matrix(cfgs, root, log);
  REQUIRE(m.experiments.size() == 1);
  int traces = 0;
  for (const auto& e : fs::recursive_directory_iterator(root)) traces += e.path().filename() == "trace.jsonl";
  CHECK(traces == 4);
  std::istringstream csv(read_file(m.comparison_csv));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(csv, line)) lines.push_back(line);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0].rfind(std::string("# ") + kComparisonSchema, 0) == 0);
  CHECK(lines[1].rfind("exp,kind,n,d,planner", 0) == 0);
  CHECK(lines[2].rfind("small,nonlinear,2,3,nonzero,2,", 0) == 0);
  CHECK(lines[3].rfind("small,nonlinear,2,3,flat_ucb,2,", 0) == 0);
  CHECK(fs::exists(m.comparison_txt));

  auto single = parse("[s]\nplanners = nonzero\n");
  CHECK_THROWS_AS(run_matrix(single, root, log), ConfigError);
}

TEST_CASE("verify_trace flags a corrupted trace") {
  const fs::path root = scratch_dir("verify");
  auto cfgs = parse(kSmallRun);
  cfgs[0].out = root.string();
  std::ostringstream log;
  const auto res = run_experiment(cfgs[0], log);
  std::ifstream in(res.dir / "nonzero" / "0" / "trace.jsonl");
  auto loaded = read_trace_jsonl(in);
  REQUIRE(verify_trace(loaded).empty());

  auto wrong_value = loaded;
  wrong_value.trace.steps[5].incumbent_value += 1.0;
  CHECK_FALSE(verify_trace(wrong_value).empty());
  auto gap = loaded;
  gap.trace.steps.erase(gap.trace.steps.begin() + 3);
  CHECK_FALSE(verify_trace(gap).empty());
  auto illegal = loaded;
  illegal.trace.steps[0].selected = JointAction{0, 9};
  CHECK_FALSE(verify_trace(illegal).empty());
  auto counters = loaded;
  counters.trace.steps[10].counters.env_executions = 1;
  CHECK_FALSE(verify_trace(counters).empty());
}

TEST_CASE("overrides and output root") {
  auto cfgs = parse(kSmallRun);
  Overrides o;
  o.out = "/tmp/x";
  o.seeds = std::vector<std::uint64_t>{5};
  o.budget = 9;
  o.parallel = 2;
  apply_overrides(cfgs, o);
  CHECK(cfgs[0].out == "/tmp/x");
  CHECK(cfgs[0].seeds == std::vector<std::uint64_t>{5});
  CHECK(cfgs[0].budget == 9);
  CHECK(cfgs[0].parallel == 2);
  CHECK(output_root(cfgs[0]) == fs::path("/tmp/x"));
}
