#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "nonzero/environment.hpp"
#include "nonzero/errors.hpp"
#include "nonzero/harness.hpp"
#include "nonzero/oracle.hpp"

namespace fs = std::filesystem;
using namespace nonzero;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::string> seeds;
  std::optional<int> parallel;
  std::optional<std::int64_t> budget;
  std::vector<std::string> only;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config file")->required();
  cmd->add_option("--out", f.out, "Output root (default $NONZERO_OUT or ./results)");
  cmd->add_option("--seeds", f.seeds, "Seed list, e.g. 0-9 or 1,4,7");
  cmd->add_option("--parallel", f.parallel, "Worker threads");
  cmd->add_option("--budget", f.budget, "Iterations per run");
  cmd->add_option("--exp", f.only, "Run only the named experiments");
}

std::vector<ExperimentConfig> load(const CommonFlags& f) {
  auto cfgs = load_config(f.config);
  Overrides o;
  o.out = f.out;
  if (f.seeds) o.seeds = parse_seed_list(*f.seeds);
  o.parallel = f.parallel;
  o.budget = f.budget;
  apply_overrides(cfgs, o);
  if (!f.only.empty()) {
    std::vector<ExperimentConfig> keep;
    for (const auto& name : f.only) {
      bool found = false;
      for (const auto& c : cfgs) {
        if (c.name == name) {
          keep.push_back(c);
          found = true;
        }
      }
      if (!found) throw ConfigError("no experiment named '" + name + "'");
    }
    cfgs = std::move(keep);
  }
  return cfgs;
}

struct OracleFlags {
  std::string config;
  std::optional<std::string> out;
  std::string kind = "nonlinear";
  int n = 2;
  int d = 3;
  std::uint64_t seed = 0;
  double eps1 = 0.0;
  double eps2 = 0.0;
  std::uint64_t cap = kDefaultEnumerationCap;
  bool golden = false;
  bool smoothness = false;
};

nlohmann::json oracle_dump(const PayoffTensor& tensor, double eps1, double eps2, std::uint64_t cap,
                           bool smoothness) {
  const Landscape f = Landscape::from_tensor(tensor, cap);
  const LocalSet local = local_maximizer_set(f, eps1, eps2);
  const auto best = global_argmax(f);
  nlohmann::json members = nlohmann::json::array();
  for (std::uint64_t idx : local.members()) {
    members.push_back({{"index", idx},
                       {"action", tensor.space().from_linear_index(idx).values()},
                       {"value", f.at(idx)}});
  }
  nlohmann::json j = {{"env", to_json(tensor.spec())},
                      {"eps1", eps1},
                      {"eps2", eps2},
                      {"global_max", {{"action", best.action.values()}, {"value", best.value}}},
                      {"local_set_size", local.count()},
                      {"local_set", members}};
  if (smoothness) j["smoothness"] = to_json(estimate_smoothness(f));
  return j;
}

int run_oracle(const OracleFlags& f) {
  if (!f.config.empty()) {
    auto cfgs = load_config(f.config);
    Overrides o;
    o.out = f.out;
    apply_overrides(cfgs, o);
    for (const auto& c : cfgs) {
      const JointActionSpace space(c.n, c.d);
      require_enumerable(space, c.oracle_cap, "oracle local set");
      const fs::path dir = output_root(c) / c.name / "oracle";
      fs::create_directories(dir);
      for (auto seed : c.seeds) {
        const auto tensor = PayoffTensor::from_spec(c.tensor_spec(seed));
        std::ofstream out(dir / (std::to_string(seed) + ".json"));
        out << oracle_dump(tensor, c.eps1, c.eps2, c.oracle_cap, f.smoothness).dump(2) << "\n";
      }
      std::cerr << c.name << ": oracle sets written to " << dir.string() << "\n";
    }
    return 0;
  }
  TensorKind kind;
  try {
    kind = tensor_kind_from_string(f.kind);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (kind == TensorKind::Table) throw ConfigError("table tensors have no generator");
  const TensorSpec spec{kind, f.n, f.d, kind == TensorKind::Linear ? 0 : f.seed, kDefaultDenseCap};
  const auto tensor = PayoffTensor::from_spec(spec);
  if (f.golden) {
    const JointActionSpace& space = tensor.space();
    require_enumerable(space, f.cap, "golden table");
    std::vector<GoldenEntry> entries;
    for (std::uint64_t i = 0; i < *space.cardinality(); ++i) entries.push_back({i, tensor.reward_at(i)});
    std::cout << "# " << to_string(kind) << " n=" << f.n << " d=" << f.d << " seed=" << spec.seed << "\n"
              << format_golden(entries);
    return 0;
  }
  std::cout << oracle_dump(tensor, f.eps1, f.eps2, f.cap, f.smoothness).dump(2) << "\n";
  return 0;
}

int run_verify(const std::vector<std::string>& paths) {
  int failures = 0;
  for (const auto& p : paths) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open trace " + p);
    const auto problems = verify_trace(read_trace_jsonl(in));
    if (problems.empty()) {
      std::cout << "ok   " << p << "\n";
      continue;
    }
    ++failures;
    std::cout << "FAIL " << p << "\n";
    for (const auto& msg : problems) std::cout << "     " << msg << "\n";
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NonZero multi-agent search experiments"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "Run each experiment and write traces and summaries");
  add_common(run, run_flags);

  CommonFlags matrix_flags;
  auto* matrix = app.add_subcommand("matrix", "Run a planner comparison grid");
  add_common(matrix, matrix_flags);

  OracleFlags oracle_flags;
  auto* oracle = app.add_subcommand("oracle", "Dump local-maximizer sets or golden tables");
  oracle->add_option("--config", oracle_flags.config, "Dump every experiment's environments");
  oracle->add_option("--out", oracle_flags.out, "Output root for --config");
  oracle->add_option("--kind", oracle_flags.kind, "linear or nonlinear");
  oracle->add_option("--n", oracle_flags.n, "Agents");
  oracle->add_option("--d", oracle_flags.d, "Actions per agent");
  oracle->add_option("--seed", oracle_flags.seed, "Tensor seed");
  oracle->add_option("--eps1", oracle_flags.eps1, "Single-deviation tolerance");
  oracle->add_option("--eps2", oracle_flags.eps2, "Pair-deviation tolerance");
  oracle->add_option("--cap", oracle_flags.cap, "Enumeration cap");
  oracle->add_flag("--golden", oracle_flags.golden, "Print every entry as index,value");
  oracle->add_flag("--smoothness", oracle_flags.smoothness, "Include smoothness constants");

  std::vector<std::string> traces;
  auto* verify = app.add_subcommand("verify", "Check trace files against their environments");
  verify->add_option("traces", traces, "trace.jsonl files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run) {
      for (const auto& c : load(run_flags)) run_experiment(c, std::cerr);
      return 0;
    }
    if (*matrix) {
      auto cfgs = load(matrix_flags);
      const fs::path root = output_root(cfgs.front());
      run_matrix(cfgs, root, std::cout);
      return 0;
    }
    if (*oracle) return run_oracle(oracle_flags);
    if (*verify) return run_verify(traces);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}
