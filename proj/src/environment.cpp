#include "nonzero/environment.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "nonzero/errors.hpp"

namespace nonzero {

namespace {

constexpr std::uint64_t kGaussianStream = 0x6761757373ULL;  // uses this and the next stream
constexpr std::uint64_t kUniformStream = 0x756e69666fULL;

double index_sum(const JointActionSpace& space, std::uint64_t index) {
  const auto d = static_cast<std::uint64_t>(space.actions_per_agent());
  double sum = 0.0;
  for (int i = 0; i < space.agents(); ++i) {
    sum += static_cast<double>(index % d);
    index /= d;
  }
  return sum;
}

}  // namespace

std::string to_string(TensorKind kind) {
  switch (kind) {
    case TensorKind::Linear: return "linear";
    case TensorKind::Nonlinear: return "nonlinear";
    case TensorKind::Table: return "table";
  }
  return "unknown";
}

TensorKind tensor_kind_from_string(const std::string& name) {
  if (name == "linear") return TensorKind::Linear;
  if (name == "nonlinear") return TensorKind::Nonlinear;
  if (name == "table") return TensorKind::Table;
  throw InvalidArgument("unknown tensor kind '" + name + "'");
}

nlohmann::json to_json(const TensorSpec& spec) {
  return {{"kind", to_string(spec.kind)},
          {"n", spec.n},
          {"d", spec.d},
          {"seed", spec.seed},
          {"dense_cap", spec.dense_cap}};
}

TensorSpec tensor_spec_from_json(const nlohmann::json& j) {
  TensorSpec spec;
  spec.kind = tensor_kind_from_string(j.at("kind").get<std::string>());
  spec.n = j.at("n").get<int>();
  spec.d = j.at("d").get<int>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.dense_cap = j.value("dense_cap", kDefaultDenseCap);
  return spec;
}

PayoffTensor::PayoffTensor(JointActionSpace space, TensorSpec spec)
    : space_(std::move(space)), spec_(spec) {
  if (!space_.cardinality()) {
    throw InvalidArgument("payoff tensors need an action space with at most 2^63 entries");
  }
}

void PayoffTensor::materialize() {
  const std::uint64_t size = *space_.cardinality();
  if (size > spec_.dense_cap) return;
  table_.resize(size);
  for (std::uint64_t k = 0; k < size; ++k) table_[k] = evaluate(k);
}

PayoffTensor PayoffTensor::make_linear(int n, int d, std::uint64_t seed, std::uint64_t dense_cap) {
  return from_spec({TensorKind::Linear, n, d, seed, dense_cap});
}

PayoffTensor PayoffTensor::make_nonlinear(int n, int d, std::uint64_t seed,
                                          std::uint64_t dense_cap) {
  return from_spec({TensorKind::Nonlinear, n, d, seed, dense_cap});
}

PayoffTensor PayoffTensor::from_spec(const TensorSpec& spec) {
  if (spec.kind == TensorKind::Table) {
    throw InvalidArgument("table tensors are built with from_table");
  }
  PayoffTensor t(JointActionSpace(spec.n, spec.d), spec);
  t.materialize();
  return t;
}

PayoffTensor PayoffTensor::from_table(const JointActionSpace& space, std::vector<double> values) {
  TensorSpec spec{TensorKind::Table, space.agents(), space.actions_per_agent(), 0,
                  kDefaultDenseCap};
  PayoffTensor t(space, spec);
  if (values.size() != *space.cardinality()) {
    throw DimensionMismatch("table has " + std::to_string(values.size()) + " values, expected " +
                            std::to_string(*space.cardinality()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("table values must be finite");
  }
  t.spec_.dense_cap = std::max<std::uint64_t>(values.size(), kDefaultDenseCap);
  t.table_ = std::move(values);
  return t;
}

double PayoffTensor::evaluate(std::uint64_t index) const {
  if (index >= *space_.cardinality()) throw InvalidAction("linear index out of range");
  const double base = index_sum(space_, index);
  switch (spec_.kind) {
    case TensorKind::Linear:
      return base;
    case TensorKind::Nonlinear: {
      const double gaussian = 2.0 * counter_normal(spec_.seed, index, kGaussianStream);
      const double uniform =
          6.0 * word_to_open_unit(counter_hash(spec_.seed, index, kUniformStream)) - 3.0;
      return base + gaussian + uniform;
    }
    case TensorKind::Table:
      break;
  }
  throw InvalidArgument("table tensors have no closed form");
}

double PayoffTensor::reward_at(std::uint64_t index) const {
  if (!table_.empty()) {
    if (index >= table_.size()) throw InvalidAction("linear index out of range");
    return table_[index];
  }
  return evaluate(index);
}

double PayoffTensor::reward(const JointAction& a) const {
  return reward_at(space_.linear_index(a));
}

double PayoffTensor::noisy_reward(const JointAction& a, double sigma, Rng& rng) const {
  const double r = reward(a);
  if (sigma <= 0.0) return r;
  // Box-Muller from two engine draws; the std distributions are not portable.
  const double u1 = 1.0 - uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  return r + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

CoordinationTrap make_coordination_trap(std::uint64_t seed) {
  constexpr int kN = 2;
  constexpr int kD = 4;
  Rng rng(mix64(seed ^ 0x74726170ULL));
  auto jitter = [&rng](double width) { return width * uniform_unit(rng); };

  // Canonical layout: trap at (0,0), escape at (1,1).
  std::array<std::array<double, kD>, kD> f{};
  f[0][0] = 0.0;
  const double mild = -1.0 + jitter(0.3);
  f[1][0] = mild + jitter(0.1);
  f[0][1] = mild + jitter(0.1);
  for (int j = 2; j < kD; ++j) {
    f[j][0] = -2.0 - static_cast<double>(j) - jitter(0.5);
    f[0][j] = -2.0 - static_cast<double>(j) - jitter(0.5);
  }
  for (int j = 1; j < kD; ++j) {
    for (int l = 1; l < kD; ++l) f[j][l] = -6.0 - jitter(2.0);
  }
  f[1][1] = 2.0 + jitter(1.0);

  std::array<std::array<int, kD>, kN> relabel{};
  for (auto& perm : relabel) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int k = kD - 1; k > 0; --k) {
      const auto m = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(k + 1)));
      std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(m)]);
    }
  }

  const JointActionSpace space(kN, kD);
  std::vector<double> values(kD * kD, 0.0);
  for (int j = 0; j < kD; ++j) {
    for (int l = 0; l < kD; ++l) {
      const JointAction a{relabel[0][static_cast<std::size_t>(j)],
                          relabel[1][static_cast<std::size_t>(l)]};
      values[space.linear_index(a)] = f[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)];
    }
  }
  return {PayoffTensor::from_table(space, std::move(values)),
          JointAction{relabel[0][0], relabel[1][0]}, JointAction{relabel[0][1], relabel[1][1]}};
}

EpisodicMatGame::EpisodicMatGame(PayoffTensor tensor, int horizon, double discount,
                                 double reward_noise)
    : tensor_(std::move(tensor)), horizon_(horizon), discount_(discount),
      reward_noise_(reward_noise) {
  if (horizon_ < 1) throw InvalidArgument("horizon must be at least 1");
  if (!(discount_ >= 0.0 && discount_ < 1.0)) throw InvalidArgument("discount must lie in [0, 1)");
  if (!(reward_noise_ >= 0.0) || !std::isfinite(reward_noise_)) {
    throw InvalidArgument("reward noise must be finite and non-negative");
  }
}

double EpisodicMatGame::step_reward(int t, const JointAction& a, Rng& rng) const {
  if (t < 0 || t >= horizon_) throw InvalidArgument("step outside the episode");
  return tensor_.noisy_reward(a, reward_noise_, rng);
}

double EpisodicMatGame::episode_return(const std::vector<JointAction>& actions) const {
  if (actions.size() != static_cast<std::size_t>(horizon_)) {
    throw InvalidArgument("episode needs exactly one joint action per step");
  }
  double total = 0.0;
  double weight = 1.0;
  for (const auto& a : actions) {
    total += weight * tensor_.reward(a);
    weight *= discount_;
  }
  return total;
}

std::vector<GoldenEntry> parse_golden(const std::string& text) {
  std::vector<GoldenEntry> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw InvalidArgument("golden line " + std::to_string(lineno) + " lacks a comma");
    }
    GoldenEntry e{};
    const std::string idx = line.substr(first, comma - first);
    const auto [p, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), e.index);
    if (ec != std::errc{} || p != idx.data() + idx.size()) {
      throw InvalidArgument("golden line " + std::to_string(lineno) + " has a bad index");
    }
    try {
      std::size_t used = 0;
      const std::string val = line.substr(comma + 1);
      e.value = std::stod(val, &used);
    } catch (const std::exception&) {
      throw InvalidArgument("golden line " + std::to_string(lineno) + " has a bad value");
    }
    out.push_back(e);
  }
  return out;
}

std::string format_golden(const std::vector<GoldenEntry>& entries) {
  std::string out;
  char buf[64];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%llu,%.17g\n", static_cast<unsigned long long>(e.index),
                  e.value);
    out += buf;
  }
  return out;
}

}  // namespace nonzero
