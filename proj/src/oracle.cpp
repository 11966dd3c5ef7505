#include "nonzero/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "nonzero/errors.hpp"

namespace nonzero {

namespace {

// Splits [0, count) into contiguous chunks, one per worker.
template <typename Fn>
void parallel_ranges(std::uint64_t count, int threads, Fn&& fn) {
  const auto workers = static_cast<std::uint64_t>(std::max(1, threads));
  if (workers == 1 || count < 2 * workers) {
    fn(std::uint64_t{0}, count, 0);
    return;
  }
  std::vector<std::thread> pool;
  const std::uint64_t chunk = (count + workers - 1) / workers;
  for (std::uint64_t w = 0; w < workers; ++w) {
    const std::uint64_t lo = w * chunk;
    const std::uint64_t hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi, w] { fn(lo, hi, static_cast<int>(w)); });
  }
  for (auto& t : pool) t.join();
}

// Index arithmetic over the lexicographic layout.
struct Digits {
  explicit Digits(const JointActionSpace& space) : n(space.agents()), d(space.actions_per_agent()) {
    for (int i = 0; i < n; ++i) strides.push_back(space.stride(i));
  }
  int digit(std::uint64_t index, int agent) const {
    return static_cast<int>(index / strides[static_cast<std::size_t>(agent)] %
                            static_cast<std::uint64_t>(d));
  }
  std::uint64_t moved(std::uint64_t index, int agent, int from, int to) const {
    const std::uint64_t s = strides[static_cast<std::size_t>(agent)];
    return index - static_cast<std::uint64_t>(from) * s + static_cast<std::uint64_t>(to) * s;
  }

  int n;
  int d;
  std::vector<std::uint64_t> strides;
};

DeviationGains gains_at(const std::vector<double>& f, const Digits& dg, std::uint64_t index) {
  DeviationGains g;
  const double f0 = f[index];
  std::vector<int> a(static_cast<std::size_t>(dg.n));
  for (int i = 0; i < dg.n; ++i) a[static_cast<std::size_t>(i)] = dg.digit(index, i);
  for (int i = 0; i < dg.n; ++i) {
    const int ai = a[static_cast<std::size_t>(i)];
    for (int j = 0; j < dg.d; ++j) {
      if (j == ai) continue;
      const std::uint64_t b = dg.moved(index, i, ai, j);
      g.g1 = std::max(g.g1, f[b] - f0);
      for (int k = i + 1; k < dg.n; ++k) {
        const int ak = a[static_cast<std::size_t>(k)];
        for (int l = 0; l < dg.d; ++l) {
          if (l == ak) continue;
          g.g2 = std::max(g.g2, f[dg.moved(b, k, ak, l)] - f0);
        }
      }
    }
  }
  return g;
}

}  // namespace

void require_enumerable(const JointActionSpace& space, std::uint64_t cap, const char* what) {
  const auto card = space.cardinality();
  if (!card || *card > cap) {
    throw CapExceeded(std::string(what) + " needs exhaustive enumeration of " +
                      std::to_string(space.agents()) + " agents x " +
                      std::to_string(space.actions_per_agent()) +
                      " actions, above the enumeration cap of " + std::to_string(cap));
  }
}

Landscape Landscape::from_tensor(const PayoffTensor& tensor, std::uint64_t cap) {
  require_enumerable(tensor.space(), cap, "landscape");
  const std::uint64_t size = *tensor.space().cardinality();
  std::vector<double> values(size);
  for (std::uint64_t k = 0; k < size; ++k) values[k] = tensor.reward_at(k);
  return Landscape(tensor.space(), std::move(values));
}

Landscape Landscape::from_function(const JointActionSpace& space, const RewardFunction& f,
                                   std::uint64_t cap) {
  require_enumerable(space, cap, "landscape");
  const std::uint64_t size = *space.cardinality();
  std::vector<double> values(size);
  for (std::uint64_t k = 0; k < size; ++k) values[k] = f(space.from_linear_index(k));
  return Landscape(space, std::move(values));
}

ArgmaxResult global_argmax(const Landscape& f) {
  const auto& v = f.values();
  const auto best = std::max_element(v.begin(), v.end());  // first maximum on ties
  const auto index = static_cast<std::uint64_t>(best - v.begin());
  return {f.space().from_linear_index(index), *best};
}

DeviationGains deviation_gains(const Landscape& f, std::uint64_t index) {
  if (index >= f.size()) throw InvalidAction("linear index out of range");
  return gains_at(f.values(), Digits(f.space()), index);
}

DeviationGains deviation_gains(const Landscape& f, const JointAction& a) {
  return deviation_gains(f, f.space().linear_index(a));
}

DeviationGains deviation_gains(const JointActionSpace& space, const RewardFunction& f,
                               const JointAction& a) {
  space.validate(a);
  DeviationGains g;
  const double f0 = f(a);
  for (const auto& nb : neighbors(space, a)) g.g1 = std::max(g.g1, f(nb.action) - f0);
  if (space.agents() >= 2) {
    for (const auto& [u, v] : feasible_pairs(space, a)) {
      g.g2 = std::max(g.g2, f(apply_pair(a, u, v)) - f0);
    }
  }
  return g;
}

LocalOptimalityReport local_report(const Landscape& f, const JointAction& a, double eps1,
                                   double eps2) {
  const DeviationGains g = deviation_gains(f, a);
  return {a, g.g1, g.g2, g.g1 <= eps1 && g.g2 <= eps2};
}

LocalSet::LocalSet(std::vector<bool> membership, double eps1, double eps2)
    : membership_(std::move(membership)), eps1_(eps1), eps2_(eps2) {
  for (std::uint64_t k = 0; k < membership_.size(); ++k) {
    if (membership_[k]) members_.push_back(k);
  }
}

std::vector<DeviationGains> all_deviation_gains(const Landscape& f, int threads) {
  const Digits dg(f.space());
  std::vector<DeviationGains> out(f.size());
  parallel_ranges(f.size(), threads, [&](std::uint64_t lo, std::uint64_t hi, int) {
    for (std::uint64_t k = lo; k < hi; ++k) out[k] = gains_at(f.values(), dg, k);
  });
  return out;
}

LocalSet local_maximizer_set(const Landscape& f, double eps1, double eps2, int threads) {
  if (!(eps1 >= 0.0) || !(eps2 >= 0.0)) throw InvalidArgument("eps thresholds must be non-negative");
  const auto gains = all_deviation_gains(f, threads);
  std::vector<bool> member(gains.size());
  for (std::size_t k = 0; k < gains.size(); ++k) {
    member[k] = gains[k].g1 <= eps1 && gains[k].g2 <= eps2;
  }
  return LocalSet(std::move(member), eps1, eps2);
}

SmoothnessReport estimate_smoothness(const Landscape& f, int threads) {
  const Digits dg(f.space());
  const auto& v = f.values();
  const int n = dg.n;
  const int d = dg.d;
  std::vector<SmoothnessReport> partial(static_cast<std::size_t>(std::max(1, threads)));

  parallel_ranges(f.size(), threads, [&](std::uint64_t lo, std::uint64_t hi, int worker) {
    SmoothnessReport r;
    std::vector<int> a(static_cast<std::size_t>(n));
    for (std::uint64_t x = lo; x < hi; ++x) {
      for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = dg.digit(x, i);
      // Mixed difference of (i <- j, k <- l) at index y, whose digits for
      // agents i and k are yi and yk.
      auto mixed = [&](std::uint64_t y, int i, int yi, int j, int k, int yk, int l) {
        const std::uint64_t yu = dg.moved(y, i, yi, j);
        const std::uint64_t yv = dg.moved(y, k, yk, l);
        const std::uint64_t yuv = dg.moved(yu, k, yk, l);
        return v[yuv] - v[yu] - v[yv] + v[y];
      };
      for (int i = 0; i < n; ++i) {
        const int ai = a[static_cast<std::size_t>(i)];
        for (int j = 0; j < d; ++j) {
          if (j == ai) continue;
          r.zeta1 = std::max(r.zeta1, std::abs(v[dg.moved(x, i, ai, j)] - v[x]));
          for (int k = i + 1; k < n; ++k) {
            const int ak = a[static_cast<std::size_t>(k)];
            for (int l = 0; l < d; ++l) {
              if (l == ak) continue;
              const double m0 = mixed(x, i, ai, j, k, ak, l);
              r.zeta2 = std::max(r.zeta2, std::abs(m0));
              for (int p = 0; p < n; ++p) {
                const int ap = a[static_cast<std::size_t>(p)];
                for (int q = 0; q < d; ++q) {
                  if (q == ap) continue;
                  if (p == i && q == j) continue;
                  if (p == k && q == l) continue;
                  const std::uint64_t y = dg.moved(x, p, ap, q);
                  const int yi = p == i ? q : ai;
                  const int yk = p == k ? q : ak;
                  r.zeta3 = std::max(r.zeta3, std::abs(mixed(y, i, yi, j, k, yk, l) - m0));
                }
              }
            }
          }
        }
      }
    }
    partial[static_cast<std::size_t>(worker)] = r;
  });

  SmoothnessReport out;
  for (const auto& r : partial) {
    out.zeta1 = std::max(out.zeta1, r.zeta1);
    out.zeta2 = std::max(out.zeta2, r.zeta2);
    out.zeta3 = std::max(out.zeta3, r.zeta3);
  }
  return out;
}

SmoothnessReport sample_smoothness(const Landscape& f, std::uint64_t samples, Rng& rng) {
  const auto& space = f.space();
  SmoothnessReport r;
  for (std::uint64_t s = 0; s < samples; ++s) {
    const JointAction a = space.uniform_action(rng);
    const Direction u = sample_direction(space, a, rng);
    r.zeta1 = std::max(r.zeta1, std::abs(f(apply_direction(a, u)) - f(a)));
    if (space.agents() < 2) continue;
    const auto [p, q] = sample_direction_pair(space, a, rng);
    auto mixed = [&](const JointAction& b) {
      return f(apply_pair(b, p, q)) - f(apply_direction(b, p)) - f(apply_direction(b, q)) + f(b);
    };
    const double m0 = mixed(a);
    r.zeta2 = std::max(r.zeta2, std::abs(m0));
    const Direction w = sample_direction(space, a, rng);
    const JointAction aw = apply_direction(a, w);
    if (is_feasible(aw, p) && is_feasible(aw, q)) {
      r.zeta3 = std::max(r.zeta3, std::abs(mixed(aw) - m0));
    }
  }
  return r;
}

double eps2_from_zeta3(double zeta3, double eps) {
  if (zeta3 < 0.0) throw InvalidArgument("zeta3 must be non-negative");
  return 6.0 * std::sqrt(zeta3) * eps;
}

namespace {

nlohmann::json finite_or_null(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const DeviationGains& g) {
  return {{"g1", finite_or_null(g.g1)}, {"g2", finite_or_null(g.g2)}};
}

nlohmann::json to_json(const LocalOptimalityReport& r) {
  return {{"action", r.a.values()},
          {"g1", finite_or_null(r.g1)},
          {"g2", finite_or_null(r.g2)},
          {"is_local", r.is_local}};
}

nlohmann::json to_json(const SmoothnessReport& r) {
  return {{"zeta1", r.zeta1}, {"zeta2", r.zeta2}, {"zeta3", r.zeta3}};
}

}  // namespace nonzero
