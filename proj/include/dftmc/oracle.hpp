#pragma once

// Ground-truth calculators for cross-checking the estimator. Nothing here
// goes through the engine's sampling, weighting or gate-evaluation code:
// each routine has its own (deliberately naive) implementation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dftmc/error.hpp"
#include "dftmc/tree.hpp"

namespace dftmc::oracle {

struct ExactStaticResult final {
  double probability = 0.0;
  std::uint64_t term_count = 0;
};

inline constexpr std::size_t kMaxExactEvents = 20;

/// Exact P{TOP fails before T} for a static tree by enumerating all 2^N
/// Boolean states of the basic events.
inline ExactStaticResult exact_static(const FaultTree& tree, double mission_time) {
  for (const auto& g : tree.gates()) {
    if (g.type.kind != GateKind::And && g.type.kind != GateKind::Or &&
        g.type.kind != GateKind::Voting) {
      throw UnsupportedError("exact enumeration supports and/or/vote gates only; gate '" +
                             g.name + "' is " + std::string(gate_keyword(g.type.kind)));
    }
  }
  const std::size_t n = tree.num_events();
  if (n > kMaxExactEvents) {
    throw UnsupportedError("exact enumeration is limited to " + std::to_string(kMaxExactEvents) +
                           " basic events, tree has " + std::to_string(n));
  }
  std::vector<double> fail_p(n);
  std::vector<double> ok_p(n);
  for (std::size_t i = 0; i < n; ++i) {
    fail_p[i] = tree.events()[i].law.cdf(mission_time);
    ok_p[i] = tree.events()[i].law.survival(mission_time);
  }

  // Memoised recursive Boolean evaluation, reset per state.
  std::vector<signed char> memo(tree.num_nodes());
  std::uint64_t state = 0;
  std::function<bool(std::size_t)> failed = [&](std::size_t node) -> bool {
    if (tree.is_event(node)) return (state >> node) & 1u;
    if (memo[node] >= 0) return memo[node] == 1;
    const auto& g = tree.gate(node);
    std::size_t down = 0;
    for (std::size_t c : g.children) down += failed(c) ? 1 : 0;
    bool out = false;
    switch (g.type.kind) {
      case GateKind::Or: out = down >= 1; break;
      case GateKind::And: out = down == g.children.size(); break;
      case GateKind::Voting: out = down >= g.type.k; break;
      default: break;
    }
    memo[node] = out ? 1 : 0;
    return out;
  };

  ExactStaticResult r;
  r.term_count = std::uint64_t{1} << n;
  for (state = 0; state < r.term_count; ++state) {
    std::fill(memo.begin(), memo.end(), -1);
    if (!failed(tree.top())) continue;
    double mass = 1.0;
    for (std::size_t i = 0; i < n; ++i) mass *= ((state >> i) & 1u) ? fail_p[i] : ok_p[i];
    r.probability += mass;
  }
  return r;
}

/// Small-p approximation for TOP = (1 and 2 and 3) PAND (2 and 3 and 4)
/// with exponential events of MTTF u_1..u_4.
///
/// TOP fails before T iff x2, x3, x4 < T and x1 <= max(x2, x3, x4). For
/// p_i = 1 - exp(-T/u_i) << 1 each conditional law on [0, T) is nearly
/// uniform, and for four i.i.d. uniforms P(U1 <= max(U2, U3, U4)) = 3/4,
/// giving (3/4) * p1 * p2 * p3 * p4.
inline double smallp_pand_overlap(double mission_time, std::span<const double, 4> mttf) {
  double prod = 0.75;
  for (double u : mttf) prod *= -std::expm1(-mission_time / u);
  return prod;
}

struct DirectResult final {
  double p_hat = 0.0;
  double std_err = 0.0;
  std::uint64_t hits = 0;
};

namespace detail {

// Recursive failure-time evaluation, independent of eval_gate().
inline double failure_time(const FaultTree& tree, std::size_t node, std::span<const double> x,
                           std::vector<double>& cache, std::vector<bool>& done) {
  if (tree.is_event(node)) return x[node];
  if (done[node]) return cache[node];
  const auto& g = tree.gate(node);
  std::vector<double> z;
  z.reserve(g.children.size());
  for (std::size_t c : g.children) z.push_back(failure_time(tree, c, x, cache, done));

  double y = 0.0;
  switch (g.type.kind) {
    case GateKind::Or:
      y = INFINITY;
      for (double v : z) y = v < y ? v : y;
      break;
    case GateKind::And:
      y = 0.0;
      for (double v : z) y = v > y ? v : y;
      break;
    case GateKind::Voting: {
      std::sort(z.begin(), z.end());
      y = z[g.type.k - 1];
      break;
    }
    case GateKind::Pand:
      y = std::is_sorted(z.begin(), z.end()) ? z.back() : INFINITY;
      break;
    case GateKind::Seq:
      y = 0.0;
      for (double v : z) y += v;
      break;
    case GateKind::Spare: {
      const double a = g.type.dormancy;
      if (z[1] < a * z[0]) {
        y = z[0];
      } else if (std::isinf(z[0]) || std::isinf(z[1])) {
        y = INFINITY;
      } else {
        y = (1.0 - a) * z[0] + z[1];
      }
      break;
    }
  }
  cache[node] = y;
  done[node] = true;
  return y;
}

}  // namespace detail

/// Plain Monte Carlo from the base laws: no reference laws, no weights.
/// Intended for non-rare trees (expected hits >= 100).
inline DirectResult direct_rich(const FaultTree& tree, double mission_time, std::uint64_t cycles,
                                std::uint64_t seed = 1) {
  if (cycles < 2) throw Error("direct_rich: insufficient cycles (need at least 2)");
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> x(tree.num_events());
  std::vector<double> cache(tree.num_nodes());
  std::vector<bool> done(tree.num_nodes());
  DirectResult r;
  for (std::uint64_t j = 0; j < cycles; ++j) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      double u = unit(gen);
      while (u <= 0.0) u = unit(gen);
      x[i] = tree.events()[i].law.quantile(u);
    }
    std::fill(done.begin(), done.end(), false);
    if (detail::failure_time(tree, tree.top(), x, cache, done) < mission_time) ++r.hits;
  }
  const double n = static_cast<double>(cycles);
  r.p_hat = static_cast<double>(r.hits) / n;
  r.std_err = std::sqrt(r.p_hat * (1.0 - r.p_hat) / (n - 1.0));
  return r;
}

}  // namespace dftmc::oracle
