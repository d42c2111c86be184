#pragma once

// Rare-event estimation of P{TOP fails before T} by importance sampling.
//
// Every basic event is sampled from a scaled reference law g_i whose scale
// v_i is tied to a single parameter D through 1 - G_i(T) = (1 - F_i(T)) / D.
// A cycle's likelihood ratio uses mixed continuous-discrete densities: the
// density ratio f_i/g_i for times below T and the survival-mass ratio
// (1 - F_i(T)) / (1 - G_i(T)) = D for times at or beyond T. A short
// preliminary search picks D so that the raw hit count of a small batch
// lands inside [ampos_low, ampos_high].

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "dftmc/distributions.hpp"
#include "dftmc/error.hpp"
#include "dftmc/random.hpp"
#include "dftmc/tree.hpp"

namespace dftmc {

enum class Method { Auto, Importance, Direct };

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::Auto: return "auto";
    case Method::Importance: return "importance";
    case Method::Direct: return "direct";
  }
  return "?";
}

struct RunConfig final {
  double mission_time = 0.0;
  std::uint64_t cycles = 100000;
  std::uint64_t prelim_cycles = 1000;
  std::uint64_t ampos_low = 10;
  std::uint64_t ampos_high = 100;
  double confidence = 0.999;
  std::uint64_t seed = 0;
  unsigned max_search_iterations = 30;
  Method method = Method::Auto;
  /// Worker threads; results are identical for any value.
  unsigned threads = 1;

  void validate() const {
    auto fail = [](const std::string& m) { throw ValidationError("run configuration: " + m); };
    if (!(std::isfinite(mission_time) && mission_time > 0.0)) fail("mission time must be positive");
    if (cycles == 0) fail("cycles must be positive");
    if (prelim_cycles == 0) fail("prelim cycles must be positive");
    if (ampos_low == 0) fail("ampos low bound must be positive");
    if (!(ampos_low < ampos_high)) fail("ampos low bound must be below the high bound");
    if (ampos_high > prelim_cycles) fail("ampos high bound exceeds prelim cycles");
    if (cycles < prelim_cycles) fail("cycles must be at least prelim cycles");
    if (!(confidence > 0.0 && confidence < 1.0)) fail("confidence must lie in (0, 1)");
    if (max_search_iterations == 0) fail("max search iterations must be positive");
  }
};

/// Two-sided standard-normal quantile for a confidence level.
inline double z_value(double confidence) {
  return std::numbers::sqrt2 * boost::math::erfc_inv(1.0 - confidence);
}

/// Per-event reference laws for one value of D.
struct ReferenceModel final {
  double big_d = 1.0;
  double mission_time = 0.0;
  std::vector<ReferenceDistribution> refs;
  /// log((1 - F_i(T)) / (1 - G_i(T))), i.e. log D up to rounding.
  std::vector<double> log_tail_ratio;
  /// g_i is f_i itself; the event contributes a factor of exactly 1.
  std::vector<bool> identity;

  static ReferenceModel build(const FaultTree& tree, double big_d, double mission_time) {
    ReferenceModel m;
    m.big_d = big_d;
    m.mission_time = mission_time;
    for (const EventDecl& e : tree.events()) {
      const Distribution& f = e.law;
      if (big_d == 1.0) {
        const bool scalable = f.family() != Family::Normal || f.first() > 0.0;
        const double v = scalable ? f.scale_parameter() : std::numeric_limits<double>::quiet_NaN();
        m.refs.push_back({f, v, f});
      } else {
        try {
          m.refs.push_back(scale(f, solve_reference(f, big_d, mission_time)));
        } catch (const Error& err) {
          throw SolverError("basic event '" + e.name + "': " + err.what());
        }
      }
      const ReferenceDistribution& r = m.refs.back();
      const bool same = r.law == f;
      m.identity.push_back(same);
      m.log_tail_ratio.push_back(
          same ? 0.0 : f.log_survival(mission_time) - r.law.log_survival(mission_time));
    }
    return m;
  }

  std::size_t size() const noexcept { return refs.size(); }
};

/// One basic-event time per event, each by inverse transform from its
/// reference law.
inline void draw_sample(const ReferenceModel& model, CycleStream& stream, std::span<Time> out) {
  for (std::size_t i = 0; i < model.refs.size(); ++i) {
    out[i] = model.refs[i].law.quantile(stream.uniform());
  }
}

inline double log_cycle_weight(const ReferenceModel& model, std::span<const Time> sample) {
  const double horizon = model.mission_time;
  double log_w = 0.0;
  for (std::size_t i = 0; i < model.refs.size(); ++i) {
    if (model.identity[i]) continue;
    const Time t = sample[i];
    if (t < horizon) {
      log_w += model.refs[i].base.log_pdf(t) - model.refs[i].law.log_pdf(t);
    } else {
      log_w += model.log_tail_ratio[i];
    }
  }
  if (!std::isfinite(log_w)) {
    throw ModelError("likelihood ratio is undefined for the sampled failure times");
  }
  return log_w;
}

/// Likelihood ratio prod_i f_modif_i(t_i) / g_modif_i(t_i) of one cycle.
inline double cycle_weight(const ReferenceModel& model, std::span<const Time> sample) {
  return std::exp(log_cycle_weight(model, sample));
}

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct BatchResult final {
  std::uint64_t cycles = 0;
  /// Raw indicator hits (AmPos).
  std::uint64_t hits = 0;
  /// Sum over cycles of I * w.
  double sum = 0.0;
  /// Sum over cycles of (I * w)^2.
  double sum_sq = 0.0;
};

namespace detail {

inline constexpr std::uint64_t kChunkCycles = 4096;

struct ChunkResult {
  std::uint64_t hits = 0;
  CompensatedSum sum;
  CompensatedSum sum_sq;
};

inline ChunkResult run_chunk(const FaultTree& tree, const ReferenceModel& model,
                             std::uint64_t first, std::uint64_t last, std::uint64_t seed,
                             std::uint32_t phase) {
  ChunkResult r;
  std::vector<Time> sample(tree.num_events());
  std::vector<Time> scratch(tree.num_nodes());
  for (std::uint64_t j = first; j < last; ++j) {
    CycleStream stream(seed, phase, j);
    draw_sample(model, stream, sample);
    if (tree.evaluate(sample, scratch) < model.mission_time) {
      ++r.hits;
      const double w = cycle_weight(model, sample);
      r.sum.add(w);
      r.sum_sq.add(w * w);
    }
  }
  return r;
}

}  // namespace detail

/// Simulates cycles [0, n_cycles) of stream `phase`. Cycles are grouped in
/// fixed chunks merged in chunk order, so the result is bit-identical for
/// every thread count.
inline BatchResult run_batch(const FaultTree& tree, const ReferenceModel& model,
                             std::uint64_t n_cycles, std::uint64_t seed, std::uint32_t phase,
                             unsigned threads = 1) {
  BatchResult out;
  out.cycles = n_cycles;
  if (n_cycles == 0) return out;

  const std::uint64_t chunks = (n_cycles + detail::kChunkCycles - 1) / detail::kChunkCycles;
  std::vector<detail::ChunkResult> parts(chunks);
  auto run = [&](std::uint64_t c) {
    const std::uint64_t first = c * detail::kChunkCycles;
    const std::uint64_t last = std::min(n_cycles, first + detail::kChunkCycles);
    parts[c] = detail::run_chunk(tree, model, first, last, seed, phase);
  };

  const auto workers = static_cast<unsigned>(
      std::min<std::uint64_t>(std::max(threads, 1u), chunks));
  if (workers == 1) {
    for (std::uint64_t c = 0; c < chunks; ++c) run(c);
  } else {
    std::atomic<std::uint64_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::uint64_t c = next++; c < chunks; c = next++) run(c);
        } catch (...) {
          errors[w] = std::current_exception();
          next = chunks;
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  CompensatedSum sum;
  CompensatedSum sum_sq;
  for (const auto& p : parts) {
    out.hits += p.hits;
    sum.add(p.sum.value());
    sum_sq.add(p.sum_sq.value());
  }
  out.sum = sum.value();
  out.sum_sq = sum_sq.value();
  return out;
}

/// One row of the D-search log. d_low/d_high are the bracket in force
/// when the iteration was run; d_high is +infinity until bracketed.
struct SearchIteration final {
  unsigned ic = 0;
  double d = 1.0;
  double d_low = 1.0;
  double d_high = std::numeric_limits<double>::infinity();
  std::uint64_t ampos = 0;

  bool operator==(const SearchIteration&) const = default;
};

using SearchTrace = std::vector<SearchIteration>;

class SearchError : public Error {
 public:
  SearchError(const std::string& msg, SearchTrace trace)
      : Error(msg), trace_(std::move(trace)) {}
  const SearchTrace& trace() const noexcept { return trace_; }

 private:
  SearchTrace trace_;
};

struct Selection final {
  /// The first preliminary batch already hit TOP: plain simulation suffices.
  bool direct = false;
  ReferenceModel model;
  SearchTrace trace;
};

namespace detail {

// Secant step on (log D, log AmPos) through the last two iterates with
// hits, aimed at log sqrt(low * high); geometric bracket midpoint when the
// step is unavailable or leaves the open bracket.
inline double next_bracketed_d(const SearchTrace& trace, double d_low, double d_high,
                               double target_log_ampos) {
  const double fallback = std::sqrt(d_low * d_high);
  const SearchIteration* last[2] = {nullptr, nullptr};
  for (auto it = trace.rbegin(); it != trace.rend() && !last[1]; ++it) {
    if (it->ampos == 0) continue;
    (last[0] ? last[1] : last[0]) = &*it;
  }
  if (!last[1]) return fallback;
  const double x0 = std::log(last[0]->d);
  const double x1 = std::log(last[1]->d);
  const double y0 = std::log(static_cast<double>(last[0]->ampos));
  const double y1 = std::log(static_cast<double>(last[1]->ampos));
  if (x0 == x1 || y0 == y1) return fallback;
  const double d = std::exp(x0 + (target_log_ampos - y0) * (x1 - x0) / (y1 - y0));
  if (!(d > d_low && d < d_high)) return fallback;
  return d;
}

}  // namespace detail

/// Preliminary search for D. Iteration IC runs prelim_cycles fresh cycles
/// (stream phase IC). With Method::Auto a hit in the very first batch at
/// D = 1 means importance sampling is not needed.
inline Selection select_reference(const FaultTree& tree, const RunConfig& config) {
  config.validate();
  const double horizon = config.mission_time;
  const double target = 0.5 * (std::log(static_cast<double>(config.ampos_low)) +
                               std::log(static_cast<double>(config.ampos_high)));
  Selection sel;
  double d_low = 1.0;
  double d_high = std::numeric_limits<double>::infinity();
  double d = 1.0;
  for (unsigned ic = 1; ic <= config.max_search_iterations; ++ic) {
    ReferenceModel model = ReferenceModel::build(tree, d, horizon);
    const BatchResult batch = run_batch(tree, model, config.prelim_cycles, config.seed, ic,
                                        config.threads);
    sel.trace.push_back({ic, d, d_low, d_high, batch.hits});

    if (ic == 1 && batch.hits > 0 && config.method == Method::Auto) {
      sel.direct = true;
      sel.model = std::move(model);
      return sel;
    }
    if (batch.hits >= config.ampos_low && batch.hits <= config.ampos_high) {
      sel.model = std::move(model);
      return sel;
    }
    if (batch.hits < config.ampos_low) {
      d_low = d;
    } else {
      d_high = d;
    }
    // Too many hits already at D = 1; D cannot go lower.
    if (d_high <= 1.0) {
      sel.model = std::move(model);
      return sel;
    }
    d = std::isinf(d_high) ? 2.0 * d : detail::next_bracketed_d(sel.trace, d_low, d_high, target);
  }
  throw SearchError("no D produced a hit count in [" + std::to_string(config.ampos_low) + ", " +
                        std::to_string(config.ampos_high) + "] within " +
                        std::to_string(config.max_search_iterations) + " iterations",
                    std::move(sel.trace));
}

struct Estimate final {
  Method method = Method::Direct;
  double p_hat = 0.0;
  double std_err = 0.0;
  double confidence = 0.0;
  double z = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t cycles = 0;
  SearchTrace trace;
  /// Present when importance sampling was used.
  std::optional<ReferenceModel> reference;
};

/// Sample mean, standard error and confidence interval of I * w.
inline Estimate summarize(const BatchResult& batch, double confidence) {
  Estimate e;
  const auto k = static_cast<double>(batch.cycles);
  e.cycles = batch.cycles;
  e.hits = batch.hits;
  e.confidence = confidence;
  e.z = z_value(confidence);
  e.p_hat = batch.sum / k;
  if (batch.cycles > 1) {
    const double var = std::max(0.0, (batch.sum_sq - batch.sum * e.p_hat) / (k - 1.0));
    e.std_err = std::sqrt(var / k);
  }
  e.ci_low = e.p_hat - e.z * e.std_err;
  e.ci_high = e.p_hat + e.z * e.std_err;
  return e;
}

/// Full procedure: D-search (unless the method is forced to direct), then
/// the main run of `cycles` cycles on stream phase 0.
inline Estimate estimate_top(const FaultTree& tree, const RunConfig& config) {
  config.validate();
  Selection sel;
  if (config.method == Method::Direct) {
    sel.direct = true;
    sel.model = ReferenceModel::build(tree, 1.0, config.mission_time);
  } else {
    sel = select_reference(tree, config);
  }
  const BatchResult batch =
      run_batch(tree, sel.model, config.cycles, config.seed, 0, config.threads);
  Estimate e = summarize(batch, config.confidence);
  e.trace = std::move(sel.trace);
  if (sel.direct) {
    e.method = Method::Direct;
  } else {
    e.method = Method::Importance;
    e.reference = std::move(sel.model);
  }
  return e;
}

}  // namespace dftmc
