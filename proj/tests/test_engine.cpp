#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dftmc/engine.hpp"
#include "dftmc/oracle.hpp"
#include "dftmc/parser.hpp"
#include "support/random_trees.hpp"

namespace dftmc {
namespace {

FaultTree overlap_tree(double scale = 1000.0) {
  std::vector<EventDecl> events;
  for (int i = 1; i <= 4; ++i) {
    events.push_back({"BE" + std::to_string(i), Distribution::exponential(scale * i)});
  }
  return FaultTree::validate(events,
                             {{"A", GateType::and_gate(), {"BE1", "BE2", "BE3"}},
                              {"B", GateType::and_gate(), {"BE2", "BE3", "BE4"}},
                              {"TOP", GateType::pand(), {"A", "B"}}},
                             "TOP");
}

FaultTree single_event(Distribution law) { return FaultTree::validate({{"E", law}}, {}, "E"); }

RunConfig defaults(std::uint64_t seed = 0) {
  RunConfig c;
  c.mission_time = 1.0;
  c.seed = seed;
  return c;
}

// Kolmogorov distance between the empirical CDF of `xs` and `law`.
double ks_distance(std::vector<double> xs, const Distribution& law) {
  std::sort(xs.begin(), xs.end());
  const auto n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = law.cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

std::vector<double> draws(const ReferenceModel& m, std::size_t event, std::size_t n,
                          std::uint64_t seed) {
  std::vector<double> out(n);
  std::vector<Time> sample(m.size());
  for (std::size_t j = 0; j < n; ++j) {
    CycleStream stream(seed, 0, j);
    draw_sample(m, stream, sample);
    out[j] = sample[event];
  }
  return out;
}

TEST(DrawSample, BaseLawAtUnitD) {
  const FaultTree t = overlap_tree();
  const ReferenceModel m = ReferenceModel::build(t, 1.0, 1.0);
  EXPECT_LT(ks_distance(draws(m, 0, 100000, 5), Distribution::exponential(1000.0)), 0.01);
}

TEST(DrawSample, ScaledLawAtD2) {
  const FaultTree t = overlap_tree();
  const ReferenceModel m = ReferenceModel::build(t, 2.0, 1.0);
  EXPECT_NEAR(m.refs[0].v, 1.4406166703628092, 1e-12);
  EXPECT_LT(ks_distance(draws(m, 0, 100000, 6), Distribution::exponential(1.4406166703628092)),
            0.01);
}

TEST(DrawSample, Deterministic) {
  const ReferenceModel m = ReferenceModel::build(overlap_tree(), 2.0, 1.0);
  EXPECT_EQ(draws(m, 2, 1000, 9), draws(m, 2, 1000, 9));
  EXPECT_NE(draws(m, 2, 1000, 9), draws(m, 2, 1000, 10));
}

TEST(CycleWeight, UnitDIsExactlyOne) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10000; ++trial) {
    const FaultTree t = testing::random_document(rng).to_tree();
    const ReferenceModel m = ReferenceModel::build(t, 1.0, 1.0);
    ASSERT_EQ(cycle_weight(m, testing::random_sample(rng, t.num_events())), 1.0);
  }
}

TEST(CycleWeight, TailFactorIsD) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 10000; ++trial) {
    Distribution law = Distribution::exponential(1.0);
    const double scale = std::exp(std::log(0.5) + unit(rng) * std::log(1e4));
    switch (trial % 4) {
      case 0: law = Distribution::exponential(scale); break;
      case 1: law = Distribution::weibull(scale, 0.5 + 3.0 * unit(rng)); break;
      case 2: law = Distribution::lognormal(std::log(scale), 0.2 + 1.5 * unit(rng)); break;
      case 3: law = Distribution::normal(scale, scale * (0.1 + unit(rng))); break;
    }
    const double horizon = 0.1 + unit(rng);
    const double d = std::exp(unit(rng) * std::log(1e6));
    const ReferenceModel m = ReferenceModel::build(single_event(law), d, horizon);
    const double t = unit(rng) < 0.2 ? kNever : horizon * (1.0 + 3.0 * unit(rng));
    ASSERT_NEAR(cycle_weight(m, std::vector<Time>{t}) / d, 1.0, 1e-9)
        << "trial " << trial << " d " << d;
  }
}

TEST(CycleWeight, AllTailSampleIsDToTheN) {
  const ReferenceModel m = ReferenceModel::build(overlap_tree(), 3.0, 1.0);
  EXPECT_NEAR(cycle_weight(m, std::vector<Time>{1.0, 2.0, kNever, 5.0}) / 81.0, 1.0, 1e-9);
}

TEST(CycleWeight, OverlapEventOneFactor) {
  const ReferenceModel m = ReferenceModel::build(overlap_tree(), 2.0, 1.0);
  const double w = cycle_weight(m, std::vector<Time>{0.5, kNever, kNever, kNever});
  EXPECT_NEAR(w / 8.0, 2.0373396334078552e-3, 2.0373396334078552e-3 * 1e-9);
}

TEST(ReferenceModel, NormalWithNonPositiveMeanCannotBeScaled) {
  const FaultTree t = FaultTree::validate(
      {{"OK", Distribution::exponential(10.0)}, {"Bad", Distribution::normal(-1.0, 2.0)}},
      {{"G", GateType::or_gate(), {"OK", "Bad"}}}, "G");
  EXPECT_NO_THROW(ReferenceModel::build(t, 1.0, 1.0));
  try {
    ReferenceModel::build(t, 2.0, 1.0);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_NE(std::string(e.what()).find("'Bad'"), std::string::npos) << e.what();
  }
}

TEST(RunBatch, ZeroCycles) {
  const BatchResult b = run_batch(overlap_tree(), ReferenceModel::build(overlap_tree(), 2.0, 1.0),
                                  0, 1, 0);
  EXPECT_EQ(b.cycles, 0u);
  EXPECT_EQ(b.hits, 0u);
  EXPECT_EQ(b.sum, 0.0);
  EXPECT_EQ(b.sum_sq, 0.0);
}

TEST(RunBatch, BinomialHitRate) {
  const FaultTree t = single_event(Distribution::exponential(testing::mttf_for(0.1)));
  const BatchResult b = run_batch(t, ReferenceModel::build(t, 1.0, 1.0), 100000, 3, 0);
  EXPECT_NEAR(static_cast<double>(b.hits) / 1e5, 0.1, 0.01);
  EXPECT_EQ(b.sum, static_cast<double>(b.hits));
  EXPECT_EQ(b.sum_sq, static_cast<double>(b.hits));
}

TEST(RunBatch, OverlapAtD2LandsInBand) {
  const FaultTree t = overlap_tree();
  const ReferenceModel m = ReferenceModel::build(t, 2.0, 1.0);
  int in_band = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const BatchResult b = run_batch(t, m, 1000, seed, 2);
    in_band += b.hits >= 10 && b.hits <= 100;
  }
  EXPECT_GE(in_band, 18);
}

TEST(RunBatch, IdenticalForAnyThreadCount) {
  const FaultTree t = overlap_tree();
  const ReferenceModel m = ReferenceModel::build(t, 2.5, 1.0);
  const BatchResult one = run_batch(t, m, 50000, 17, 0, 1);
  for (unsigned threads : {2u, 3u, 8u, 64u}) {
    const BatchResult many = run_batch(t, m, 50000, 17, 0, threads);
    EXPECT_EQ(one.hits, many.hits);
    EXPECT_EQ(one.sum, many.sum);
    EXPECT_EQ(one.sum_sq, many.sum_sq);
  }
}

TEST(SelectReference, OverlapAcceptsDoubling) {
  const Selection s = select_reference(overlap_tree(), defaults());
  ASSERT_EQ(s.trace.size(), 2u);
  EXPECT_FALSE(s.direct);
  EXPECT_EQ(s.trace[0].d, 1.0);
  EXPECT_EQ(s.trace[0].ampos, 0u);
  EXPECT_EQ(s.trace[1].d, 2.0);
  EXPECT_GE(s.trace[1].ampos, 10u);
  EXPECT_LE(s.trace[1].ampos, 100u);
  EXPECT_EQ(s.model.big_d, 2.0);
}

TEST(SelectReference, CommonTreeGetsDirectDirective) {
  const FaultTree t = single_event(Distribution::exponential(testing::mttf_for(0.05)));
  const Selection s = select_reference(t, defaults());
  EXPECT_TRUE(s.direct);
  ASSERT_EQ(s.trace.size(), 1u);
  EXPECT_GT(s.trace[0].ampos, 0u);
}

TEST(SelectReference, ImportanceModeAcceptsUnitDWhenAlreadyAboveBand) {
  RunConfig c = defaults();
  c.method = Method::Importance;
  const FaultTree t = single_event(Distribution::exponential(testing::mttf_for(0.5)));
  const Selection s = select_reference(t, c);
  EXPECT_FALSE(s.direct);
  EXPECT_EQ(s.model.big_d, 1.0);
  ASSERT_EQ(s.trace.size(), 1u);
}

TEST(SelectReference, UnreachableBandFails) {
  RunConfig c = defaults();
  c.ampos_low = 900;
  c.ampos_high = 1000;
  try {
    select_reference(overlap_tree(), c);
    FAIL() << "expected SearchError";
  } catch (const SearchError& e) {
    EXPECT_EQ(e.trace().size(), 30u);
    EXPECT_NE(std::string(e.what()).find("within 30 iterations"), std::string::npos);
  }
}

TEST(SelectReference, TraceInvariants) {
  std::mt19937_64 rng(43);
  testing::TreeShape shape;
  shape.p_min = 1e-4;
  shape.p_max = 0.05;
  shape.min_events = 3;
  for (int trial = 0; trial < 40; ++trial) {
    const FaultTree t = testing::random_document(rng, shape).to_tree();
    RunConfig c = defaults(static_cast<std::uint64_t>(trial));
    c.method = Method::Importance;
    c.ampos_low = 40;
    c.ampos_high = 60;
    SearchTrace trace;
    try {
      trace = select_reference(t, c).trace;
    } catch (const SearchError& e) {
      trace = e.trace();
    }
    ASSERT_FALSE(trace.empty());
    for (std::size_t i = 0; i < trace.size(); ++i) {
      EXPECT_EQ(trace[i].ic, i + 1);
      EXPECT_GE(trace[i].d, 1.0);
      EXPECT_GE(trace[i].d, trace[i].d_low);
      EXPECT_LE(trace[i].d, trace[i].d_high);
      if (i > 0) {
        EXPECT_GE(trace[i].d_low, trace[i - 1].d_low);
        EXPECT_LE(trace[i].d_high, trace[i - 1].d_high);
      }
    }
  }
}

TEST(NextBracketedD, FallsBackToGeometricMean) {
  SearchTrace trace{{1, 1.0, 1.0, kNever, 0}, {2, 2.0, 1.0, kNever, 0}, {3, 4.0, 2.0, kNever, 500}};
  EXPECT_DOUBLE_EQ(detail::next_bracketed_d(trace, 2.0, 4.0, std::log(31.6)), std::sqrt(8.0));
  trace.push_back({4, 3.0, 2.0, 4.0, 500});
  EXPECT_DOUBLE_EQ(detail::next_bracketed_d(trace, 2.0, 3.0, std::log(31.6)), std::sqrt(6.0));
}

TEST(NextBracketedD, SecantOnLogScale) {
  const SearchTrace trace{{1, 1.0, 1.0, kNever, 5}, {2, 4.0, 1.0, kNever, 500}};
  const double target = std::log(50.0);
  EXPECT_NEAR(detail::next_bracketed_d(trace, 1.0, 4.0, target), 2.0, 1e-12);
}

TEST(EstimateTop, OverlapDefaults) {
  const Estimate e = estimate_top(overlap_tree(), defaults());
  EXPECT_EQ(e.method, Method::Importance);
  EXPECT_GE(e.p_hat, 2.6e-14);
  EXPECT_LE(e.p_hat, 3.8e-14);
  EXPECT_GT(e.std_err, 4.9e-16 / 3.0);
  EXPECT_LT(e.std_err, 4.9e-16 * 3.0);
  EXPECT_EQ(e.cycles, 100000u);
  ASSERT_TRUE(e.reference);
  EXPECT_EQ(e.reference->big_d, 2.0);
}

TEST(EstimateTop, DirectOnRareTreeSeesNothing) {
  RunConfig c = defaults(1);
  c.method = Method::Direct;
  c.cycles = 1000000;
  const Estimate e = estimate_top(overlap_tree(), c);
  EXPECT_EQ(e.method, Method::Direct);
  EXPECT_EQ(e.hits, 0u);
  EXPECT_EQ(e.p_hat, 0.0);
  EXPECT_TRUE(e.trace.empty());
}

TEST(EstimateTop, DirectSingleEventMatchesCdf) {
  RunConfig c = defaults(2);
  c.method = Method::Direct;
  const Estimate e = estimate_top(single_event(Distribution::exponential(10.0)), c);
  EXPECT_NEAR(e.p_hat, -std::expm1(-0.1), 4.0 * e.std_err);
}

TEST(EstimateTop, AutoFallsBackToDirect) {
  const Estimate e =
      estimate_top(single_event(Distribution::exponential(testing::mttf_for(0.05))), defaults(4));
  EXPECT_EQ(e.method, Method::Direct);
  EXPECT_FALSE(e.reference);
  EXPECT_EQ(e.trace.size(), 1u);
  EXPECT_NEAR(e.p_hat, 0.05, 4.0 * e.std_err);
}

TEST(EstimateTop, ImportanceAtUnitDEqualsDirect) {
  const FaultTree t = single_event(Distribution::exponential(testing::mttf_for(0.05)));
  RunConfig c = defaults(5);
  c.method = Method::Importance;
  const Estimate is = estimate_top(t, c);
  ASSERT_EQ(is.method, Method::Importance);
  ASSERT_EQ(is.reference->big_d, 1.0);
  c.method = Method::Direct;
  const Estimate direct = estimate_top(t, c);
  EXPECT_EQ(is.p_hat, direct.p_hat);
  EXPECT_EQ(is.std_err, direct.std_err);
  EXPECT_EQ(is.hits, direct.hits);
  EXPECT_EQ(is.p_hat, static_cast<double>(is.hits) / static_cast<double>(is.cycles));
}

TEST(EstimateTop, ImportanceAgreesWithDirectOnCommonTrees) {
  std::mt19937_64 rng(44);
  testing::TreeShape shape;
  shape.p_min = 0.05;
  shape.p_max = 0.4;
  int checked = 0;
  int agree = 0;
  for (std::uint64_t seed = 0; checked < 20; ++seed) {
    const FaultTree t = testing::random_document(rng, shape).to_tree();
    const BatchResult direct = run_batch(t, ReferenceModel::build(t, 1.0, 1.0), 100000, seed, 0);
    if (direct.hits < 1000) continue;
    const BatchResult is = run_batch(t, ReferenceModel::build(t, 2.0, 1.0), 100000, seed, 1);
    const Estimate a = summarize(direct, 0.999);
    const Estimate b = summarize(is, 0.999);
    ++checked;
    agree += std::abs(a.p_hat - b.p_hat) <= 4.0 * std::hypot(a.std_err, b.std_err);
  }
  EXPECT_GE(agree, 19);
}

TEST(EstimateTop, MatchesExactStaticProbability) {
  std::mt19937_64 rng(45);
  testing::TreeShape shape;
  shape.dynamic = false;
  shape.max_events = 10;
  shape.p_min = 0.01;
  shape.p_max = 0.3;
  int agree = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FaultTree t = testing::random_document(rng, shape).to_tree();
    const double exact = oracle::exact_static(t, 1.0).probability;
    const Estimate e = estimate_top(t, defaults(seed));
    agree += std::abs(e.p_hat - exact) <= 4.0 * e.std_err;
  }
  EXPECT_GE(agree, 19);
}

TEST(EstimateTop, DeterministicAcrossThreads) {
  RunConfig c = defaults(7);
  const Estimate a = estimate_top(overlap_tree(), c);
  c.threads = 8;
  const Estimate b = estimate_top(overlap_tree(), c);
  EXPECT_EQ(a.p_hat, b.p_hat);
  EXPECT_EQ(a.std_err, b.std_err);
  EXPECT_EQ(a.hits, b.hits);
  EXPECT_EQ(a.trace, b.trace);
}

TEST(EstimateTop, RejectsBadConfig) {
  RunConfig c = defaults();
  c.cycles = 0;
  EXPECT_THROW(estimate_top(overlap_tree(), c), ValidationError);
  c = defaults();
  c.mission_time = 0.0;
  EXPECT_THROW(estimate_top(overlap_tree(), c), ValidationError);
  c = defaults();
  c.ampos_high = 5000;
  EXPECT_THROW(estimate_top(overlap_tree(), c), ValidationError);
  c = defaults();
  c.cycles = 500;
  EXPECT_THROW(estimate_top(overlap_tree(), c), ValidationError);
  c = defaults();
  c.confidence = 1.0;
  EXPECT_THROW(estimate_top(overlap_tree(), c), ValidationError);
}

TEST(Summarize, ConfidenceInterval) {
  EXPECT_NEAR(z_value(0.999), 3.2905267314919255, 1e-12);
  EXPECT_NEAR(z_value(0.95), 1.959963984540054, 1e-12);

  const Estimate e = estimate_top(overlap_tree(), defaults(3));
  EXPECT_LE(e.ci_low, e.p_hat);
  EXPECT_GE(e.ci_high, e.p_hat);
  EXPECT_NEAR(e.ci_high - e.ci_low, 2.0 * e.z * e.std_err, 1e-15 * e.p_hat);

  const double lo = 3.2e-14 - z_value(0.999) * 4.9e-16;
  const double hi = 3.2e-14 + z_value(0.999) * 4.9e-16;
  EXPECT_NEAR(lo, 3.0e-14, 0.05e-14);
  EXPECT_NEAR(hi, 3.4e-14, 0.05e-14);
}

TEST(Summarize, SampleStandardError) {
  BatchResult b;
  b.cycles = 4;
  b.hits = 2;
  b.sum = 3.0;
  b.sum_sq = 5.0;
  // terms {1, 2, 0, 0}: mean 0.75, sample variance 11/12
  const Estimate e = summarize(b, 0.999);
  EXPECT_DOUBLE_EQ(e.p_hat, 0.75);
  EXPECT_DOUBLE_EQ(e.std_err, std::sqrt(11.0 / 12.0 / 4.0));
}

}  // namespace
}  // namespace dftmc
