#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "fedishc/datagen.hpp"
#include "fedishc/discovery.hpp"
#include "fedishc/federation.hpp"
#include "test_support.hpp"

namespace fedishc {
namespace {

using testing::oracle_cumulants;

CumulantTable two_variable_table() { return oracle_cumulants({"x1", "x2"}, chain_dag({0.5}).strengths, {2.0, 2.0}); }

CumulantTable chain_table() {
  return oracle_cumulants(variable_names(3), chain_dag({0.5, 2.0}).strengths, {2.0, 2.0, 2.0});
}

std::vector<std::size_t> all_indices(std::size_t d) {
  std::vector<std::size_t> v(d);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

std::vector<double> random_noise_c3(std::size_t d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.5, 3.0);
  std::bernoulli_distribution neg(0.5);
  std::vector<double> c(d);
  for (auto& v : c) v = neg(rng) ? -mag(rng) : mag(rng);
  return c;
}

// Sources of the subgraph induced by `active`.
std::vector<std::size_t> true_sources(const DagSpec& dag, const std::vector<std::size_t>& active) {
  std::vector<std::size_t> out;
  for (std::size_t i : active) {
    bool parentless = true;
    for (std::size_t j : active) parentless = parentless && dag.strengths(i, j) == 0.0;
    if (parentless) out.push_back(i);
  }
  return out;
}

TEST(Tau, TwoVariableClosedForm) {
  const auto t = two_variable_table();
  EXPECT_DOUBLE_EQ(t.c3(1), 2.25);
  EXPECT_NEAR(tau(t, 0, 1), 0.0, 1e-12);
  EXPECT_NEAR(tau(t, 1, 0), 2.0, 1e-12);
  EXPECT_NEAR(tau(t, 1, 0), 0.5 * 2.0 * 2.0, 1e-12);
  EXPECT_THROW(tau(t, 1, 1), InvalidArgument);
}

TEST(Tau, IndependentVariables) {
  const auto t = oracle_cumulants({"a", "b"}, RealGrid(2, 2), {2.0, -1.0});
  EXPECT_EQ(tau(t, 0, 1), 0.0);
  EXPECT_EQ(tau(t, 1, 0), 0.0);
}

TEST(SourceScores, Chain) {
  const auto t = chain_table();
  const auto s = source_scores(t, all_indices(3));
  EXPECT_NEAR(s[0], 0.0, 1e-12);
  EXPECT_GE(s[1], 2.0 - 1e-12);
  EXPECT_GT(s[2], 0.0);
  EXPECT_THROW(source_scores(t, std::vector<std::size_t>{0}), InvalidArgument);
}

TEST(SelectSource, ChainPicksRoot) {
  const auto g = replicate_table(chain_table(), 5);
  const auto active = all_indices(3);
  EXPECT_EQ(select_source(g, active, {}), 0u);
  const auto detail = select_source_detailed(g, active, {});
  EXPECT_NEAR(detail.mean_score, 0.0, 1e-12);
}

TEST(SelectSource, SiblingSourcesTieToLowerId) {
  const auto g = replicate_table(oracle_cumulants({"x1", "x2"}, RealGrid(2, 2), {2.0, 2.0}), 3);
  EXPECT_EQ(select_source(g, all_indices(2), {}), 0u);
  const std::vector<std::size_t> only_second{1};
  EXPECT_EQ(select_source(g, only_second, {}), 1u);
}

TEST(SelectSource, ZRatioNeedsEnoughReplicates) {
  DiscoveryConfig cfg;
  cfg.selection_rule = SelectionRule::z_ratio;
  EXPECT_THROW(select_source(replicate_table(chain_table(), 9), all_indices(3), cfg), InvalidArgument);
  // single active variable needs no statistics
  const std::vector<std::size_t> one{2};
  EXPECT_EQ(select_source(replicate_table(chain_table(), 1), one, cfg), 2u);
}

TEST(SelectSource, SymmetricNoiseFiresGuard) {
  const auto dag = random_dag(4, 0.5, {}, 12);
  const auto s = sample_lingam(dag, NoiseSpec::uniform_spec(4, NoiseFamily::uniform), 20'000, 13);
  const auto up = make_upload({"c", s}, 10, 14);
  const auto g = aggregate({up}, build_registry({s.variable_ids()}));
  try {
    select_source(g, all_indices(4), {});
    FAIL() << "expected NearSymmetricNoise";
  } catch (const NearSymmetricNoise& e) {
    EXPECT_LT(std::abs(e.c3()), e.threshold());
  }
}

TEST(SelectSource, AbsoluteGuardWithoutReplicateSpread) {
  auto t = oracle_cumulants({"x1", "x2"}, RealGrid(2, 2), {5e-4, 5e-4});
  EXPECT_THROW(select_source(replicate_table(t, 1), all_indices(2), {}), NearSymmetricNoise);
  DiscoveryConfig loose;
  loose.c3_guard = 1e-4;
  EXPECT_EQ(select_source(replicate_table(t, 1), all_indices(2), loose), 0u);
}

TEST(EliminateSource, TwoVariable) {
  const auto e = eliminate_source(two_variable_table(), 0, all_indices(2));
  EXPECT_DOUBLE_EQ(e.alpha[1], 0.5);
  EXPECT_DOUBLE_EQ(e.table.c3(1), 2.0);
}

TEST(EliminateSource, ChainResidualSystem) {
  const auto t = chain_table();
  EXPECT_DOUBLE_EQ(t.c12(1, 2), 9.0);
  EXPECT_DOUBLE_EQ(t.c21(1, 2), 4.5);
  const auto e = eliminate_source(t, 0, all_indices(3));
  EXPECT_DOUBLE_EQ(e.alpha[1], 0.5);
  EXPECT_DOUBLE_EQ(e.alpha[2], 1.0);
  EXPECT_DOUBLE_EQ(e.table.c12(1, 2), 8.0);
  EXPECT_DOUBLE_EQ(e.table.c21(1, 2), 4.0);
  // r2 = e2, r3 = 2 e2 + e3
  const auto residual = oracle_cumulants({"r2", "r3"}, chain_dag({2.0}).strengths, {2.0, 2.0});
  EXPECT_NEAR(e.table.c3(1), residual.c3(0), 1e-12);
  EXPECT_NEAR(e.table.c3(2), residual.c3(1), 1e-12);
  EXPECT_NEAR(e.table.c21(2, 1), residual.c21(1, 0), 1e-12);
}

TEST(EliminateSource, ZeroSourceCumulant) {
  const auto t = oracle_cumulants({"x1", "x2"}, RealGrid(2, 2), {0.0, 1.0});
  EXPECT_THROW(eliminate_source(t, 0, all_indices(2)), NearSymmetricNoise);
}

TEST(ReconstructStrengths, Examples) {
  RealGrid l = RealGrid::identity(3);
  l(1, 0) = 0.5;
  l(2, 0) = 1.0;
  l(2, 1) = 2.0;
  const auto order = all_indices(3);
  const auto b = reconstruct_strengths(l, order);
  EXPECT_NEAR(b(1, 0), 0.5, 1e-15);
  EXPECT_NEAR(b(2, 1), 2.0, 1e-15);
  EXPECT_NEAR(b(2, 0), 0.0, 1e-15);
  EXPECT_EQ(reconstruct_strengths(RealGrid::identity(4), all_indices(4)), RealGrid(4, 4));
  RealGrid l2 = RealGrid::identity(2);
  l2(1, 0) = 0.5;
  EXPECT_EQ(reconstruct_strengths(l2, all_indices(2))(1, 0), 0.5);
}

TEST(ReconstructStrengths, PermutesBackToGlobalIndices) {
  RealGrid l = RealGrid::identity(2);
  l(1, 0) = 0.5;
  const std::vector<std::size_t> order{1, 0};  // x2 first
  const auto b = reconstruct_strengths(l, order);
  EXPECT_EQ(b(0, 1), 0.5);
  EXPECT_EQ(b(1, 0), 0.0);
}

TEST(Discover, ChainPopulation) {
  const auto model = discover(replicate_table(chain_table(), 1));
  EXPECT_EQ(model.order, all_indices(3));
  EXPECT_EQ(model.order_ids(), variable_names(3));
  EXPECT_NEAR(model.strengths(1, 0), 0.5, 1e-9);
  EXPECT_NEAR(model.strengths(2, 1), 2.0, 1e-9);
  EXPECT_NEAR(model.strengths(2, 0), 0.0, 1e-9);
  EXPECT_EQ(model.edge_count(), 2u);
  EXPECT_TRUE(model.adjacency(1, 0));
  EXPECT_TRUE(model.adjacency(2, 1));
  EXPECT_EQ(model.steps.size(), 3u);
}

TEST(Discover, SingleVariable) {
  CumulantTable t({"x1"});
  t.set_c3(0, 2.0);
  const auto model = discover(replicate_table(t, 1));
  EXPECT_EQ(model.order, std::vector<std::size_t>{0});
  EXPECT_EQ(model.edge_count(), 0u);
}

TEST(Discover, RandomDagsPopulation) {
  std::mt19937_64 rng(77);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto dag = random_dag(6, 0.4, {}, 1000 + seed);
    const auto t = oracle_cumulants(dag.variable_ids, dag.strengths, random_noise_c3(6, rng));
    const auto model = discover(replicate_table(t, 1));
    std::vector<std::size_t> pos(6);
    for (std::size_t p = 0; p < 6; ++p) pos[model.order[p]] = p;
    double err = 0.0;
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) {
        if (dag.strengths(i, j) != 0.0) {
          EXPECT_LT(pos[j], pos[i]) << "seed " << seed;
        }
        err = std::max(err, std::abs(model.strengths(i, j) - dag.strengths(i, j)));
      }
    EXPECT_LT(err, 1e-9) << "seed " << seed;
  }
}

TEST(Discover, NearSymmetricNoiseCarriesPartialOrder) {
  // x1 -> x2 -> x3 with a symmetric e2: once x1 is removed, x2 is a source
  // whose residual third cumulant vanishes
  const auto t = oracle_cumulants(variable_names(3), chain_dag({1.0, 1.0}).strengths, {2.0, 0.0, 2.0});
  try {
    discover(replicate_table(t, 1));
    FAIL();
  } catch (const NearSymmetricNoise& e) {
    EXPECT_EQ(e.partial_order(), std::vector<std::string>{"x1"});
    EXPECT_EQ(e.variable(), "x2");
  }
}

TEST(Discover, LastVariableNeedsNoSkew) {
  const auto t = oracle_cumulants({"x1", "x2"}, chain_dag({1.0}).strengths, {2.0, 0.0});
  const auto model = discover(replicate_table(t, 1));
  EXPECT_EQ(model.order, all_indices(2));
  EXPECT_NEAR(model.strengths(1, 0), 1.0, 1e-12);
}

TEST(Discover, UncoveredCellRejected) {
  auto g = replicate_table(chain_table(), 1);
  g.coverage(0, 2).clear();
  g.coverage(2, 0).clear();
  try {
    discover(g);
    FAIL();
  } catch (const AssumptionViolated& e) {
    EXPECT_EQ(e.first(), "x1");
    EXPECT_EQ(e.second(), "x3");
  }
}

// Sources of the active set score exactly zero and everything else scores
// strictly positive, at every depth of the recursion.
TEST(Properties, SourceScoreCharacterization) {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto dag = random_dag(6, 0.4, {}, 2000 + seed);
    auto table = oracle_cumulants(dag.variable_ids, dag.strengths, random_noise_c3(6, rng));
    std::vector<std::size_t> active = all_indices(6);
    while (active.size() > 1) {
      const auto sources = true_sources(dag, active);
      const auto scores = source_scores(table, active);
      for (std::size_t a = 0; a < active.size(); ++a) {
        const bool is_source = std::find(sources.begin(), sources.end(), active[a]) != sources.end();
        if (is_source)
          EXPECT_LE(scores[a], 1e-10) << "seed " << seed;
        else
          EXPECT_GT(scores[a], 1e-6) << "seed " << seed;
      }
      const std::size_t s = sources.front();
      table = eliminate_source(table, s, active).table;
      active.erase(std::find(active.begin(), active.end(), s));
    }
  }
}

// Eliminating a source from the population table gives the population table
// of the system with that source deleted.
TEST(Properties, EliminationMatchesDeletedSystem) {
  std::mt19937_64 rng(6);
  auto check = [](const DagSpec& dag, const std::vector<double>& c3, std::size_t s) {
    const auto full = oracle_cumulants(dag.variable_ids, dag.strengths, c3);
    const auto active = all_indices(dag.d());
    const auto e = eliminate_source(full, s, active);
    std::vector<std::size_t> keep;
    for (std::size_t i : active)
      if (i != s) keep.push_back(i);
    std::vector<std::string> ids;
    std::vector<double> sub_c3;
    RealGrid sub_b(keep.size(), keep.size());
    for (std::size_t p = 0; p < keep.size(); ++p) {
      ids.push_back(dag.variable_ids[keep[p]]);
      sub_c3.push_back(c3[keep[p]]);
      for (std::size_t q = 0; q < keep.size(); ++q) sub_b(p, q) = dag.strengths(keep[p], keep[q]);
    }
    const auto sub = oracle_cumulants(ids, sub_b, sub_c3);
    double err = 0.0;
    for (std::size_t p = 0; p < keep.size(); ++p) {
      err = std::max(err, std::abs(e.table.c3(keep[p]) - sub.c3(p)));
      for (std::size_t q = 0; q < keep.size(); ++q)
        if (p != q) err = std::max(err, std::abs(e.table.c21(keep[p], keep[q]) - sub.c21(p, q)));
    }
    return err;
  };

  // x1 -> x2, x1 -> x3: a common cause; removing x1 leaves x2, x3 independent
  RealGrid common(3, 3);
  common(1, 0) = 0.8;
  common(2, 0) = -1.2;
  EXPECT_LT(check({variable_names(3), common, {0, 1, 2}}, {2.0, 1.0, -1.5}, 0), 1e-10);
  // x1 -> x3 <- x2: two independent sources
  RealGrid collider(3, 3);
  collider(2, 0) = 0.7;
  collider(2, 1) = 1.1;
  EXPECT_LT(check({variable_names(3), collider, {0, 1, 2}}, {2.0, 1.0, -1.5}, 0), 1e-10);
  EXPECT_LT(check({variable_names(3), collider, {1, 0, 2}}, {2.0, 1.0, -1.5}, 1), 1e-10);

  int pairs = 0;
  for (std::uint64_t seed = 0; pairs < 100; ++seed) {
    const std::size_t d = 3 + seed % 4;
    const auto dag = random_dag(d, 0.5, {}, 3000 + seed);
    const auto c3 = random_noise_c3(d, rng);
    for (std::size_t s : true_sources(dag, all_indices(d))) {
      EXPECT_LT(check(dag, c3, s), 1e-10) << "seed " << seed << " source " << s;
      ++pairs;
    }
  }
}

TEST(Properties, MirrorPreservedThroughElimination) {
  const auto dag = random_dag(5, 0.6, {}, 8);
  const auto s = sample_lingam(dag, NoiseSpec::uniform_spec(5, NoiseFamily::exponential), 2000, 9);
  auto table = estimate_cumulant_table(s);
  std::vector<std::size_t> active = all_indices(5);
  for (std::size_t src : dag.order) {
    if (active.size() == 1) break;
    table = eliminate_source(table, src, active).table;
    active.erase(std::find(active.begin(), active.end(), src));
    for (std::size_t j : active)
      for (std::size_t k : active)
        if (j != k) {
          EXPECT_EQ(table.c21(j, k), table.c12(k, j));
        }
  }
}

CumulantTable rescale(const CumulantTable& t, std::size_t u, double a) {
  CumulantTable out = t;
  for (std::size_t i = 0; i < t.d(); ++i) {
    const int pi = i == u;
    out.set_c3(i, t.c3(i) * (pi ? a * a * a : 1.0));
    for (std::size_t j = 0; j < t.d(); ++j) {
      if (i == j) continue;
      const double f = (pi ? a * a : 1.0) * (j == u ? a : 1.0);
      out.set_c21(i, j, t.c21(i, j) * f);
    }
  }
  return out;
}

TEST(Properties, ZRatioSelectionUnderRescaling) {
  const auto dag = chain_dag({0.9, -0.8, 1.1});
  const auto s = sample_lingam(dag, NoiseSpec::uniform_spec(4, NoiseFamily::exponential), 20'000, 21);
  const auto g = aggregate({make_upload({"c", s}, 20, 22)}, build_registry({s.variable_ids()}));
  DiscoveryConfig cfg;
  cfg.selection_rule = SelectionRule::z_ratio;
  const auto active = all_indices(4);
  const std::size_t base = select_source(g, active, cfg);
  EXPECT_EQ(base, 0u);
  for (std::size_t u = 0; u < 4; ++u)
    for (double a : {0.1, 0.5, 3.0, 20.0}) {
      auto scaled = g;
      scaled.base = rescale(g.base, u, a);
      for (auto& r : scaled.replicates) r = rescale(r, u, a);
      EXPECT_EQ(select_source(scaled, active, cfg), base) << "u=" << u << " a=" << a;
    }
}

TEST(Config, Validation) {
  DiscoveryConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.c3_guard = -1;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  EXPECT_EQ(parse_selection_rule("z-ratio"), SelectionRule::z_ratio);
  EXPECT_EQ(to_string(SelectionRule::argmin_mean), "argmin-mean");
  EXPECT_THROW(parse_selection_rule("median"), InvalidArgument);
}

}  // namespace
}  // namespace fedishc
