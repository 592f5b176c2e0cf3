#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ksatlab/sk.hpp"

using namespace ksat;

namespace {

// pair sum written independently: each unordered pair once, weight 2
double pair_energy(const SkSystem& sys, const SpinConfig& s) {
  double e = 0.0;
  for (std::size_t i = 0; i < sys.n; ++i)
    for (std::size_t j = i + 1; j < sys.n; ++j) e += 2.0 * sys.g[i * sys.n + j] * s[i] * s[j];
  return -e / std::sqrt(static_cast<double>(sys.n));
}

SpinConfig random_spins(std::size_t n, std::mt19937_64& rng) {
  SpinConfig s(n);
  for (auto& x : s) x = (rng() & 1) ? 1 : -1;
  return s;
}

OverlapMatrix from_distances(const std::vector<double>& d, std::size_t s) {
  // q = q_EA - d/2 with q_EA = 1
  OverlapMatrix m;
  m.s = s;
  m.q.resize(s * s);
  for (std::size_t i = 0; i < s * s; ++i) m.q[i] = 1.0 - d[i] / 2.0;
  return m;
}

}  // namespace

TEST(SkEnergy, TwoSpinExample) {
  SkSystem sys;
  sys.n = 2;
  sys.g = {0.0, 1.0, 1.0, 0.0};
  EXPECT_NEAR(sk_energy(sys, {1, 1}), -2.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(sk_energy(sys, {1, -1}), 2.0 / std::sqrt(2.0), 1e-15);
}

TEST(SkEnergy, CouplingsSymmetricZeroDiagonal) {
  const auto sys = SkSystem::random(60, 3);
  for (std::size_t i = 0; i < sys.n; ++i) {
    EXPECT_EQ(sys.at(i, i), 0.0);
    for (std::size_t j = 0; j < i; ++j) ASSERT_EQ(sys.at(i, j), sys.at(j, i));
  }
}

TEST(SkEnergy, GlobalFlipAndIndependentSum) {
  std::mt19937_64 rng(7);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto sys = SkSystem::random(5 + seed * 3, seed);
    auto s = random_spins(sys.n, rng);
    const double e = sk_energy(sys, s);
    EXPECT_NEAR(e, pair_energy(sys, s), 1e-10);
    for (auto& x : s) x = static_cast<Spin>(-x);
    EXPECT_NEAR(sk_energy(sys, s), e, 1e-10);
  }
}

TEST(SkEnergy, FlipDeltaMatchesRecomputation) {
  const auto sys = SkSystem::random(30, 1);
  std::mt19937_64 rng(2);
  auto s = random_spins(sys.n, rng);
  for (std::size_t i = 0; i < sys.n; ++i) {
    double h = 0.0;
    for (std::size_t j = 0; j < sys.n; ++j) h += sys.at(i, j) * s[j];
    const double before = sk_energy(sys, s);
    const double d = sk_flip_delta(sys, s[i], h);
    s[i] = static_cast<Spin>(-s[i]);
    EXPECT_NEAR(sk_energy(sys, s) - before, d, 1e-10);
    s[i] = static_cast<Spin>(-s[i]);
  }
}

TEST(SkEnergy, LengthMismatchThrows) {
  const auto sys = SkSystem::random(4, 0);
  EXPECT_THROW(sk_energy(sys, {1, 1}), Error);
}

TEST(Anneal, HotShortRunHasZeroMagnetization) {
  const auto sys = SkSystem::random(400, 5);
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = anneal(sys, {.t_start = 1e6, .t_end = 1e5, .steps = 3}, seed);
    for (auto x : s) total += x;
  }
  EXPECT_LT(std::fabs(total / 4000.0), 0.05);
}

TEST(Anneal, ColdLongRunIsOneFlipStable) {
  const auto sys = SkSystem::random(200, 11);
  int stable = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    stable += one_flip_stable(sys, anneal(sys, {.t_start = 2.4, .t_end = 0.01, .steps = 300}, seed));
  EXPECT_GE(stable, 18);
}

TEST(Anneal, Deterministic) {
  const auto sys = SkSystem::random(100, 2);
  const AnnealSchedule sc{.t_start = 2.0, .t_end = 0.2, .steps = 50};
  EXPECT_EQ(anneal(sys, sc, 4), anneal(sys, sc, 4));
  EXPECT_NE(anneal(sys, sc, 4), anneal(sys, sc, 5));
}

TEST(Anneal, InvalidScheduleThrows) {
  const auto sys = SkSystem::random(10, 2);
  EXPECT_THROW(anneal(sys, {.t_start = 0.5, .t_end = 1.0, .steps = 10}, 0), Error);
  EXPECT_THROW(anneal(sys, {.t_start = 1.0, .t_end = 0.0, .steps = 10}, 0), Error);
}

TEST(PureStates, SingleRepeatGivesSpinVectors) {
  const auto sys = SkSystem::random(50, 1);
  PureStateConfig pc;
  pc.samples = 4;
  pc.repeats = 1;
  pc.schedule.steps = 50;
  for (const auto& v : sample_pure_states(sys, pc))
    for (double x : v) ASSERT_TRUE(x == 1.0 || x == -1.0);
}

TEST(PureStates, MeansInUnitInterval) {
  const auto sys = SkSystem::random(80, 1);
  PureStateConfig pc;
  pc.samples = 5;
  pc.repeats = 7;
  pc.schedule.steps = 50;
  const auto states = sample_pure_states(sys, pc);
  ASSERT_EQ(states.size(), 5u);
  for (const auto& v : states)
    for (double x : v) ASSERT_LE(std::fabs(x), 1.0);
}

TEST(PureStates, MoreRepeatsShrinkSelfOverlapSpread) {
  // same stored configuration, independent re-anneals: q_psi_psi varies less
  // from run to run when more repeats are averaged
  const auto sys = SkSystem::random(200, 4);
  auto spread = [&](std::size_t repeats) {
    double mean = 0.0, sq = 0.0;
    const int runs = 12;
    for (int r = 0; r < runs; ++r) {
      PureStateConfig pc;
      pc.samples = 1;
      pc.repeats = repeats;
      pc.schedule = {.t_start = 2.4, .t_end = 1.0, .steps = 60};
      pc.resample_steps = 5;
      pc.seed = 9;
      pc.resample_seed = static_cast<std::uint64_t>(r) + 1;
      const double q = overlap_matrix(sample_pure_states(sys, pc)).at(0, 0);
      mean += q;
      sq += q * q;
    }
    mean /= runs;
    return sq / runs - mean * mean;
  };
  EXPECT_LT(spread(40), spread(2));
}

TEST(PureStates, DiagonalDominatesOffDiagonal) {
  const auto sys = SkSystem::random(200, 6);
  PureStateConfig pc;
  pc.samples = 10;
  pc.repeats = 10;
  pc.schedule.steps = 200;
  const auto q = overlap_matrix(sample_pure_states(sys, pc));
  double diag = 0.0, off = 0.0;
  for (std::size_t a = 0; a < q.s; ++a)
    for (std::size_t b = 0; b < q.s; ++b) (a == b ? diag : off) += std::fabs(q.at(a, b));
  EXPECT_GE(diag / q.s, off / (q.s * (q.s - 1)));
}

TEST(Overlap, IdenticalAndOpposite) {
  std::mt19937_64 rng(1);
  const auto s = random_spins(100, rng);
  std::vector<double> a(s.begin(), s.end()), b(a);
  for (auto& x : b) x = -x;
  const auto q = overlap_matrix({a, a, b});
  EXPECT_DOUBLE_EQ(q.at(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(q.at(0, 2), -1.0);
  EXPECT_DOUBLE_EQ(q.q_ea(), 1.0);
}

TEST(Overlap, IndependentStatesConcentrate) {
  std::mt19937_64 rng(3);
  int small = 0;
  for (int t = 0; t < 100; ++t) {
    const auto x = random_spins(800, rng), y = random_spins(800, rng);
    const auto q = overlap_matrix({std::vector<double>(x.begin(), x.end()),
                                   std::vector<double>(y.begin(), y.end())});
    small += std::fabs(q.at(0, 1)) <= 0.1;
  }
  EXPECT_EQ(small, 100);
}

TEST(Overlap, LengthMismatchThrows) {
  EXPECT_THROW(overlap_matrix({{1.0, 1.0}, {1.0}}), Error);
}

TEST(Ultrametric, EquilateralScoresOne) {
  const std::vector<double> d{0, 1, 1, 1, 0, 1, 1, 1, 0};
  EXPECT_DOUBLE_EQ(ultrametricity_score(d, 3), 1.0);
}

TEST(Ultrametric, ScaleneTripleFails) {
  const std::vector<double> d{0, 1, 1, 1, 0, 1.5, 1, 1.5, 0};
  EXPECT_DOUBLE_EQ(ultrametricity_score(d, 3, 0.1), 0.0);
  // 1.5 vs 1.45 is within 10%
  const std::vector<double> e{0, 1.45, 1, 1.45, 0, 1.5, 1, 1.5, 0};
  EXPECT_DOUBLE_EQ(ultrametricity_score(e, 3, 0.1), 1.0);
}

TEST(Ultrametric, TreeMetricScoresOne) {
  // leaves of a random binary tree; distance = height of the lowest common ancestor
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t s = 16;
    std::vector<double> d(s * s, 0.0);
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < s; ++i) groups.push_back({i});
    double h = 0.0;
    while (groups.size() > 1) {
      h += 0.1 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      const std::size_t a = rng() % groups.size();
      std::size_t b = rng() % (groups.size() - 1);
      if (b >= a) ++b;
      for (auto i : groups[a])
        for (auto j : groups[b]) d[i * s + j] = d[j * s + i] = h;
      groups[a].insert(groups[a].end(), groups[b].begin(), groups[b].end());
      groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(b));
    }
    const auto r = cluster_and_score(from_distances(d, s));
    EXPECT_DOUBLE_EQ(r.ultrametricity_score, 1.0);
    ASSERT_EQ(r.dendrogram.size(), s - 1);
    for (std::size_t t = 1; t < r.dendrogram.size(); ++t)
      EXPECT_GE(r.dendrogram[t].height + 1e-12, r.dendrogram[t - 1].height);
  }
}

TEST(Cluster, MergeListShape) {
  const std::vector<double> d{0, 1, 4, 4, 1, 0, 4, 4, 4, 4, 0, 2, 4, 4, 2, 0};
  const auto m = average_linkage(d, 4);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m[0].a, 0u);
  EXPECT_EQ(m[0].b, 1u);
  EXPECT_DOUBLE_EQ(m[0].height, 1.0);
  EXPECT_EQ(m[1].a, 2u);
  EXPECT_EQ(m[1].b, 3u);
  EXPECT_EQ(m[2].a, 4u);
  EXPECT_EQ(m[2].b, 5u);
  EXPECT_DOUBLE_EQ(m[2].height, 4.0);
}

TEST(Cluster, AverageLinkageHeight) {
  // {0,1} at 1, then 2 joins at the mean of 3 and 5
  const std::vector<double> d{0, 1, 3, 1, 0, 5, 3, 5, 0};
  const auto m = average_linkage(d, 3);
  EXPECT_DOUBLE_EQ(m[1].height, 4.0);
}

TEST(Cluster, AsymmetricMatrixThrows) {
  OverlapMatrix m;
  m.s = 2;
  m.q = {1.0, 0.2, 0.3, 1.0};
  EXPECT_THROW(cluster_and_score(m), Error);
}

TEST(Cluster, CsvShapes) {
  const auto q = from_distances({0, 1, 1, 0}, 2);
  std::ostringstream a, b;
  write_overlap_csv(q, a);
  write_dendrogram_csv(cluster_and_score(q).dendrogram, b);
  EXPECT_EQ(a.str(), "a,b,q\n0,0,1\n0,1,0.5\n1,0,0.5\n1,1,1\n");
  EXPECT_EQ(b.str().rfind("step,cluster_a,cluster_b,height\n0,0,1,1", 0), 0u);
}
