#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ksatlab/sp.hpp"
#include "oracles.hpp"

using namespace ksat;

namespace {

CnfInstance disjoint_clauses(std::size_t m, std::size_t k, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  CnfInstance inst;
  inst.n_vars = m * k;
  inst.k = k;
  for (std::size_t a = 0; a < m; ++a) {
    Clause c;
    for (std::size_t r = 0; r < k; ++r)
      c.literals.push_back({static_cast<std::uint32_t>(a * k + r), static_cast<Spin>(coin(rng) ? 1 : -1)});
    inst.clauses.push_back(c);
  }
  return inst;
}

}  // namespace

TEST(SpVar, MatchesEnumeration) {
  Rng rng = make_rng(3);
  for (double m : {0.0, 0.5, 1.0})
    for (int rep = 0; rep < 300; ++rep) {
      const std::size_t d = 1 + uniform_index(rng, 6);
      const auto in = oracle::random_u_surveys(rng, d);
      const auto ref = oracle::sp_var_enumerate(in, m);
      const auto got = sp_update_var(in, m);
      ASSERT_EQ(ref.has_value(), got.has_value());
      if (!ref) continue;
      for (int h = -static_cast<int>(d); h <= static_cast<int>(d); ++h)
        ASSERT_NEAR(got->at(h), ref->at(h), 1e-12);
    }
}

TEST(SpVar, AllContradictoryIsNullopt) {
  std::vector<USurvey> in{{1.0, 0.0, 0.0}, {0.0, 0.0, 1.0}};
  EXPECT_FALSE(sp_update_var(in, 0.0));
  EXPECT_FALSE(sp_update_var(in, 1.0));
}

TEST(SpVar, NoInputsGivesZeroField) {
  const auto p = sp_update_var(std::span<const USurvey>{}, 0.7);
  ASSERT_TRUE(p);
  EXPECT_DOUBLE_EQ(p->at(0), 1.0);
}

TEST(SpClause, MatchesEnumeration) {
  Rng rng = make_rng(4);
  for (double m : {0.0, 0.5, 1.0})
    for (int rep = 0; rep < 300; ++rep) {
      const std::size_t k = 2 + uniform_index(rng, 4);
      std::vector<HSurvey> in;
      std::vector<Spin> j;
      for (std::size_t r = 0; r + 1 < k; ++r) {
        in.push_back(oracle::random_h_survey(rng, 1 + static_cast<int>(uniform_index(rng, 3))));
        j.push_back(coin(rng) ? 1 : -1);
      }
      const Spin jt = coin(rng) ? 1 : -1;
      const auto ref = oracle::sp_clause_enumerate(jt, in, j, m);
      const auto got = sp_update_clause(jt, in, j, m);
      ASSERT_NEAR(got.minus, ref.minus, 1e-12);
      ASSERT_NEAR(got.zero, ref.zero, 1e-12);
      ASSERT_NEAR(got.plus, ref.plus, 1e-12);
    }
}

TEST(SpClause, WarnsTowardsSatisfyingValue) {
  const auto q = USurvey::warning(1, 0.3);
  EXPECT_DOUBLE_EQ(q.minus, 0.3);
  EXPECT_DOUBLE_EQ(q.plus, 0.0);
  const auto r = USurvey::warning(-1, 0.3);
  EXPECT_DOUBLE_EQ(r.plus, 0.3);
}

TEST(SpRunner, ClosedFormMatchesConvolutionOnGraphs) {
  const auto inst = gen_uniform(60, 220, 3, 7);
  const FactorGraph g(inst);
  const auto mask = GraphMask::all_free(g);
  for (double m : {0.0, 0.3, 1.0}) {
    SpConfig cfg;
    cfg.max_sweeps = 1;
    cfg.tol = 0.0;
    cfg.seed = 5;
    SpRunner r(g, cfg, m);
    r.randomize();
    const SpState st = r.state();
    for (std::size_t a = 0; a < g.n_clauses(); ++a) {
      for (EdgeId e = g.clause_begin(a); e < g.clause_end(a); ++e) {
        const auto q = sp_update_clause(g, st, e, &mask);
        ASSERT_TRUE(q);
        double w = 1.0;
        for (EdgeId f = g.clause_begin(a); f < g.clause_end(a); ++f) {
          if (f == e) continue;
          const auto pa = r.aligned_prob(f, mask, std::pow(2.0, m));
          ASSERT_TRUE(pa);
          w *= *pa;
        }
        const double x = std::pow(2.0, m);
        ASSERT_NEAR(q->sum(), 1.0, 1e-12);
        ASSERT_NEAR(1.0 - q->zero, w / (w + (1.0 - w) * x), 1e-12);
      }
    }
  }
}

TEST(SpRunner, ZeroMReducesToStandardSurveyPropagation) {
  const auto inst = gen_uniform(80, 300, 3, 11);
  const FactorGraph g(inst);
  SpConfig cfg;
  SpRunner r(g, cfg, 0.0);
  r.randomize();
  const auto st = r.state();
  const auto mask = GraphMask::all_free(g);
  for (std::size_t a = 0; a < g.n_clauses(); ++a)
    for (EdgeId e = g.clause_begin(a); e < g.clause_end(a); ++e) {
      double ref = 1.0;
      for (EdgeId f = g.clause_begin(a); f < g.clause_end(a); ++f)
        if (f != e) ref *= oracle::sp_classic_factor(g, st.eta, f);
      const auto q = sp_update_clause(g, st, e, &mask);
      ASSERT_TRUE(q);
      ASSERT_NEAR(1.0 - q->zero, ref, 1e-12);
    }
}

TEST(SpRunner, ParamagneticAtLowDensity) {
  for (double m : {0.0, 0.5, 1.0})
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto inst = gen_uniform(1000, 1000, 3, seed);
      const FactorGraph g(inst);
      SpConfig cfg;
      cfg.seed = seed;
      const auto r = sp_run(g, m, cfg);
      EXPECT_TRUE(r.converged);
      EXPECT_LT(*std::max_element(r.state.eta.begin(), r.state.eta.end()), 1e-3);
    }
}

TEST(SpRunner, NontrivialNearThreshold) {
  const auto inst = gen_uniform(3000, 12600, 3, 2);
  const FactorGraph g(inst);
  SpConfig cfg;
  cfg.tol = 1e-3;
  cfg.seed = 1;
  const auto r = sp_run(g, 0.0, cfg);
  ASSERT_TRUE(r.converged);
  std::size_t polarized = 0;
  for (std::size_t i = 0; i < g.n_vars(); ++i) {
    const auto b = variable_bias(g, r.state, i);
    ASSERT_TRUE(b);
    EXPECT_NEAR(b->w_plus + b->w_minus + b->w_zero, 1.0, 1e-12);
    if (b->w_zero < 0.9) ++polarized;
  }
  EXPECT_GT(polarized, g.n_vars() / 10);
}

TEST(SpRunner, RejectsInvalidM) {
  const auto inst = gen_uniform(10, 20, 3, 0);
  const FactorGraph g(inst);
  EXPECT_THROW(SpRunner(g, SpConfig{}, 1.5), Error);
  EXPECT_THROW(SpRunner(g, SpConfig{}, -0.1), Error);
}

TEST(PhiM, NoClausesGivesMLog2) {
  CnfInstance inst;
  inst.n_vars = 5;
  inst.k = 3;
  const FactorGraph g(inst);
  for (double m : {0.0, 0.4, 1.0}) {
    SpState st;
    st.m = m;
    EXPECT_NEAR(phi_m(g, st), m * std::log(2.0), 1e-14);
  }
}

TEST(PhiM, TrivialStateFormula) {
  const auto inst = gen_uniform(400, 800, 3, 5);
  const FactorGraph g(inst);
  for (double m : {0.0, 0.25, 1.0}) {
    SpState st;
    st.m = m;
    st.eta.assign(g.n_edges(), 0.0);
    const double alpha = 2.0;
    EXPECT_NEAR(phi_m(g, st), m * (std::log(2.0) + alpha * std::log(1.0 - 0.125)), 1e-12);
  }
}

TEST(PhiM, DisjointClausesCountSolutions) {
  const auto inst = disjoint_clauses(5, 3, 1);
  const FactorGraph g(inst);
  const auto r = sp_run(g, 1.0, SpConfig{});
  ASSERT_TRUE(r.converged);
  const double count = static_cast<double>(count_solutions(inst));
  EXPECT_NEAR(phi_m(g, r.state), std::log(count) / static_cast<double>(inst.n_vars), 1e-12);
}

TEST(PhiM, ContradictoryStateIsMinusInfinity) {
  // x0 forced both ways by two unit-like warnings
  CnfInstance inst;
  inst.n_vars = 1;
  inst.k = 1;
  inst.clauses.push_back(Clause{{{0, 1}}});
  inst.clauses.push_back(Clause{{{0, -1}}});
  const FactorGraph g(inst);
  SpState st;
  st.m = 0.0;
  st.eta.assign(g.n_edges(), 1.0);
  EXPECT_EQ(phi_m(g, st), -kInf);
}

TEST(MScan, ParamagneticRowsAreTrivial) {
  const auto inst = gen_uniform(500, 500, 3, 9);
  const FactorGraph g(inst);
  const auto res = m_scan(g, {1.0, 0.75, 0.5, 0.25, 0.0}, SpConfig{});
  ASSERT_EQ(res.rows.size(), 5u);
  const double ref = std::log(2.0) + std::log(1.0 - 0.125);
  for (const auto& row : res.rows) {
    EXPECT_TRUE(row.converged);
    EXPECT_TRUE(row.trivial);
    if (row.m > 0) {
      EXPECT_NEAR(row.phi_over_m, ref, 1e-6);
    }
  }
  ASSERT_TRUE(res.m_star);
  std::ostringstream os;
  write_m_scan_csv(res, os);
  EXPECT_EQ(os.str().substr(0, 31), "m,phi,phi_over_m,converged,triv");
}

TEST(MScan, RejectsAscendingGrid) {
  const auto inst = gen_uniform(20, 20, 3, 9);
  const FactorGraph g(inst);
  EXPECT_THROW(m_scan(g, {0.0, 1.0}, SpConfig{}), Error);
}

TEST(Sid, SolvesParamagneticInstanceThroughLocalSearch) {
  const auto inst = gen_uniform(2000, 4000, 3, 3);
  SidConfig cfg;
  cfg.seed = 3;
  const auto r = sid(inst, cfg);
  ASSERT_EQ(r.status, SidStatus::Solved);
  EXPECT_EQ(energy(inst, r.assignment), 0u);
  EXPECT_EQ(r.rounds.size(), 1u);
}

TEST(Sid, SolvesClusteredInstance) {
  const auto inst = gen_uniform(3000, 12300, 3, 4);
  SidConfig cfg;
  cfg.sp.tol = 1e-3;
  cfg.seed = 4;
  const auto r = sid(inst, cfg);
  ASSERT_EQ(r.status, SidStatus::Solved) << to_string(r.status);
  EXPECT_EQ(energy(inst, r.assignment), 0u);
  EXPECT_GT(r.rounds.size(), 1u);
  EXPECT_LT(r.free_at_handoff, inst.n_vars);
}

TEST(Sid, ContradictoryInstanceFails) {
  CnfInstance inst;
  inst.n_vars = 1;
  inst.k = 1;
  inst.clauses.push_back(Clause{{{0, 1}}});
  inst.clauses.push_back(Clause{{{0, -1}}});
  const auto r = sid(inst, SidConfig{});
  EXPECT_NE(r.status, SidStatus::Solved);
}

TEST(BiasCsv, HasOneRowPerVariable) {
  const auto inst = gen_uniform(30, 60, 3, 1);
  const FactorGraph g(inst);
  const auto r = sp_run(g, 0.0, SpConfig{});
  std::ostringstream os;
  write_biases_csv(g, r.state, os);
  const std::string s = os.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 31);
}
