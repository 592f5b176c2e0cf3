// ksatlab_acceptance --criterion N   (N = 1..14, or --all)
// Prints one PASS/FAIL line per criterion; exit status 0 iff all requested pass.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "ksatlab/bp.hpp"
#include "ksatlab/cavity.hpp"
#include "ksatlab/decimate.hpp"
#include "ksatlab/factor_graph.hpp"
#include "ksatlab/sk.hpp"
#include "ksatlab/sp.hpp"
#include "oracles.hpp"

using namespace ksat;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << x;
  return os.str();
}

// exact enumeration with bit masks: (1/N) log #solutions
double log_count_per_var(const CnfInstance& inst) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> cl;
  for (const auto& c : inst.clauses) {
    std::uint32_t mask = 0, pat = 0;
    for (const auto& l : c.literals) {
      mask |= 1u << l.var;
      if (l.j_sign > 0) pat |= 1u << l.var;
    }
    cl.emplace_back(mask, pat);
  }
  std::uint64_t count = 0;
  for (std::uint32_t x = 0; x < (1u << inst.n_vars); ++x) {
    bool ok = true;
    for (const auto& [mask, pat] : cl)
      if ((x & mask) == pat) {
        ok = false;
        break;
      }
    count += ok;
  }
  return std::log(static_cast<double>(count)) / static_cast<double>(inst.n_vars);
}

// --- 1 -------------------------------------------------------------------
Verdict tree_exactness() {
  Rng rng = make_rng(101);
  BpConfig cfg;
  cfg.damping = 0.0;
  cfg.tol = 1e-15;
  cfg.max_sweeps = 200;
  double worst = 0.0;
  std::size_t nmax = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto inst = oracle::random_tree(1 + uniform_index(rng, 9), 3, rng);
    nmax = std::max(nmax, inst.n_vars);
    const FactorGraph g(inst);
    for (double beta : {0.5, 2.0, kInf}) {
      const auto exact = oracle::gibbs_marginals(inst, beta);
      const auto r = run(g, cfg, Beta{beta});
      if (!r.converged) return {false, "BP did not converge on a tree"};
      for (std::size_t i = 0; i < inst.n_vars; ++i) {
        const auto mg = marginal(g, r.state, i);
        if (!mg) return {false, "no marginal"};
        worst = std::max(worst, std::fabs(mg->p_plus - exact.p_plus[i]));
      }
    }
  }
  return {worst <= 1e-9, "200 trees, N<=" + std::to_string(nmax) + ", max |dp| = " + fmt(worst)};
}

// --- 2 -------------------------------------------------------------------
Verdict clause_update_oracle() {
  Rng rng = make_rng(202);
  double worst = 0.0;
  const double betas[] = {0.5, 2.0, 8.0, kInf};
  int count = 0;
  for (std::size_t k : {3u, 4u, 5u})
    for (int rep = 0; rep < 10000; ++rep, ++count) {
      const double beta = betas[rep % 4];
      CnfInstance inst;
      inst.n_vars = k;
      inst.k = k;
      Clause c;
      std::vector<Spin> j(k);
      for (std::size_t r = 0; r < k; ++r) {
        j[r] = coin(rng) ? 1 : -1;
        c.literals.push_back({static_cast<std::uint32_t>(r), j[r]});
      }
      inst.clauses.push_back(c);
      const FactorGraph g(inst);
      BpState st;
      st.beta = Beta{beta};
      st.h.assign(k, 0.0);
      st.u.assign(k, 0.0);
      std::vector<double> h(k - 1);
      for (std::size_t r = 1; r < k; ++r) st.h[r] = h[r - 1] = 8.0 * uniform01(rng) - 4.0;
      const double got = update_clause(g, st, 0);
      worst = std::max(worst, std::fabs(got - oracle::clause_bias_direct(j, h, beta)));
    }
  return {worst <= 1e-10, std::to_string(count) + " inputs, max |du| = " + fmt(worst)};
}

// --- 3 -------------------------------------------------------------------
Verdict indicator_identity() {
  Rng rng = make_rng(303);
  std::size_t checked = 0, bad = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t k = 1 + uniform_index(rng, 7);
    const std::size_t n = k + uniform_index(rng, 5);
    const Clause c = detail::random_clause(n, k, rng);
    SpinConfig s(n, 1);
    for (std::uint32_t x = 0; x < (1u << k); ++x) {
      for (std::size_t r = 0; r < k; ++r) s[c.literals[r].var] = (x >> r) & 1 ? 1 : -1;
      const double w = oracle::w_product(c, s);
      const bool viol = !oracle::clause_true(c, s);
      bad += w != (viol ? 1.0 : 0.0) || clause_violated(c, s) != static_cast<int>(viol);
      ++checked;
    }
  }
  return {bad == 0, std::to_string(checked) + " assignments, mismatches " + std::to_string(bad)};
}

// --- 4 -------------------------------------------------------------------
Verdict oracle_completeness() {
  std::size_t agree = 0, total = 0, sat = 0;
  for (double alpha : {2.0, 4.0, 6.0})
    for (std::uint64_t s = 0; s < 100; ++s) {
      const auto inst = gen_uniform(16, clauses_for_density(alpha, 16), 3, 4000 + 7 * s + static_cast<std::uint64_t>(alpha));
      const bool exact = oracle::count_models(inst) > 0;
      const auto r = dpll(inst, {.seed = s});
      const bool ok = r.sat == exact && (!r.sat || energy(inst, r.assignment) == 0);
      agree += ok;
      sat += exact;
      ++total;
    }
  return {agree == total, std::to_string(agree) + "/" + std::to_string(total) + " agree (" +
                              std::to_string(sat) + " SAT)"};
}

// --- 5 -------------------------------------------------------------------
Verdict planted_soundness() {
  Rng rng = make_rng(505);
  std::size_t bad = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const std::size_t k = 2 + uniform_index(rng, 5);
    const std::size_t n = k + uniform_index(rng, 300);
    const std::size_t m = uniform_index(rng, 8 * n);
    const auto p = gen_planted(n, m, k, s);
    bad += energy(p.instance, p.planted) != 0 || p.instance.m() != m;
  }
  return {bad == 0, "1000 planted instances, violations " + std::to_string(bad)};
}

// --- 6 -------------------------------------------------------------------
Verdict degree_law() {
  const std::size_t n = 100000;
  const auto inst = gen_uniform(n, 3 * n, 3, 606);
  const auto hist = degree_histogram(FactorGraph(inst));
  std::vector<double> obs(40, 0.0), exp(40, 0.0);
  for (auto [d, c] : hist) obs[std::min<std::size_t>(d, 39)] += static_cast<double>(c);
  double tail = 1.0;
  for (std::size_t d = 0; d < 39; ++d) {
    exp[d] = static_cast<double>(n) * oracle::poisson_pmf(d, 9.0);
    tail -= oracle::poisson_pmf(d, 9.0);
  }
  exp[39] = static_cast<double>(n) * tail;
  const double p = oracle::chi_square_pvalue(obs, exp);
  return {p > 0.01, "chi-square p = " + fmt(p)};
}

// --- 7 -------------------------------------------------------------------
Verdict paramagnetic_sp() {
  std::size_t ok = 0, runs = 0;
  double worst = 0.0;
  for (double m : {0.0, 0.5, 1.0})
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto inst = gen_uniform(2000, 2000, 3, 700 + s);
      const FactorGraph g(inst);
      const auto r = sp_run(g, m, {.max_sweeps = 1000, .tol = 1e-10, .seed = s});
      const double mx = *std::max_element(r.state.eta.begin(), r.state.eta.end());
      worst = std::max(worst, mx);
      ok += r.converged && mx < 1e-8;
      ++runs;
    }
  return {ok == runs, std::to_string(ok) + "/" + std::to_string(runs) +
                          " runs trivial (20 seeds per m), max eta = " + fmt(worst)};
}

// --- 8 -------------------------------------------------------------------
Verdict sp_reweighting() {
  Rng rng = make_rng(808);
  double worst = 0.0;
  std::size_t mismatched = 0;
  for (double m : {0.0, 0.5, 1.0})
    for (int rep = 0; rep < 1000; ++rep) {
      const std::size_t d = 1 + uniform_index(rng, 6);
      const auto in = oracle::random_u_surveys(rng, d);
      const auto ref = oracle::sp_var_enumerate(in, m);
      const auto got = sp_update_var(in, m);
      if (ref.has_value() != got.has_value()) {
        ++mismatched;
        continue;
      }
      if (ref)
        for (int h = -static_cast<int>(d); h <= static_cast<int>(d); ++h)
          worst = std::max(worst, std::fabs(got->at(h) - ref->at(h)));

      const std::size_t k = 2 + uniform_index(rng, 4);
      std::vector<HSurvey> hs;
      std::vector<Spin> j;
      for (std::size_t r = 0; r + 1 < k; ++r) {
        hs.push_back(oracle::random_h_survey(rng, 1 + static_cast<int>(uniform_index(rng, 3))));
        j.push_back(coin(rng) ? 1 : -1);
      }
      const Spin jt = coin(rng) ? 1 : -1;
      const auto a = sp_update_clause(jt, hs, j, m);
      const auto b = oracle::sp_clause_enumerate(jt, hs, j, m);
      worst = std::max({worst, std::fabs(a.minus - b.minus), std::fabs(a.zero - b.zero),
                        std::fabs(a.plus - b.plus)});
    }
  return {worst <= 1e-12 && mismatched == 0,
          "3000 var + 3000 clause inputs, max diff = " + fmt(worst)};
}

// --- 9 -------------------------------------------------------------------
Verdict rs_free_entropy() {
  EnsembleParams p;
  p.k = 3;
  p.alpha = 0.0;
  p.pool = 10000;
  p.sweeps = 200;
  p.seed = 9;
  const double w0 = pd_rs(p).omega;
  double mean = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s)
    mean += log_count_per_var(gen_uniform(22, 44, 3, 900 + s));
  mean /= 50.0;
  p.alpha = 2.0;
  const double w2 = pd_rs(p).omega;
  const bool pass = std::fabs(w0 - std::log(2.0)) <= 1e-3 && std::fabs(w2 - mean) <= 2e-2;
  return {pass, "omega(0) = " + fmt(w0, 8) + ", omega(2) = " + fmt(w2) + " vs enumeration " +
                    fmt(mean) + " (N=22, 50 instances)"};
}

// --- 10 ------------------------------------------------------------------
Verdict transitions_4sat() {
  TransitionConfig cfg;
  cfg.alpha_grid = {9.0, 9.2, 9.4, 9.6, 9.8, 10.0, 10.2};
  cfg.pool = 10000;
  cfg.sweeps = 200;
  cfg.bisect_steps = 2;
  cfg.seed = 10;
  const auto t = locate_transitions(4, cfg);
  auto show = [](const char* name, const TransitionEstimate& e) {
    return std::string(name) + " = " + (e.found ? fmt(e.value) : std::string("n/a"));
  };
  const bool pass = t.alpha_d.found && std::fabs(t.alpha_d.value - 9.38) <= 0.25 &&
                    t.alpha_c.found && std::fabs(t.alpha_c.value - 9.547) <= 0.2 &&
                    t.alpha_s.found && std::fabs(t.alpha_s.value - 9.931) <= 0.2;
  return {pass, show("alpha_d", t.alpha_d) + " (9.38 +- 0.25), " + show("alpha_c", t.alpha_c) +
                    " (9.547 +- 0.2), " + show("alpha_s", t.alpha_s) + " (9.931 +- 0.2)"};
}

// --- 11 ------------------------------------------------------------------
Verdict legendre_rows() {
  EnsembleParams p;
  p.pool = 10000;
  p.sweeps = 100;
  p.seed = 11;
  std::size_t ok = 0, rows = 0;
  double worst = 0.0;
  const std::vector<double> grid{1.0, 0.8, 0.6, 0.4, 0.2, 0.0};
  for (auto [k, alpha] : {std::pair<std::size_t, double>{3, 4.2}, {4, 9.6}, {4, 9.9}})
    for (const auto& r : complexity_curve(k, alpha, grid, p)) {
      ++rows;
      ok += r.legendre_residual <= r.bound;
      worst = std::max(worst, r.legendre_residual / r.bound);
    }
  return {ok == rows, std::to_string(ok) + "/" + std::to_string(rows) +
                          " rows within their bound, max residual/bound = " + fmt(worst)};
}

// --- 12 ------------------------------------------------------------------
Verdict decimation_barrier() {
  auto rate = [](double alpha) {
    int solved = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto inst = gen_uniform(5000, clauses_for_density(alpha, 5000), 4, 1200 + s);
      DecimationConfig dc;
      dc.bp.tol = 1e-2;
      dc.bp.max_sweeps = 50;
      dc.bp.seed = s;
      dc.fix_fraction = 0.002;
      dc.seed = s;
      const auto tr = bp_guided_decimation(inst, dc);
      solved += tr.outcome == Outcome::Solution && energy(inst, tr.assignment) == 0;
    }
    return solved / 20.0;
  };
  const double lo = rate(8.0), hi = rate(9.3);
  return {lo >= 0.8 && hi <= 0.2,
          "success " + fmt(lo) + " at alpha 8.0 (>= 0.8), " + fmt(hi) + " at alpha 9.3 (<= 0.2)"};
}

// --- 13 ------------------------------------------------------------------
Verdict sid_capability() {
  int solved = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto inst = gen_uniform(10000, 42000, 3, 1300 + s);
    SidConfig cfg;
    cfg.m = 0.0;
    cfg.sp.tol = 1e-3;
    cfg.seed = s;
    const auto r = sid(inst, cfg);
    solved += r.status == SidStatus::Solved && energy(inst, r.assignment) == 0;
  }
  return {solved >= 7, std::to_string(solved) + "/10 solved and verified (>= 7)"};
}

// --- 14 ------------------------------------------------------------------
Verdict sk_trend() {
  double lo_sum = 0.0, hi_sum = 0.0;
  std::string per;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto sys = SkSystem::random(400, 1400 + s);
    auto score = [&](double t_end) {
      PureStateConfig pc;
      pc.samples = 100;
      pc.repeats = 100;
      pc.schedule = {.t_start = 1.2 * kSkCriticalTemperature, .t_end = t_end, .steps = 2000};
      pc.seed = s;
      return cluster_and_score(overlap_matrix(sample_pure_states(sys, pc))).ultrametricity_score;
    };
    const double lo = score(0.12), hi = score(1.2);
    lo_sum += lo;
    hi_sum += hi;
    per += " " + fmt(lo, 3) + "/" + fmt(hi, 3);
  }
  return {lo_sum > hi_sum, "mean score " + fmt(lo_sum / 5) + " at T_end 0.12 vs " + fmt(hi_sum / 5) +
                               " at T_end 1.2; per seed (low/high):" + per};
}

const std::function<Verdict()> kCriteria[] = {
    tree_exactness,  clause_update_oracle, indicator_identity, oracle_completeness,
    planted_soundness, degree_law,         paramagnetic_sp,    sp_reweighting,
    rs_free_entropy, transitions_4sat,     legendre_rows,      decimation_barrier,
    sid_capability,  sk_trend};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> which;
  bool all = false;
  app.add_option("--criterion", which, "criterion number 1..14")->check(CLI::Range(1, 14));
  app.add_flag("--all", all);
  CLI11_PARSE(app, argc, argv);
  if (all)
    for (int i = 1; i <= 14; ++i) which.push_back(i);
  if (which.empty()) {
    std::cerr << "give --criterion N or --all\n";
    return 2;
  }
  bool ok = true;
  for (int c : which) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = kCriteria[c - 1]();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << c << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << "  ["
              << fmt(sec, 3) << " s]" << std::endl;
    ok = ok && v.pass;
  }
  return ok ? 0 : 1;
}
