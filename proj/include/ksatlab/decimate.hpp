#ifndef KSATLAB_DECIMATE_HPP
#define KSATLAB_DECIMATE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ksatlab/bp.hpp"
#include "ksatlab/propagate.hpp"

namespace ksat {

struct UcpResult {
  std::map<std::uint32_t, Spin> implied;  // values forced beyond pa
  bool contradiction = false;
};

/// Unit clause propagation starting from pa. The implied set is the closure under
/// unit resolution, which does not depend on processing order.
inline UcpResult ucp(const CnfInstance& inst, const PartialAssignment& pa) {
  UcpResult r;
  Propagator p(inst);
  bool ok = p.propagate();
  for (std::size_t v = 0; v < pa.n_vars() && ok; ++v)
    if (pa.is_fixed(v)) ok = p.assign(v, pa.value(v));
  if (!ok) {
    r.contradiction = true;
    return r;
  }
  for (auto v : p.trail())
    if (v >= pa.n_vars() || !pa.is_fixed(v)) r.implied[v] = p.value(v);
  return r;
}

namespace detail {

// Variables that occur with a single polarity among the unsatisfied clauses.
inline std::vector<std::pair<std::uint32_t, Spin>> pure_literals(const Propagator& p) {
  const auto& inst = p.instance();
  std::vector<std::uint8_t> seen(inst.n_vars, 0);  // bit0: positive, bit1: negated
  for (std::size_t a = 0; a < inst.clauses.size(); ++a) {
    if (p.clause_satisfied(a)) continue;
    for (const auto& l : inst.clauses[a].literals)
      if (p.value(l.var) == 0) seen[l.var] |= l.j_sign < 0 ? 1 : 2;
  }
  std::vector<std::pair<std::uint32_t, Spin>> out;
  for (std::uint32_t v = 0; v < inst.n_vars; ++v)
    if (seen[v] == 1) out.emplace_back(v, Spin{1});
    else if (seen[v] == 2) out.emplace_back(v, Spin{-1});
  return out;
}

// Unit propagation and pure literals to a joint fixpoint; false on conflict.
inline bool simplify_fixpoint(Propagator& p) {
  if (!p.propagate()) return false;
  for (;;) {
    auto pure = pure_literals(p);
    if (pure.empty()) return true;
    for (auto [v, s] : pure)
      if (!p.assign(v, s)) return false;
  }
}

}  // namespace detail

/// Pure-literal rule iterated jointly with unit propagation. Returns the values set
/// beyond pa (empty on conflict).
inline std::map<std::uint32_t, Spin> pure_literal_pass(const CnfInstance& inst,
                                                       const PartialAssignment& pa) {
  std::map<std::uint32_t, Spin> out;
  Propagator p(inst);
  bool ok = p.propagate();
  for (std::size_t v = 0; v < pa.n_vars() && ok; ++v)
    if (pa.is_fixed(v)) ok = p.assign(v, pa.value(v));
  if (!ok || !detail::simplify_fixpoint(p)) return out;
  for (auto v : p.trail())
    if (v >= pa.n_vars() || !pa.is_fixed(v)) out[v] = p.value(v);
  return out;
}

struct DpllConfig {
  std::uint64_t seed = 0;
  bool pure_literals = true;
};

struct DpllResult {
  bool sat = false;
  SpinConfig assignment;  // complete when sat
  std::uint64_t nodes = 0;
};

/// Davis-Putnam-Logemann-Loveland search: unit propagation and pure literals,
/// then branch on a uniformly random free variable with a random first value.
inline DpllResult dpll(const CnfInstance& inst, const DpllConfig& cfg = {}) {
  DpllResult res;
  if (inst.contradiction) return res;
  Rng rng = make_rng(cfg.seed, 0xD1);
  Propagator p(inst);
  auto simp = [&]() { return cfg.pure_literals ? detail::simplify_fixpoint(p) : p.propagate(); };

  struct Frame {
    std::size_t mark;
    std::uint32_t var;
    Spin second;
    bool tried_second;
  };
  std::vector<Frame> stack;
  std::vector<std::uint32_t> free_vars;

  bool ok = simp();
  for (;;) {
    ++res.nodes;
    if (ok && p.all_satisfied()) {
      res.sat = true;
      res.assignment.assign(inst.n_vars, 1);
      for (std::size_t v = 0; v < inst.n_vars; ++v)
        res.assignment[v] = p.value(v) != 0 ? p.value(v) : (coin(rng) ? 1 : -1);
      return res;
    }
    if (ok) {
      free_vars.clear();
      for (std::uint32_t v = 0; v < inst.n_vars; ++v)
        if (p.value(v) == 0) free_vars.push_back(v);
      const auto v = free_vars[uniform_index(rng, free_vars.size())];
      const Spin s = coin(rng) ? 1 : -1;
      stack.push_back({p.trail_size(), v, static_cast<Spin>(-s), false});
      ok = p.assign(v, s) && simp();
      continue;
    }
    // backtrack
    while (!stack.empty() && stack.back().tried_second) {
      p.undo_to(stack.back().mark);
      stack.pop_back();
    }
    if (stack.empty()) return res;
    auto& f = stack.back();
    p.undo_to(f.mark);
    f.tried_second = true;
    ok = p.assign(f.var, f.second) && simp();
  }
}

/// Exact model count by DPLL-style splitting with unit propagation only (pure
/// literals would discard models). A branch whose clauses are all satisfied
/// contributes 2^(free variables).
inline double dpll_count(const CnfInstance& inst) {
  if (inst.contradiction) return 0.0;
  Propagator p(inst);
  if (!p.propagate()) return 0.0;
  auto rec = [&](auto&& self) -> double {
    if (p.all_satisfied())
      return std::ldexp(1.0, static_cast<int>(inst.n_vars - p.trail_size()));
    // branch on a variable of the first unsatisfied clause
    std::uint32_t v = 0;
    for (std::size_t a = 0; a < inst.clauses.size(); ++a) {
      if (p.clause_satisfied(a)) continue;
      for (const auto& l : inst.clauses[a].literals)
        if (p.value(l.var) == 0) {
          v = l.var;
          goto found;
        }
    }
  found:
    double total = 0.0;
    for (Spin s : {Spin{1}, Spin{-1}}) {
      const std::size_t mark = p.trail_size();
      if (p.assign(v, s)) total += self(self);
      p.undo_to(mark);
    }
    return total;
  };
  return rec(rec);
}

struct WalksatConfig {
  std::uint64_t max_flips = 100000;
  double noise = 0.5;
  std::uint64_t seed = 0;
};

struct WalksatResult {
  bool solved = false;
  SpinConfig assignment;
  std::uint64_t flips = 0;
};

/// WalkSAT: repeatedly pick a random violated clause and flip one of its variables,
/// a random one with probability `noise`, otherwise one that breaks the fewest
/// currently satisfied clauses. Variables fixed in `frozen` (non-zero) never flip.
inline WalksatResult walksat(const CnfInstance& inst, const WalksatConfig& cfg,
                             const SpinConfig* initial = nullptr,
                             const std::vector<Spin>* frozen = nullptr) {
  Rng rng = make_rng(cfg.seed, 0x3A);
  WalksatResult res;
  auto& s = res.assignment;
  if (initial) {
    if (initial->size() != inst.n_vars) throw Error(ErrorKind::InvalidParameters, "initial length");
    s = *initial;
  } else {
    s.resize(inst.n_vars);
    for (auto& x : s) x = coin(rng) ? 1 : -1;
  }
  if (frozen)
    for (std::size_t v = 0; v < inst.n_vars; ++v)
      if ((*frozen)[v] != 0) s[v] = (*frozen)[v];
  if (inst.contradiction) return res;

  const std::size_t m = inst.clauses.size();
  std::vector<std::vector<std::uint32_t>> occ(inst.n_vars);
  for (std::size_t a = 0; a < m; ++a)
    for (const auto& l : inst.clauses[a].literals) occ[l.var].push_back(static_cast<std::uint32_t>(a));
  std::vector<std::uint32_t> n_true(m, 0);
  std::vector<std::uint32_t> unsat, pos(m, 0);
  for (std::size_t a = 0; a < m; ++a) {
    for (const auto& l : inst.clauses[a].literals) n_true[a] += l.satisfied_by(s[l.var]);
    if (n_true[a] == 0) {
      pos[a] = static_cast<std::uint32_t>(unsat.size());
      unsat.push_back(static_cast<std::uint32_t>(a));
    }
  }
  auto lit_true = [&](std::uint32_t a, std::uint32_t v) {
    for (const auto& l : inst.clauses[a].literals)
      if (l.var == v) return l.satisfied_by(s[v]);
    return false;
  };
  auto flip = [&](std::uint32_t v) {
    for (auto a : occ[v]) {
      const bool was = lit_true(a, v);
      if (was) {
        if (--n_true[a] == 0) {
          pos[a] = static_cast<std::uint32_t>(unsat.size());
          unsat.push_back(a);
        }
      } else if (n_true[a]++ == 0) {
        const auto last = unsat.back();
        unsat[pos[a]] = last;
        pos[last] = pos[a];
        unsat.pop_back();
      }
    }
    s[v] = static_cast<Spin>(-s[v]);
  };
  auto break_count = [&](std::uint32_t v) {
    std::size_t b = 0;
    for (auto a : occ[v]) b += n_true[a] == 1 && lit_true(a, v);
    return b;
  };

  std::vector<std::uint32_t> cand;
  while (!unsat.empty() && res.flips < cfg.max_flips) {
    const auto a = unsat[uniform_index(rng, unsat.size())];
    cand.clear();
    for (const auto& l : inst.clauses[a].literals)
      if (!frozen || (*frozen)[l.var] == 0) cand.push_back(l.var);
    if (cand.empty()) break;  // violated by frozen variables alone
    std::uint32_t pick;
    if (uniform01(rng) < cfg.noise) {
      pick = cand[uniform_index(rng, cand.size())];
    } else {
      std::size_t best = ~std::size_t{0}, ties = 0;
      pick = cand[0];
      for (auto v : cand) {
        const auto b = break_count(v);
        if (b < best) {
          best = b;
          pick = v;
          ties = 1;
        } else if (b == best && uniform_index(rng, ++ties) == 0) {
          pick = v;
        }
      }
    }
    flip(pick);
    ++res.flips;
  }
  res.solved = unsat.empty();
  return res;
}

// ---------------------------------------------------------------------------
// BP-guided decimation

/// Fixed (U) and frozen (W = fixed or directly implied) variables during
/// decimation, with the number of newly frozen variables per step.
struct FrozenLedger {
  std::vector<std::uint32_t> fixed;   // U, in decimation order
  std::vector<std::uint8_t> frozen;   // membership in W
  std::size_t n_frozen = 0;
  std::vector<std::size_t> newly_frozen;  // |Z_t|

  explicit FrozenLedger(std::size_t n = 0) : frozen(n, 0) {}
};

struct DecimationStep {
  std::size_t t = 0;
  double theta = 0.0;
  std::uint32_t var = 0;
  Spin value = 0;
  double p_plus = 0.5;
  std::size_t newly_frozen = 0;
};

enum class Outcome { Solution, Contradiction, Aborted };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Solution: return "solution";
    case Outcome::Contradiction: return "contradiction";
    case Outcome::Aborted: return "aborted";
  }
  return "?";
}

struct DecimationTrace {
  std::vector<DecimationStep> steps;
  Outcome outcome = Outcome::Contradiction;
  std::size_t contradiction_step = 0;  // step at which it failed
  SpinConfig assignment;               // complete when outcome == Solution
  FrozenLedger ledger;
  std::size_t bp_runs = 0;
  std::size_t bp_nonconverged = 0;
};

enum class NonConvergence { UseCurrent, Abort };
enum class ValueRule { BpMarginal, Random };

struct DecimationConfig {
  BpConfig bp;
  Beta beta = Beta::infinity();
  bool ucp = true;
  NonConvergence on_nonconvergence = NonConvergence::UseCurrent;
  ValueRule value_rule = ValueRule::BpMarginal;
  // Fraction of the free variables fixed between two BP runs. 0 reruns BP before
  // every fix; a positive value fixes ceil(fraction * free) random variables, each
  // drawn from the marginals of the last run.
  double fix_fraction = 0.0;
  std::uint64_t seed = 0;
};

/// Decimation loop: pick a random free variable, run BP on the residual formula,
/// draw its value from the BP marginal, fix it, propagate units. The BP messages
/// are kept between steps and only the region affected by the new fixes is
/// recomputed.
inline DecimationTrace bp_guided_decimation(const CnfInstance& inst, const DecimationConfig& cfg) {
  const std::size_t n = inst.n_vars;
  DecimationTrace tr;
  tr.ledger = FrozenLedger(n);
  Rng rng = make_rng(cfg.seed, 0xDE);
  if (inst.contradiction) return tr;

  const FactorGraph g(inst);
  GraphMask mask = GraphMask::all_free(g);
  Propagator prop(inst);
  prop.set_unit_propagation(cfg.ucp);
  BpConfig bcfg = cfg.bp;
  bcfg.seed = mix_seed(cfg.seed, 0xB0);
  BpRunner bp(g, bcfg, cfg.beta);
  bp.set_copy_state(false);
  const bool use_bp = cfg.value_rule == ValueRule::BpMarginal;

  std::vector<std::uint32_t> free_list(n), free_pos(n);
  for (std::uint32_t v = 0; v < n; ++v) free_list[v] = free_pos[v] = v;
  std::size_t alive_clauses = inst.clauses.size();

  std::vector<std::uint32_t> changed;
  // Moves trail entries from `from` into the mask and the ledger.
  auto absorb = [&](std::size_t from) {
    changed.clear();
    for (std::size_t t = from; t < prop.trail_size(); ++t) {
      const auto v = prop.trail()[t];
      mask.value[v] = prop.value(v);
      tr.ledger.frozen[v] = 1;
      ++tr.ledger.n_frozen;
      const auto last = free_list.back();
      free_list[free_pos[v]] = last;
      free_pos[last] = free_pos[v];
      free_list.pop_back();
      changed.push_back(v);
      for (EdgeId f : g.var_edges(v)) {
        const auto a = g.edge_clause(f);
        if (mask.clause_alive[a] && prop.clause_satisfied(a)) {
          mask.clause_alive[a] = 0;
          --alive_clauses;
        }
      }
    }
    return prop.trail_size() - from;
  };

  if (!prop.propagate()) {
    tr.contradiction_step = 0;
    return tr;
  }
  absorb(0);
  if (use_bp) bp.randomize(mask);
  bool first = true;

  std::size_t pending = 0;  // fixes left before BP is rerun
  for (std::size_t t = 1; !free_list.empty(); ++t) {
    const auto v = free_list[uniform_index(rng, free_list.size())];
    double p_plus = 0.5;
    if (use_bp && alive_clauses > 0) {
      if (pending == 0) {
        const auto r = bp.run(mask, !first);
        first = false;
        ++tr.bp_runs;
        if (r.contradiction) {
          tr.outcome = Outcome::Contradiction;
          tr.contradiction_step = t;
          return tr;
        }
        if (!r.converged) {
          ++tr.bp_nonconverged;
          if (cfg.on_nonconvergence == NonConvergence::Abort) {
            tr.outcome = Outcome::Aborted;
            tr.contradiction_step = t;
            return tr;
          }
        }
        pending = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(cfg.fix_fraction * static_cast<double>(free_list.size()))));
      }
      --pending;
      const auto mg = marginal(g, bp.state(), v, &mask);
      if (!mg) {
        tr.outcome = Outcome::Contradiction;
        tr.contradiction_step = t;
        return tr;
      }
      p_plus = mg->p_plus;
    }
    const Spin s = uniform01(rng) < p_plus ? 1 : -1;
    const std::size_t mark = prop.trail_size();
    const bool ok = prop.assign(v, s);
    tr.ledger.fixed.push_back(v);
    const std::size_t before = tr.ledger.n_frozen;
    absorb(mark);
    std::size_t z = tr.ledger.n_frozen - before;
    tr.ledger.newly_frozen.push_back(z);
    tr.steps.push_back({t, static_cast<double>(t) / static_cast<double>(n), v, s, p_plus, z});
    if (!ok) {
      tr.outcome = Outcome::Contradiction;
      tr.contradiction_step = t;
      return tr;
    }
    if (use_bp && alive_clauses > 0) bp.touch_vars(changed, mask);
  }
  tr.assignment = prop.values();
  if (energy(inst, tr.assignment) != 0) {
    tr.outcome = Outcome::Contradiction;
    tr.contradiction_step = tr.steps.size();
    return tr;
  }
  tr.outcome = Outcome::Solution;
  return tr;
}

inline void write_trace_csv(const DecimationTrace& tr, std::ostream& out) {
  out << "t,theta,var,value,p_plus,newly_frozen\n";
  for (const auto& s : tr.steps)
    out << s.t << ',' << s.theta << ',' << s.var << ',' << static_cast<int>(s.value) << ','
        << s.p_plus << ',' << s.newly_frozen << '\n';
}

struct PhiThetaConfig {
  std::size_t n = 1000;
  double alpha = 1.0;
  std::size_t k = 3;
  std::size_t seeds = 10;
  std::uint64_t seed = 0;
  bool bp_guided = false;
  DecimationConfig decimation;
};

struct PhiThetaPoint {
  double theta = 0.0;
  double phi_cum = 0.0;  // (1/N)|W_t|
  double z_mean = 0.0;   // mean |Z_t|
  double z_stderr = 0.0;
  std::size_t runs = 0;
};

/// Averages the frozen-variable ledger over decimation runs on fresh instances.
/// A run that found a solution is continued with |W| = N and |Z| = 0; a failed
/// run stops contributing after its last step.
inline std::vector<PhiThetaPoint> measure_phi_theta(const PhiThetaConfig& cfg) {
  const std::size_t n = cfg.n;
  std::vector<double> w_sum(n + 1, 0.0), z_sum(n + 1, 0.0), z_sq(n + 1, 0.0);
  std::vector<std::size_t> cnt(n + 1, 0);
  const auto m = clauses_for_density(cfg.alpha, n);
  for (std::size_t r = 0; r < cfg.seeds; ++r) {
    const std::uint64_t s = mix_seed(cfg.seed, r);
    const auto inst = gen_uniform(n, m, cfg.k, s);
    DecimationConfig dc = cfg.decimation;
    dc.seed = s;
    dc.value_rule = cfg.bp_guided ? ValueRule::BpMarginal : ValueRule::Random;
    const auto tr = bp_guided_decimation(inst, dc);
    // |W_0| counts variables implied before the first fix
    std::size_t w = tr.ledger.n_frozen;
    for (auto z : tr.ledger.newly_frozen) w -= z;
    w_sum[0] += static_cast<double>(w) / n;
    ++cnt[0];
    std::size_t t = 1;
    for (; t <= tr.steps.size(); ++t) {
      const double z = static_cast<double>(tr.steps[t - 1].newly_frozen);
      w += tr.steps[t - 1].newly_frozen;
      w_sum[t] += static_cast<double>(w) / n;
      z_sum[t] += z;
      z_sq[t] += z * z;
      ++cnt[t];
    }
    if (tr.outcome == Outcome::Solution)
      for (; t <= n; ++t) {
        w_sum[t] += 1.0;
        ++cnt[t];
      }
  }
  std::vector<PhiThetaPoint> out;
  for (std::size_t t = 0; t <= n; ++t) {
    if (cnt[t] == 0) break;
    PhiThetaPoint p;
    p.theta = static_cast<double>(t) / n;
    p.runs = cnt[t];
    const double c = static_cast<double>(cnt[t]);
    p.phi_cum = w_sum[t] / c;
    p.z_mean = z_sum[t] / c;
    const double var = std::max(0.0, z_sq[t] / c - p.z_mean * p.z_mean);
    p.z_stderr = cnt[t] > 1 ? std::sqrt(var / (c - 1.0)) : 0.0;
    out.push_back(p);
  }
  return out;
}

inline void write_phi_theta_csv(const std::vector<PhiThetaPoint>& pts, std::ostream& out) {
  out << "theta,phi_cum,z_mean,stderr,runs\n";
  for (const auto& p : pts)
    out << p.theta << ',' << p.phi_cum << ',' << p.z_mean << ',' << p.z_stderr << ',' << p.runs
        << '\n';
}

}  // namespace ksat

#endif
