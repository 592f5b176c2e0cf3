#ifndef KSATLAB_BP_HPP
#define KSATLAB_BP_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <vector>

#include "ksatlab/factor_graph.hpp"

// Belief propagation for K-SAT. Messages are fields in natural units: a cavity
// field h on edge i->a stands for the message nu(sigma) ~ exp(h sigma), a cavity
// bias u on edge a->i for nu_hat(sigma) ~ exp(u sigma). At finite beta the clause
// weight is exp(-beta W_a); beta = infinity is the uniform measure over solutions,
// which keeps every field finite unless a variable is forced.

namespace ksat {

struct Beta {
  double value = 1.0;

  static Beta infinity() { return Beta{kInf}; }
  bool infinite() const { return std::isinf(value); }
  /// 1 - exp(-beta): the weight removed from a violated clause.
  double penalty() const { return infinite() ? 1.0 : -std::expm1(-value); }
};

enum class Schedule { RandomSequential, ParallelFlood };

struct BpConfig {
  std::size_t max_sweeps = 1000;
  double tol = 1e-7;
  double damping = 0.2;
  Schedule schedule = Schedule::RandomSequential;
  std::uint64_t seed = 0;
};

struct BpState {
  std::vector<double> h;  // per edge, i->a
  std::vector<double> u;  // per edge, a->i
  Beta beta;
};

struct BpResult {
  BpState state;
  bool converged = false;
  bool contradiction = false;
  std::size_t sweeps = 0;
  std::vector<double> trace;  // max |delta u| per sweep
};

namespace detail {

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  if (x == kInf) return kInf;
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

/// log of the probability that a spin with field h sits at value j.
inline double log_prob_at(double h, Spin j) { return -softplus(-2.0 * j * h); }

inline double bias_from_log_delta(double log_delta, Spin j, double penalty) {
  // nu_hat(J)/nu_hat(-J) = 1 - penalty * delta
  const double x = penalty * std::exp(log_delta);
  return j * 0.5 * std::log1p(-std::min(x, 1.0));
}

inline double abs_change(double a, double b) {
  if (a == b) return 0.0;
  return std::fabs(a - b);
}

// Sum of incoming biases with infinite ones counted separately, so that one term
// can be excluded exactly.
struct FieldAccumulator {
  double finite = 0.0;
  std::uint32_t pos_inf = 0;
  std::uint32_t neg_inf = 0;

  void add(double u) {
    if (u == kInf) ++pos_inf;
    else if (u == -kInf) ++neg_inf;
    else finite += u;
  }
  void remove(double u) {
    if (u == kInf) --pos_inf;
    else if (u == -kInf) --neg_inf;
    else finite -= u;
  }
  double value() const {
    if (pos_inf && neg_inf) return std::numeric_limits<double>::quiet_NaN();
    if (pos_inf) return kInf;
    if (neg_inf) return -kInf;
    return finite;
  }
  double value_without(double u) const {
    FieldAccumulator c = *this;
    c.remove(u);
    return c.value();
  }
};

}  // namespace detail

/// Clause-to-variable bias on edge e (a->i), from the stored cavity fields of the
/// other active edges of a. Closed form of
///   exp(u sigma_i) ~ sum_{sigma_j} exp(-beta W_a + sum_j h_j sigma_j).
inline double update_clause(const FactorGraph& g, const BpState& state, EdgeId e,
                            const GraphMask* mask = nullptr) {
  const std::size_t a = g.edge_clause(e);
  double log_delta = 0.0;
  for (EdgeId f = g.clause_begin(a); f < g.clause_end(a); ++f) {
    if (f == e || (mask && !mask->var_free(g.edge_var(f)))) continue;
    log_delta += detail::log_prob_at(state.h[f], g.edge_j(f));
  }
  return detail::bias_from_log_delta(log_delta, g.edge_j(e), state.beta.penalty());
}

/// Variable-to-clause field on edge e (i->a): sum of biases from the other active
/// clauses of i. NaN means opposite infinite biases meet (contradiction).
inline double update_var(const FactorGraph& g, const BpState& state, EdgeId e,
                         const GraphMask* mask = nullptr) {
  detail::FieldAccumulator acc;
  for (EdgeId f : g.var_edges(g.edge_var(e))) {
    if (f == e || (mask && !mask->alive(g.edge_clause(f)))) continue;
    acc.add(state.u[f]);
  }
  return acc.value();
}

inline double local_field(const FactorGraph& g, const BpState& state, std::size_t i,
                          const GraphMask* mask = nullptr) {
  detail::FieldAccumulator acc;
  for (EdgeId f : g.var_edges(i)) {
    if (mask && !mask->alive(g.edge_clause(f))) continue;
    acc.add(state.u[f]);
  }
  return acc.value();
}

struct Marginal {
  double p_plus = 0.5;
  double p_minus = 0.5;
};

/// exp(h sigma) / (2 cosh h). nullopt when the field is undefined (the two
/// unnormalized weights are both zero).
inline std::optional<Marginal> marginal_from_field(double h) {
  if (std::isnan(h)) return std::nullopt;
  const double pp = std::exp(detail::log_prob_at(h, 1));
  return Marginal{pp, 1.0 - pp};
}

inline std::optional<Marginal> marginal(const FactorGraph& g, const BpState& state, std::size_t i,
                                        const GraphMask* mask = nullptr) {
  return marginal_from_field(local_field(g, state, i, mask));
}

/// Drives a BP state on a (possibly masked) graph. Keeps the messages between
/// calls so that decimation can warm-start after each fix.
class BpRunner {
 public:
  BpRunner(const FactorGraph& g, const BpConfig& cfg, Beta beta)
      : g_(&g), cfg_(cfg), rng_(make_rng(cfg.seed, 0xB9)) {
    state_.beta = beta;
    state_.h.assign(g.n_edges(), 0.0);
    state_.u.assign(g.n_edges(), 0.0);
    acc_.resize(g.n_vars());
  }

  const BpState& state() const { return state_; }
  BpState& state() { return state_; }

  /// Random cavity fields in [-1, 1] with biases derived from them.
  void randomize(const GraphMask& mask) {
    for (auto& x : state_.h) x = 2.0 * uniform01(rng_) - 1.0;
    for (std::size_t a = 0; a < g_->n_clauses(); ++a) {
      if (!mask.alive(a)) continue;
      for (EdgeId e = g_->clause_begin(a); e < g_->clause_end(a); ++e)
        if (mask.var_free(g_->edge_var(e))) state_.u[e] = update_clause(*g_, state_, e, &mask);
    }
    dirty_all_ = true;
  }

  /// Registers variables whose status changed (fixed, or lost a clause) since the
  /// last run. The cached field sums of their neighbours are refreshed and the
  /// affected clauses are queued for the next incremental run.
  void touch_vars(const std::vector<std::uint32_t>& vars, const GraphMask& mask) {
    ensure_dirty();
    for (auto v : vars)
      for (EdgeId f : g_->var_edges(v)) {
        const std::size_t a = g_->edge_clause(f);
        if (mask.alive(a)) mark(a);
        for (EdgeId e = g_->clause_begin(a); e < g_->clause_end(a); ++e) {
          const auto w = g_->edge_var(e);
          if (!mask.var_free(w)) continue;
          refresh_field(w, mask);
          for (EdgeId f2 : g_->var_edges(w))
            if (mask.alive(g_->edge_clause(f2))) mark(g_->edge_clause(f2));
        }
      }
  }

  /// Runs sweeps until the largest bias change in a sweep drops below tol.
  /// With incremental = true only queued clauses are visited; a clause is queued
  /// again when one of its inputs moves by more than tol.
  BpResult run(const GraphMask& mask, bool incremental = false) {
    BpResult res;
    ensure_dirty();
    if (!incremental || dirty_all_) {
      rebuild_fields(mask);
      dirty_list_.clear();
      std::fill(dirty_.begin(), dirty_.end(), 0);
      for (std::size_t a = 0; a < g_->n_clauses(); ++a)
        if (mask.alive(a)) mark(a);
      dirty_all_ = false;
    }
    std::vector<std::uint32_t> order;
    for (std::size_t sweep = 0; sweep < cfg_.max_sweeps; ++sweep) {
      order.clear();
      if (incremental) {
        for (auto a : dirty_list_)
          if (mask.alive(a)) order.push_back(a);
          else dirty_[a] = 0;
        dirty_list_.clear();
      } else {
        for (std::size_t a = 0; a < g_->n_clauses(); ++a)
          if (mask.alive(a)) order.push_back(static_cast<std::uint32_t>(a));
      }
      double max_delta = 0.0;
      bool contradiction = false;
      if (cfg_.schedule == Schedule::ParallelFlood) {
        for (auto a : order) dirty_[a] = 0;
        max_delta = flood_sweep(mask, order, contradiction, incremental);
      } else {
        std::shuffle(order.begin(), order.end(), rng_);
        for (auto a : order) {
          dirty_[a] = 0;
          max_delta = std::max(max_delta, update_clause_node(a, mask, incremental, contradiction));
          if (contradiction) break;
        }
      }
      ++res.sweeps;
      res.trace.push_back(max_delta);
      if (contradiction) {
        res.contradiction = true;
        break;
      }
      if (max_delta < cfg_.tol || (incremental && dirty_list_.empty())) {
        res.converged = true;
        break;
      }
    }
    if (!incremental) {
      for (auto a : dirty_list_) dirty_[a] = 0;
      dirty_list_.clear();
    }
    if (!res.converged && !res.contradiction) {
      for (std::size_t i = 0; i < g_->n_vars(); ++i)
        if (mask.var_free(i) && std::isnan(acc_[i].value())) res.contradiction = true;
    }
    if (copy_state_) res.state = state_;
    res.state.beta = state_.beta;
    return res;
  }

  /// When false, run() leaves BpResult::state empty (the runner's own state()
  /// holds the messages); saves a copy per call inside decimation.
  void set_copy_state(bool on) { copy_state_ = on; }

 private:
  void ensure_dirty() {
    if (dirty_.size() != g_->n_clauses()) dirty_.assign(g_->n_clauses(), 0);
  }

  void mark(std::size_t a) {
    if (!dirty_[a]) {
      dirty_[a] = 1;
      dirty_list_.push_back(static_cast<std::uint32_t>(a));
    }
  }

  void refresh_field(std::size_t i, const GraphMask& mask) {
    acc_[i] = {};
    for (EdgeId f : g_->var_edges(i))
      if (mask.alive(g_->edge_clause(f))) acc_[i].add(state_.u[f]);
  }

  void rebuild_fields(const GraphMask& mask) {
    for (std::size_t i = 0; i < g_->n_vars(); ++i) {
      if (mask.var_free(i)) refresh_field(i, mask);
      else acc_[i] = {};
    }
  }

  double damp(double u_new, double u_old) const {
    if (std::isinf(u_new) || std::isinf(u_old) || cfg_.damping == 0.0) return u_new;
    return (1.0 - cfg_.damping) * u_new + cfg_.damping * u_old;
  }

  double update_clause_node(std::size_t a, const GraphMask& mask, bool,
                            bool& contradiction) {
    const double penalty = state_.beta.penalty();
    EdgeId es[64];
    double p[64];  // probability that the variable sits at its falsifying spin
    std::size_t n = 0;
    std::size_t n_zero = 0;
    double prod = 1.0;  // product over the nonzero p
    for (EdgeId e = g_->clause_begin(a); e < g_->clause_end(a) && n < 64; ++e) {
      const auto i = g_->edge_var(e);
      if (!mask.var_free(i)) continue;
      const double h = acc_[i].value_without(state_.u[e]);
      if (std::isnan(h)) {
        contradiction = true;
        return 0.0;
      }
      state_.h[e] = h;
      es[n] = e;
      p[n] = 1.0 / (1.0 + std::exp(-2.0 * g_->edge_j(e) * h));
      if (p[n] == 0.0) ++n_zero;
      else prod *= p[n];
      ++n;
    }
    double max_delta = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const EdgeId e = es[r];
      double delta;
      if (p[r] == 0.0) delta = n_zero > 1 ? 0.0 : prod;
      else delta = n_zero > 0 ? 0.0 : prod / p[r];
      const double u_calc = 0.5 * g_->edge_j(e) * std::log1p(-std::min(penalty * delta, 1.0));
      const double u_old = state_.u[e];
      const double u_new = damp(u_calc, u_old);
      const double d = detail::abs_change(u_new, u_old);
      max_delta = std::max(max_delta, d);
      if (d == 0.0) continue;
      const auto i = g_->edge_var(e);
      acc_[i].remove(u_old);
      acc_[i].add(u_new);
      state_.u[e] = u_new;
      if (d > cfg_.tol)
        for (EdgeId f : g_->var_edges(i)) {
          const auto b = g_->edge_clause(f);
          if (b != a && mask.alive(b)) mark(b);
        }
    }
    return max_delta;
  }

  double flood_sweep(const GraphMask& mask, const std::vector<std::uint32_t>& order,
                     bool& contradiction, bool incremental) {
    for (auto a : order)
      for (EdgeId e = g_->clause_begin(a); e < g_->clause_end(a); ++e) {
        const auto i = g_->edge_var(e);
        if (!mask.var_free(i)) continue;
        state_.h[e] = acc_[i].value_without(state_.u[e]);
        if (std::isnan(state_.h[e])) {
          contradiction = true;
          return 0.0;
        }
      }
    double max_delta = 0.0;
    std::vector<std::pair<EdgeId, double>> fresh;
    for (auto a : order)
      for (EdgeId e = g_->clause_begin(a); e < g_->clause_end(a); ++e)
        if (mask.var_free(g_->edge_var(e)))
          fresh.emplace_back(e, damp(update_clause(*g_, state_, e, &mask), state_.u[e]));
    for (auto [e, u] : fresh) {
      const double d = detail::abs_change(u, state_.u[e]);
      max_delta = std::max(max_delta, d);
      state_.u[e] = u;
      if (incremental && d > cfg_.tol)
        for (EdgeId f : g_->var_edges(g_->edge_var(e)))
          if (mask.alive(g_->edge_clause(f))) mark(g_->edge_clause(f));
    }
    rebuild_fields(mask);
    return max_delta;
  }

  const FactorGraph* g_;
  BpConfig cfg_;
  Rng rng_;
  BpState state_;
  std::vector<detail::FieldAccumulator> acc_;
  std::vector<std::uint8_t> dirty_;
  std::vector<std::uint32_t> dirty_list_;
  bool dirty_all_ = true;
  bool copy_state_ = true;
};

/// Fresh run from random messages on the (optionally masked) graph.
inline BpResult run(const FactorGraph& g, const GraphMask& mask, const BpConfig& cfg, Beta beta) {
  BpRunner r(g, cfg, beta);
  r.randomize(mask);
  return r.run(mask);
}

inline BpResult run(const FactorGraph& g, const BpConfig& cfg, Beta beta) {
  return run(g, GraphMask::all_free(g), cfg, beta);
}

/// Bethe free entropy per free variable,
///   (sum_i log z_i + sum_a log z_a - sum_(ia) log z_ia) / N,
/// with the cavity fields recomputed from the stored biases. -inf signals a zero
/// shift (local contradiction).
inline double bethe_free_entropy(const FactorGraph& g, const BpState& state,
                                 const GraphMask* mask = nullptr) {
  using detail::log_prob_at;
  const double penalty = state.beta.penalty();
  auto free = [&](std::size_t i) { return !mask || mask->var_free(i); };
  auto alive = [&](std::size_t a) { return !mask || mask->alive(a); };
  double total = 0.0;
  std::size_t n_free = 0;
  std::vector<double> cavity(g.n_edges(), 0.0);
  for (std::size_t i = 0; i < g.n_vars(); ++i) {
    if (!free(i)) continue;
    ++n_free;
    detail::FieldAccumulator acc;
    double lp = 0.0, lm = 0.0;
    for (EdgeId f : g.var_edges(i)) {
      if (!alive(g.edge_clause(f))) continue;
      acc.add(state.u[f]);
      lp += log_prob_at(state.u[f], 1);
      lm += log_prob_at(state.u[f], -1);
    }
    const double log_zi = log_add_exp(lp, lm);
    if (log_zi == -kInf || std::isnan(log_zi)) return -kInf;
    total += log_zi;
    for (EdgeId f : g.var_edges(i)) {
      if (!alive(g.edge_clause(f))) continue;
      const double h = acc.value_without(state.u[f]);
      if (std::isnan(h)) return -kInf;
      cavity[f] = h;
      const double log_zia = log_add_exp(log_prob_at(h, 1) + log_prob_at(state.u[f], 1),
                                         log_prob_at(h, -1) + log_prob_at(state.u[f], -1));
      if (log_zia == -kInf) return -kInf;
      total -= log_zia;
    }
  }
  for (std::size_t a = 0; a < g.n_clauses(); ++a) {
    if (!alive(a)) continue;
    double log_delta = 0.0;
    for (EdgeId e = g.clause_begin(a); e < g.clause_end(a); ++e)
      if (free(g.edge_var(e))) log_delta += log_prob_at(cavity[e], g.edge_j(e));
    const double za = 1.0 - penalty * std::exp(log_delta);
    if (za <= 0.0) return -kInf;
    total += std::log(za);
  }
  return n_free == 0 ? 0.0 : total / static_cast<double>(n_free);
}

inline void write_trace_csv(const BpResult& r, std::ostream& out) {
  out << "sweep,max_delta\n";
  for (std::size_t s = 0; s < r.trace.size(); ++s) out << s + 1 << ',' << r.trace[s] << '\n';
}

/// Zero-temperature warning propagation at beta = inf: biases are
/// integer warnings, u = -J_i when every other literal of the clause is pushed
/// towards its falsifying spin, 0 otherwise.
namespace wp {

struct Incoming {
  Spin j;
  int h;
};

inline int clause_warning(Spin j_target, const std::vector<Incoming>& others) {
  for (const auto& o : others)
    if (o.j * o.h <= 0) return 0;
  return -j_target;
}

inline int var_field(const std::vector<int>& biases) {
  return std::accumulate(biases.begin(), biases.end(), 0);
}

}  // namespace wp

}  // namespace ksat

#endif
