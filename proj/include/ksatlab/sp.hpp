#ifndef KSATLAB_SP_HPP
#define KSATLAB_SP_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ksatlab/decimate.hpp"
#include "ksatlab/factor_graph.hpp"
#include "ksatlab/propagate.hpp"

// Zero-temperature survey propagation at Parisi parameter m. Cavity biases are
// hard warnings u in {-1, 0, +1} (spin frame); a clause can only warn a variable
// towards the value satisfying its literal, u = -J. Fields are integer sums of
// warnings. The reweighting factors are the zero-temperature limits of the shifts
//   z_i    = 2^max(n, 1) for n warnings of one sign, 0 if both signs occur,
//   z_a'   = 1 when the clause warns, 2 otherwise,
// and a zero factor stays zero at m = 0.

namespace ksat {

/// Distribution of a hard cavity bias over {-1, 0, +1}.
struct USurvey {
  double minus = 0.0;
  double zero = 1.0;
  double plus = 0.0;

  double at(int u) const { return u < 0 ? minus : (u > 0 ? plus : zero); }
  double sum() const { return minus + zero + plus; }

  /// Survey on a clause edge: warning weight eta on the satisfying direction -j.
  static USurvey warning(Spin j, double eta) {
    USurvey q;
    q.zero = 1.0 - eta;
    (j > 0 ? q.minus : q.plus) = eta;
    return q;
  }
};

/// Distribution of an integer field over [-d, d].
struct HSurvey {
  int d = 0;
  std::vector<double> w{1.0};

  static HSurvey delta(int h, int d) {
    HSurvey p;
    p.d = d;
    p.w.assign(2 * d + 1, 0.0);
    p.w[h + d] = 1.0;
    return p;
  }
  double at(int h) const { return h < -d || h > d ? 0.0 : w[h + d]; }
  double positive() const {
    double s = 0.0;
    for (int h = 1; h <= d; ++h) s += w[h + d];
    return s;
  }
  double negative() const {
    double s = 0.0;
    for (int h = 1; h <= d; ++h) s += w[d - h];
    return s;
  }
  double sum() const {
    double s = 0.0;
    for (double x : w) s += x;
    return s;
  }
};

struct BiasTriple {
  double w_plus = 0.0;
  double w_minus = 0.0;
  double w_zero = 1.0;
};

inline BiasTriple biases(const HSurvey& p) {
  BiasTriple b{p.positive(), p.negative(), p.at(0)};
  return b;
}

/// m-th power with 0^m = 0 for every m, including m = 0.
inline double pow_m(double z, double m) {
  if (z <= 0.0) return 0.0;
  return m == 0.0 ? 1.0 : std::pow(z, m);
}

/// Variable-side convolution of incoming bias surveys, atoms reweighted by z_i^m.
/// nullopt when every configuration is contradictory.
inline std::optional<HSurvey> sp_update_var(std::span<const USurvey> in, double m) {
  const int d = static_cast<int>(in.size());
  // dp over the running sum; a sum of one sign can only have seen warnings of that
  // sign, because mixed configurations are dropped as soon as they appear
  std::vector<double> cur(2 * d + 1, 0.0), next(2 * d + 1);
  cur[d] = 1.0;
  int lo = 0, hi = 0;
  for (const auto& q : in) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int h = lo; h <= hi; ++h) {
      const double x = cur[h + d];
      if (x == 0.0) continue;
      next[h + d] += x * q.zero;
      if (h >= 0) next[h + 1 + d] += x * q.plus;
      if (h <= 0) next[h - 1 + d] += x * q.minus;
    }
    std::swap(cur, next);
    lo = std::max(lo - 1, -d);
    hi = std::min(hi + 1, d);
  }
  HSurvey out;
  out.d = d;
  out.w.assign(2 * d + 1, 0.0);
  double z = 0.0;
  for (int h = -d; h <= d; ++h) {
    const double x = cur[h + d] * pow_m(std::ldexp(1.0, std::max(std::abs(h), 1)), m);
    out.w[h + d] = x;
    z += x;
  }
  if (z <= 0.0) return std::nullopt;
  for (auto& x : out.w) x /= z;
  return out;
}

/// Clause-side update: the clause warns the target (value -j_target) iff every
/// other variable's field is strictly aligned with its falsifying spin. Atoms are
/// reweighted by z_a'^m.
inline USurvey sp_update_clause(Spin j_target, std::span<const HSurvey> in,
                                std::span<const Spin> j_in, double m) {
  double w = 1.0;
  for (std::size_t r = 0; r < in.size(); ++r) w *= j_in[r] > 0 ? in[r].positive() : in[r].negative();
  const double a = w;                                   // z_a' = 1
  const double b = (1.0 - w) * pow_m(2.0, m);           // z_a' = 2
  return USurvey::warning(j_target, a + b > 0.0 ? a / (a + b) : 0.0);
}

struct SpConfig {
  std::size_t max_sweeps = 1000;
  double tol = 1e-4;
  double damping = 0.0;
  std::uint64_t seed = 0;
};

/// Warning probabilities eta[e] on every clause edge a->i; the u-survey of the edge
/// is USurvey::warning(J, eta).
struct SpState {
  std::vector<double> eta;
  double m = 0.0;

  USurvey survey(const FactorGraph& g, EdgeId e) const {
    return USurvey::warning(g.edge_j(e), eta[e]);
  }
};

namespace detail {

// Field weights from warnings split by direction, in closed form. With x = 2^m,
//   W+ = prod_minus(1-eta) * [prod_plus(1-eta+eta x) - prod_plus(1-eta)]
//   W- symmetric, W0 = x * prod_all(1-eta);
// the bracket is the generating function of "at least one warning" weighted by x^n.
struct FieldWeights {
  double plus = 0.0, minus = 0.0, zero = 0.0;
  double total() const { return plus + minus + zero; }
};

struct WarnProducts {
  double plus_lo = 1.0, plus_hi = 1.0, minus_lo = 1.0, minus_hi = 1.0;

  void add(Spin dir, double eta, double x) {
    if (dir > 0) {
      plus_lo *= 1.0 - eta;
      plus_hi *= 1.0 - eta + eta * x;
    } else {
      minus_lo *= 1.0 - eta;
      minus_hi *= 1.0 - eta + eta * x;
    }
  }
  FieldWeights weights(double x) const {
    return {minus_lo * (plus_hi - plus_lo), plus_lo * (minus_hi - minus_lo), x * plus_lo * minus_lo};
  }
};

}  // namespace detail

/// Graph form of the variable update for edge e (i->a): incoming surveys from the
/// alive clauses of i other than a.
inline std::optional<HSurvey> sp_update_var(const FactorGraph& g, const SpState& st, EdgeId e,
                                            const GraphMask* mask = nullptr) {
  std::vector<USurvey> in;
  for (EdgeId f : g.var_edges(g.edge_var(e)))
    if (f != e && (!mask || mask->alive(g.edge_clause(f)))) in.push_back(st.survey(g, f));
  return sp_update_var(in, st.m);
}

/// Graph form of the clause update for edge e (a->i), with the cavity h-surveys
/// of the other free variables of a computed from the current u-surveys.
/// nullopt if one of them is contradictory.
inline std::optional<USurvey> sp_update_clause(const FactorGraph& g, const SpState& st, EdgeId e,
                                               const GraphMask* mask = nullptr) {
  const auto a = g.edge_clause(e);
  std::vector<HSurvey> in;
  std::vector<Spin> js;
  for (EdgeId f = g.clause_begin(a); f < g.clause_end(a); ++f) {
    if (f == e || (mask && !mask->var_free(g.edge_var(f)))) continue;
    auto p = sp_update_var(g, st, f, mask);
    if (!p) return std::nullopt;
    in.push_back(std::move(*p));
    js.push_back(g.edge_j(f));
  }
  return sp_update_clause(g.edge_j(e), in, js, st.m);
}

/// Survey of the full local field of variable i.
inline std::optional<HSurvey> local_field_survey(const FactorGraph& g, const SpState& st,
                                                 std::size_t i, const GraphMask* mask = nullptr) {
  std::vector<USurvey> in;
  for (EdgeId f : g.var_edges(i))
    if (!mask || mask->alive(g.edge_clause(f))) in.push_back(st.survey(g, f));
  return sp_update_var(in, st.m);
}

struct SpResult {
  SpState state;
  bool converged = false;
  bool contradiction = false;
  std::size_t sweeps = 0;
};

/// Survey propagation sweeps with warm-startable state.
class SpRunner {
 public:
  SpRunner(const FactorGraph& g, const SpConfig& cfg, double m)
      : g_(&g), cfg_(cfg), rng_(make_rng(cfg.seed, 0x5B)) {
    if (!(m >= 0.0 && m <= 1.0)) throw Error(ErrorKind::InvalidParameters, "m must lie in [0, 1]");
    st_.m = m;
    st_.eta.assign(g.n_edges(), 0.0);
  }

  SpState& state() { return st_; }
  const SpState& state() const { return st_; }
  void set_m(double m) {
    if (!(m >= 0.0 && m <= 1.0)) throw Error(ErrorKind::InvalidParameters, "m must lie in [0, 1]");
    st_.m = m;
  }

  void randomize() {
    for (auto& x : st_.eta) x = uniform01(rng_);
  }

  /// Random-sequential sweeps over clauses; converged when the largest change of a
  /// warning probability in a sweep is below tol.
  SpResult run(const GraphMask& mask) {
    SpResult res;
    std::vector<std::uint32_t> order;
    for (std::size_t a = 0; a < g_->n_clauses(); ++a)
      if (mask.alive(a)) order.push_back(static_cast<std::uint32_t>(a));
    const double x = std::pow(2.0, st_.m);
    for (std::size_t sweep = 0; sweep < cfg_.max_sweeps; ++sweep) {
      std::shuffle(order.begin(), order.end(), rng_);
      double max_delta = 0.0;
      for (auto a : order) {
        const auto d = update_clause_node(a, mask, x);
        if (!d) {
          res.contradiction = true;
          res.sweeps = sweep + 1;
          res.state = st_;
          return res;
        }
        max_delta = std::max(max_delta, *d);
      }
      res.sweeps = sweep + 1;
      if (max_delta < cfg_.tol) {
        res.converged = true;
        break;
      }
    }
    res.state = st_;
    return res;
  }

  /// Probability that the cavity field of edge f (j->a) points to J_f strictly.
  std::optional<double> aligned_prob(EdgeId f, const GraphMask& mask, double x) const {
    const auto j = g_->edge_var(f);
    detail::WarnProducts wp;
    for (EdgeId b : g_->var_edges(j)) {
      if (b == f || !mask.alive(g_->edge_clause(b))) continue;
      wp.add(static_cast<Spin>(-g_->edge_j(b)), st_.eta[b], x);
    }
    const auto w = wp.weights(x);
    const double t = w.total();
    if (t <= 0.0) return std::nullopt;
    return (g_->edge_j(f) > 0 ? w.plus : w.minus) / t;
  }

 private:
  std::optional<double> update_clause_node(std::size_t a, const GraphMask& mask, double x) {
    EdgeId es[64];
    double p[64];
    std::size_t n = 0, n_zero = 0;
    double prod = 1.0;
    for (EdgeId e = g_->clause_begin(a); e < g_->clause_end(a) && n < 64; ++e) {
      if (!mask.var_free(g_->edge_var(e))) continue;
      const auto pa = aligned_prob(e, mask, x);
      if (!pa) return std::nullopt;
      es[n] = e;
      p[n] = *pa;
      if (p[n] == 0.0) ++n_zero;
      else prod *= p[n];
      ++n;
    }
    double max_delta = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double w;
      if (p[r] == 0.0) w = n_zero > 1 ? 0.0 : prod;
      else w = n_zero > 0 ? 0.0 : prod / p[r];
      const double den = w + (1.0 - w) * x;
      double eta = den > 0.0 ? w / den : 0.0;
      const double old = st_.eta[es[r]];
      if (cfg_.damping > 0.0) eta = (1.0 - cfg_.damping) * eta + cfg_.damping * old;
      max_delta = std::max(max_delta, std::fabs(eta - old));
      st_.eta[es[r]] = eta;
    }
    return max_delta;
  }

  const FactorGraph* g_;
  SpConfig cfg_;
  Rng rng_;
  SpState st_;
};

inline SpResult sp_run(const FactorGraph& g, double m, const SpConfig& cfg,
                       const GraphMask* mask = nullptr) {
  SpRunner r(g, cfg, m);
  r.randomize();
  return r.run(mask ? *mask : GraphMask::all_free(g));
}

/// Bias triple of variable i from the closed-form field weights.
inline std::optional<BiasTriple> variable_bias(const FactorGraph& g, const SpState& st,
                                               std::size_t i, const GraphMask* mask = nullptr) {
  const double x = std::pow(2.0, st.m);
  detail::WarnProducts wp;
  for (EdgeId b : g.var_edges(i)) {
    if (mask && !mask->alive(g.edge_clause(b))) continue;
    wp.add(static_cast<Spin>(-g.edge_j(b)), st.eta[b], x);
  }
  const auto w = wp.weights(x);
  const double t = w.total();
  if (t <= 0.0) return std::nullopt;
  return BiasTriple{w.plus / t, w.minus / t, w.zero / t};
}

inline void write_biases_csv(const FactorGraph& g, const SpState& st, std::ostream& out,
                             const GraphMask* mask = nullptr) {
  out << "var,w_plus,w_minus,w_zero\n";
  for (std::size_t i = 0; i < g.n_vars(); ++i) {
    if (mask && !mask->var_free(i)) continue;
    const auto b = variable_bias(g, st, i, mask);
    if (!b) {
      out << i << ",nan,nan,nan\n";
      continue;
    }
    out << i << ',' << b->w_plus << ',' << b->w_minus << ',' << b->w_zero << '\n';
  }
}

/// Replicated free entropy per free variable from the surveys:
///   (sum_i log Z_i + sum_a log Z_a - sum_(ia) log Z_ia) / N
/// with Z_i, Z_a, Z_ia the m-th moments of the zero-temperature shifts
///   z_i  = 2^max(n,1) or 0,
///   z_a  = 1 - prod_j p_j with p_j = 1, 1/2, 0 for a field aligned with the
///          falsifying spin, zero, anti-aligned,
///   z_ia = 1 + sign(h) sign(u).
/// -inf signals a vanishing shift.
inline double phi_m(const FactorGraph& g, const SpState& st, const GraphMask* mask = nullptr) {
  const double m = st.m;
  const double x = std::pow(2.0, m);
  auto free = [&](std::size_t i) { return !mask || mask->var_free(i); };
  auto alive = [&](std::size_t a) { return !mask || mask->alive(a); };
  double total = 0.0;
  std::size_t n_free = 0;
  // cavity field category probabilities per edge: aligned with J, zero, anti-aligned
  std::vector<double> pf(g.n_edges(), 0.0), pz(g.n_edges(), 0.0), pa(g.n_edges(), 0.0);
  for (std::size_t i = 0; i < g.n_vars(); ++i) {
    if (!free(i)) continue;
    ++n_free;
    const auto lb = variable_bias(g, st, i, mask);
    if (!lb) return -kInf;
    {
      detail::WarnProducts wp;
      for (EdgeId b : g.var_edges(i))
        if (alive(g.edge_clause(b))) wp.add(static_cast<Spin>(-g.edge_j(b)), st.eta[b], x);
      const double zi = wp.weights(x).total();
      if (zi <= 0.0) return -kInf;
      total += std::log(zi);
    }
    for (EdgeId f : g.var_edges(i)) {
      if (!alive(g.edge_clause(f))) continue;
      detail::WarnProducts wp;
      for (EdgeId b : g.var_edges(i))
        if (b != f && alive(g.edge_clause(b))) wp.add(static_cast<Spin>(-g.edge_j(b)), st.eta[b], x);
      const auto w = wp.weights(x);
      const double t = w.total();
      if (t <= 0.0) return -kInf;
      const Spin j = g.edge_j(f);
      pf[f] = (j > 0 ? w.plus : w.minus) / t;
      pa[f] = (j > 0 ? w.minus : w.plus) / t;
      pz[f] = w.zero / t;
      // the clause warns towards -J; z_ia = 2 if the field agrees, 0 if it opposes
      const double eta = st.eta[f];
      const double zia = (1.0 - eta) + eta * (pa[f] * pow_m(2.0, m) + pz[f] + pf[f] * pow_m(0.0, m));
      if (zia <= 0.0) return -kInf;
      total -= std::log(zia);
    }
  }
  std::vector<double> c;
  for (std::size_t a = 0; a < g.n_clauses(); ++a) {
    if (!alive(a)) continue;
    // c[n]: probability of exactly n zero fields and all others aligned
    c.assign(1, 1.0);
    double no_anti = 1.0;
    for (EdgeId e = g.clause_begin(a); e < g.clause_end(a); ++e) {
      if (!free(g.edge_var(e))) continue;
      no_anti *= pf[e] + pz[e];
      c.push_back(0.0);
      for (std::size_t n = c.size() - 1; n-- > 0;) {
        c[n + 1] += c[n] * pz[e];
        c[n] *= pf[e];
      }
    }
    double za = 1.0 - no_anti;
    for (std::size_t n = 1; n < c.size(); ++n) za += c[n] * pow_m(1.0 - std::ldexp(1.0, -static_cast<int>(n)), m);
    if (za <= 0.0) return -kInf;
    total += std::log(za);
  }
  return n_free == 0 ? 0.0 : total / static_cast<double>(n_free);
}

/// Total warning mass; zero exactly at the paramagnetic fixed point.
inline double warning_mass(const SpState& st) {
  double s = 0.0;
  for (double e : st.eta) s += e;
  return s;
}

struct MScanRow {
  double m = 0.0;
  double phi = 0.0;
  double phi_over_m = 0.0;
  bool converged = false;
  bool trivial = false;
};

struct MScanResult {
  std::vector<MScanRow> rows;
  std::optional<double> m_star;  // minimiser of phi/m over converged rows with m > 0
};

/// Runs SP on a descending m grid, each run warm-started from the previous surveys.
inline MScanResult m_scan(const FactorGraph& g, const std::vector<double>& m_grid,
                          const SpConfig& cfg, bool warm_start = true) {
  for (std::size_t r = 1; r < m_grid.size(); ++r)
    if (m_grid[r] > m_grid[r - 1])
      throw Error(ErrorKind::InvalidParameters, "m grid must be descending");
  MScanResult out;
  const auto mask = GraphMask::all_free(g);
  std::optional<SpRunner> runner;
  double best = kInf;
  for (std::size_t r = 0; r < m_grid.size(); ++r) {
    if (!runner || !warm_start) {
      SpConfig c = cfg;
      c.seed = mix_seed(cfg.seed, r);
      runner.emplace(g, c, m_grid[r]);
      runner->randomize();
    }
    runner->set_m(m_grid[r]);
    const auto res = runner->run(mask);
    MScanRow row;
    row.m = m_grid[r];
    row.converged = res.converged;
    row.phi = phi_m(g, runner->state());
    row.phi_over_m = row.m > 0 ? row.phi / row.m : kInf;
    row.trivial = warning_mass(runner->state()) < 1e-9 * static_cast<double>(g.n_edges() + 1);
    if (row.converged && row.m > 0 && row.phi_over_m < best) {
      best = row.phi_over_m;
      out.m_star = row.m;
    }
    out.rows.push_back(row);
  }
  return out;
}

inline void write_m_scan_csv(const MScanResult& r, std::ostream& out) {
  out << "m,phi,phi_over_m,converged,trivial\n";
  for (const auto& row : r.rows)
    out << row.m << ',' << row.phi << ',' << row.phi_over_m << ',' << row.converged << ','
        << row.trivial << '\n';
}

// ---------------------------------------------------------------------------
// Survey-inspired decimation

struct SidConfig {
  double m = 0.0;
  SpConfig sp;
  WalksatConfig walksat{.max_flips = 10000000, .noise = 0.5, .seed = 0};
  double fix_fraction = 0.01;  // fraction of free variables fixed per SP run; 0 fixes one
  double paramagnetic_threshold = 1e-3;
  std::uint64_t seed = 0;
};

enum class SidStatus { Solved, NonConvergence, Contradiction, LocalSearchFailed };

inline const char* to_string(SidStatus s) {
  switch (s) {
    case SidStatus::Solved: return "solved";
    case SidStatus::NonConvergence: return "non-convergence";
    case SidStatus::Contradiction: return "contradiction";
    case SidStatus::LocalSearchFailed: return "local-search-failed";
  }
  return "?";
}

struct SidRound {
  std::size_t free_before = 0;
  std::size_t sp_sweeps = 0;
  std::size_t fixed = 0;
  double max_bias = 0.0;
  double phi = 0.0;
};

struct SidResult {
  SidStatus status = SidStatus::Contradiction;
  SpinConfig assignment;
  std::vector<SidRound> rounds;
  std::size_t free_at_handoff = 0;
  std::uint64_t walksat_flips = 0;
};

inline SidResult sid(const CnfInstance& inst, const SidConfig& cfg) {
  SidResult res;
  if (inst.contradiction) return res;
  Rng rng = make_rng(cfg.seed, 0x51D);
  const FactorGraph g(inst);
  GraphMask mask = GraphMask::all_free(g);
  Propagator prop(inst);
  SpConfig spc = cfg.sp;
  spc.seed = mix_seed(cfg.seed, 0x5F);
  SpRunner sp(g, spc, cfg.m);
  sp.randomize();

  std::size_t absorbed = 0;
  auto absorb = [&]() {
    for (; absorbed < prop.trail_size(); ++absorbed) {
      const auto v = prop.trail()[absorbed];
      mask.value[v] = prop.value(v);
      for (EdgeId f : g.var_edges(v))
        if (prop.clause_satisfied(g.edge_clause(f))) mask.clause_alive[g.edge_clause(f)] = 0;
    }
  };
  if (!prop.propagate()) return res;
  absorb();

  auto finish_with_local_search = [&]() {
    PartialAssignment pa(inst.n_vars);
    for (std::size_t v = 0; v < inst.n_vars; ++v)
      if (prop.value(v) != 0) pa.fix(v, prop.value(v));
    const auto rest = simplify(inst, pa);
    res.free_at_handoff = inst.n_vars - prop.trail_size();
    WalksatConfig wc = cfg.walksat;
    wc.seed = mix_seed(cfg.seed, 0x3B);
    const auto ws = walksat(rest, wc);
    res.walksat_flips = ws.flips;
    SpinConfig s = ws.assignment;
    for (std::size_t v = 0; v < inst.n_vars; ++v)
      if (prop.value(v) != 0) s[v] = prop.value(v);
    if (!ws.solved || energy(inst, s) != 0) {
      res.status = SidStatus::LocalSearchFailed;
      return;
    }
    res.assignment = std::move(s);
    res.status = SidStatus::Solved;
  };

  std::vector<std::pair<double, std::uint32_t>> cand;
  for (;;) {
    if (prop.all_satisfied()) {
      finish_with_local_search();  // trivially satisfied; free variables arbitrary
      return res;
    }
    SidRound round;
    round.free_before = inst.n_vars - prop.trail_size();
    const auto r = sp.run(mask);
    round.sp_sweeps = r.sweeps;
    if (r.contradiction) {
      res.status = SidStatus::Contradiction;
      res.rounds.push_back(round);
      return res;
    }
    if (!r.converged) {
      res.status = SidStatus::NonConvergence;
      res.rounds.push_back(round);
      return res;
    }
    round.phi = phi_m(g, sp.state(), &mask);
    cand.clear();
    bool paramagnetic = true;
    for (std::uint32_t i = 0; i < inst.n_vars; ++i) {
      if (!mask.var_free(i)) continue;
      const auto b = variable_bias(g, sp.state(), i, &mask);
      if (!b) {
        res.status = SidStatus::Contradiction;
        res.rounds.push_back(round);
        return res;
      }
      if (b->w_zero < 1.0 - cfg.paramagnetic_threshold) paramagnetic = false;
      cand.emplace_back(std::fabs(b->w_plus - b->w_minus), i);
    }
    if (paramagnetic) {
      res.rounds.push_back(round);
      finish_with_local_search();
      return res;
    }
    const std::size_t batch = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(cfg.fix_fraction * static_cast<double>(cand.size()))));
    // random keys break ties uniformly among equally biased variables
    std::vector<std::uint64_t> key(cand.size());
    std::vector<std::size_t> idx(cand.size());
    for (std::size_t t = 0; t < cand.size(); ++t) {
      key[t] = rng();
      idx[t] = t;
    }
    const std::size_t take = std::min(batch, cand.size());
    std::partial_sort(idx.begin(), idx.begin() + take, idx.end(), [&](std::size_t x, std::size_t y) {
      if (cand[x].first != cand[y].first) return cand[x].first > cand[y].first;
      return key[x] < key[y];
    });
    round.max_bias = cand[idx[0]].first;
    for (std::size_t t = 0; t < take; ++t) {
      const auto i = cand[idx[t]].second;
      if (prop.value(i) != 0) continue;  // implied by an earlier fix of this batch
      const auto b = variable_bias(g, sp.state(), i, &mask);
      const Spin s = b->w_plus >= b->w_minus ? 1 : -1;
      ++round.fixed;
      if (!prop.assign(i, s)) {
        res.status = SidStatus::Contradiction;
        res.rounds.push_back(round);
        return res;
      }
    }
    absorb();
    res.rounds.push_back(round);
  }
}

}  // namespace ksat

#endif
