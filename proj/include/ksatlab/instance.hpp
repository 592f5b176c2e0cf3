#ifndef KSATLAB_INSTANCE_HPP
#define KSATLAB_INSTANCE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ksatlab/common.hpp"

namespace ksat {

/// Ising spin, +1 (true) or -1 (false). 0 marks "unassigned" where a partial map is needed.
using Spin = std::int8_t;

/// A literal stores the spin that falsifies it: j_sign = +1 for a negated occurrence,
/// j_sign = -1 for a positive one.
struct Literal {
  std::uint32_t var = 0;
  Spin j_sign = -1;

  bool satisfied_by(Spin s) const { return s != j_sign; }
  bool operator==(const Literal&) const = default;
};

struct Clause {
  std::vector<Literal> literals;

  std::size_t size() const { return literals.size(); }
  bool operator==(const Clause&) const = default;
};

struct CnfInstance {
  std::size_t n_vars = 0;
  std::size_t k = 0;  // nominal width; simplified instances may hold shorter clauses
  std::vector<Clause> clauses;
  bool contradiction = false;  // set by simplify() when a clause was emptied

  std::size_t m() const { return clauses.size(); }
  double alpha() const { return n_vars == 0 ? 0.0 : static_cast<double>(clauses.size()) / n_vars; }
  bool operator==(const CnfInstance&) const = default;
};

using SpinConfig = std::vector<Spin>;

/// Partial map var -> spin, remembering the order in which variables were fixed.
class PartialAssignment {
 public:
  PartialAssignment() = default;
  explicit PartialAssignment(std::size_t n) : value_(n, 0) {}

  std::size_t n_vars() const { return value_.size(); }
  Spin value(std::size_t var) const { return value_.at(var); }
  bool is_fixed(std::size_t var) const { return value_.at(var) != 0; }
  const std::vector<std::uint32_t>& fixed_order() const { return order_; }
  std::size_t size() const { return order_.size(); }

  void fix(std::size_t var, Spin s) {
    if (var >= value_.size()) throw Error(ErrorKind::InvalidParameters, "variable out of range");
    if (s != 1 && s != -1) throw Error(ErrorKind::InvalidParameters, "spin must be +1 or -1");
    if (value_[var] != 0) throw Error(ErrorKind::InvalidParameters, "variable fixed twice");
    value_[var] = s;
    order_.push_back(static_cast<std::uint32_t>(var));
  }

  const std::vector<Spin>& values() const { return value_; }

 private:
  std::vector<Spin> value_;
  std::vector<std::uint32_t> order_;
};

/// Clause count for density alpha: m = ceil(alpha * n), with a small slack so that
/// alpha = m/n read back from a decimal string round-trips.
inline std::size_t clauses_for_density(double alpha, std::size_t n) {
  if (!(alpha >= 0.0)) throw Error(ErrorKind::InvalidParameters, "alpha must be >= 0");
  return static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n) - 1e-9));
}

struct GenOptions {
  bool poisson_m = false;  // draw M ~ Poisson(m) instead of using m exactly
};

namespace detail {

inline void check_gen(std::size_t n, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::InvalidParameters, "k must be positive");
  if (k > n) throw Error(ErrorKind::InvalidParameters, "k > n");
}

inline Clause random_clause(std::size_t n, std::size_t k, Rng& rng) {
  Clause c;
  c.literals.reserve(k);
  while (c.literals.size() < k) {
    const auto v = static_cast<std::uint32_t>(uniform_index(rng, n));
    const bool dup = std::any_of(c.literals.begin(), c.literals.end(),
                                 [v](const Literal& l) { return l.var == v; });
    if (!dup) c.literals.push_back({v, static_cast<Spin>(coin(rng) ? 1 : -1)});
  }
  std::sort(c.literals.begin(), c.literals.end(),
            [](const Literal& a, const Literal& b) { return a.var < b.var; });
  return c;
}

inline std::size_t draw_m(std::size_t m, const GenOptions& opt, Rng& rng) {
  if (!opt.poisson_m || m == 0) return m;
  std::poisson_distribution<std::size_t> pd(static_cast<double>(m));
  return pd(rng);
}

}  // namespace detail

/// W_a(sigma) = prod_r (1 + J_a^r sigma_r) / 2: 1 iff every literal is false.
inline int clause_violated(const Clause& cl, const SpinConfig& s) {
  for (const auto& l : cl.literals)
    if (s[l.var] != l.j_sign) return 0;
  return 1;
}

inline std::size_t energy(const CnfInstance& inst, const SpinConfig& s) {
  if (s.size() != inst.n_vars) throw Error(ErrorKind::InvalidParameters, "config length mismatch");
  std::size_t e = 0;
  for (const auto& c : inst.clauses) e += static_cast<std::size_t>(clause_violated(c, s));
  return e;
}

/// Uniform model: every clause has k distinct variables chosen uniformly and
/// independent uniform signs. Clauses are drawn with replacement.
inline CnfInstance gen_uniform(std::size_t n, std::size_t m, std::size_t k, std::uint64_t seed,
                               const GenOptions& opt = {}) {
  detail::check_gen(n, k);
  Rng rng = make_rng(seed, 0x11);
  CnfInstance inst;
  inst.n_vars = n;
  inst.k = k;
  const std::size_t mm = detail::draw_m(m, opt, rng);
  inst.clauses.reserve(mm);
  for (std::size_t a = 0; a < mm; ++a) inst.clauses.push_back(detail::random_clause(n, k, rng));
  return inst;
}

struct PlantedInstance {
  CnfInstance instance;
  SpinConfig planted;
};

/// Planted model: sigma uniform, then each clause uniform among the k-clauses
/// satisfied by sigma (rejection sampling).
inline PlantedInstance gen_planted(std::size_t n, std::size_t m, std::size_t k, std::uint64_t seed,
                                   const GenOptions& opt = {}) {
  detail::check_gen(n, k);
  Rng rng = make_rng(seed, 0x22);
  PlantedInstance out;
  out.planted.resize(n);
  for (auto& s : out.planted) s = coin(rng) ? 1 : -1;
  out.instance.n_vars = n;
  out.instance.k = k;
  const std::size_t mm = detail::draw_m(m, opt, rng);
  out.instance.clauses.reserve(mm);
  while (out.instance.clauses.size() < mm) {
    Clause c = detail::random_clause(n, k, rng);
    if (!clause_violated(c, out.planted)) out.instance.clauses.push_back(std::move(c));
  }
  return out;
}

inline constexpr std::size_t kDefaultExhaustiveLimit = 26;

/// Exact number of satisfying assignments by enumerating all 2^N spin configurations.
inline std::uint64_t count_solutions(const CnfInstance& inst,
                                     std::size_t limit = kDefaultExhaustiveLimit) {
  if (inst.n_vars > limit || inst.n_vars > 62)
    throw Error(ErrorKind::OracleScaleExceeded,
                "count_solutions: " + std::to_string(inst.n_vars) + " variables over limit " +
                    std::to_string(limit));
  if (inst.contradiction) return 0;
  // bit i of x is 1 <=> sigma_i = +1; a clause is violated iff (x & mask) == pattern
  std::vector<std::pair<std::uint64_t, std::uint64_t>> cl;
  cl.reserve(inst.clauses.size());
  for (const auto& c : inst.clauses) {
    std::uint64_t mask = 0, pat = 0;
    for (const auto& l : c.literals) {
      mask |= 1ULL << l.var;
      if (l.j_sign > 0) pat |= 1ULL << l.var;
    }
    cl.emplace_back(mask, pat);
  }
  const std::uint64_t total = 1ULL << inst.n_vars;
  std::uint64_t count = 0;
  for (std::uint64_t x = 0; x < total; ++x) {
    bool ok = true;
    for (const auto& [mask, pat] : cl)
      if ((x & mask) == pat) {
        ok = false;
        break;
      }
    count += ok;
  }
  return count;
}

/// Removes clauses satisfied by pa and drops falsified literals. Indexing is kept.
/// An emptied clause sets the contradiction marker (and is dropped).
inline CnfInstance simplify(const CnfInstance& inst, const PartialAssignment& pa) {
  CnfInstance out;
  out.n_vars = inst.n_vars;
  out.k = inst.k;
  out.contradiction = inst.contradiction;
  for (const auto& c : inst.clauses) {
    Clause nc;
    bool sat = false;
    for (const auto& l : c.literals) {
      const Spin v = l.var < pa.n_vars() ? pa.value(l.var) : Spin{0};
      if (v == 0) {
        nc.literals.push_back(l);
      } else if (l.satisfied_by(v)) {
        sat = true;
        break;
      }
    }
    if (sat) continue;
    if (nc.literals.empty()) {
      out.contradiction = true;
      continue;
    }
    out.clauses.push_back(std::move(nc));
  }
  return out;
}

}  // namespace ksat

#endif
