#ifndef KSATLAB_CAVITY_HPP
#define KSATLAB_CAVITY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "ksatlab/bp.hpp"
#include "ksatlab/common.hpp"

// Population dynamics for the random K-SAT ensemble. Variable degrees are
// Poisson(K alpha), and so are excess degrees, so cavity and full fields share a
// distribution. Free entropies are
//   E log Z_i + alpha E log Z_a - K alpha E log Z_ia.

namespace ksat {

struct EnsembleParams {
  std::size_t k = 3;
  double alpha = 0.0;
  std::size_t pool = 10000;
  std::size_t sweeps = 200;
  std::uint64_t seed = 0;
  Beta beta = Beta::infinity();
  double dm = 0.02;          // finite-difference step for Phi'(m)
  std::size_t samples = 0;   // factor samples per measuring sweep; 0 means pool
};

inline void validate(const EnsembleParams& p) {
  if (!(p.alpha >= 0.0)) throw Error(ErrorKind::InvalidParameters, "alpha must be >= 0");
  if (p.k < 2 || p.k > 16) throw Error(ErrorKind::InvalidParameters, "k must lie in [2, 16]");
  if (p.pool < 1000) throw Error(ErrorKind::InvalidParameters, "pool must be >= 1000");
  if (p.sweeps < 2) throw Error(ErrorKind::InvalidParameters, "sweeps must be >= 2");
  if (!(p.dm > 0.0 && p.dm < 0.5)) throw Error(ErrorKind::InvalidParameters, "dm must lie in (0, 0.5)");
}

namespace detail {

// Running mean and standard error.
struct Mean {
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  void add(double x) {
    sum += x;
    sum2 += x * x;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double stderr_() const {
    if (n < 2) return 0.0;
    const double mu = mean();
    const double var = std::max(0.0, sum2 / static_cast<double>(n) - mu * mu);
    return std::sqrt(var / static_cast<double>(n - 1));
  }
};

inline Spin random_spin(Rng& rng) { return coin(rng) ? 1 : -1; }

inline int poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<int> d(mean);
  return d(rng);
}

// Probability that a variable with field h sits on spin j.
inline double spin_prob(double h, Spin j) {
  const double x = 2.0 * j * h;
  if (x == kInf) return 1.0;
  if (x == -kInf) return 0.0;
  return 1.0 / (1.0 + std::exp(-x));
}

// Bias of a clause on a literal with sign j_target, from the probability delta
// that all other literals are false and the penalty c = 1 - exp(-beta).
inline double clause_bias(Spin j_target, double delta, double c) {
  return j_target * 0.5 * std::log1p(-std::min(c * delta, 1.0));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Replica symmetric

struct RsPopulation {
  std::vector<double> h;
};

struct RsResult {
  double omega = 0.0;
  double omega_stderr = 0.0;
  double q_rs = 0.0;
  double mean_tanh = 0.0;
  RsPopulation pool;
};

namespace detail {

// One clause seen from a literal with sign jt: incoming fields are drawn from the
// pool with fresh signs. Returns delta = prod P(other literal false).
inline double rs_clause_delta(const std::vector<double>& pool, std::size_t k, Rng& rng) {
  double delta = 1.0;
  for (std::size_t r = 0; r + 1 < k; ++r)
    delta *= spin_prob(pool[uniform_index(rng, pool.size())], random_spin(rng));
  return delta;
}

inline double rs_field(const std::vector<double>& pool, const EnsembleParams& p, double c, Rng& rng) {
  const int d = poisson(rng, static_cast<double>(p.k) * p.alpha);
  double h = 0.0;
  for (int b = 0; b < d; ++b) h += clause_bias(random_spin(rng), rs_clause_delta(pool, p.k, rng), c);
  return h;
}

}  // namespace detail

/// Replica-symmetric population dynamics; at beta = infinity the measure is uniform
/// over solutions and omega is the entropy density.
inline RsResult pd_rs(const EnsembleParams& p) {
  validate(p);
  Rng rng = make_rng(p.seed, 0xA5);
  const double c = p.beta.penalty();
  const double ka = static_cast<double>(p.k) * p.alpha;
  RsResult res;
  auto& pool = res.pool.h;
  pool.assign(p.pool, 0.0);
  for (auto& h : pool) h = 2.0 * uniform01(rng) - 1.0;
  const std::size_t samples = p.samples ? p.samples : p.pool;
  detail::Mean om, q, mt;
  for (std::size_t s = 0; s < p.sweeps; ++s) {
    for (std::size_t t = 0; t < p.pool; ++t) pool[uniform_index(rng, pool.size())] = detail::rs_field(pool, p, c, rng);
    if (2 * s < p.sweeps) continue;
    for (std::size_t t = 0; t < samples; ++t) {
      // variable term
      const int d = detail::poisson(rng, ka);
      double zp = 1.0, zm = 1.0, lz = 0.0;
      for (int b = 0; b < d; ++b) {
        const Spin j = detail::random_spin(rng);
        const double cd = c * detail::rs_clause_delta(pool, p.k, rng);
        // normalized clause message: (1 - [sigma = j] c delta) / (2 - c delta)
        const double norm = 2.0 - cd;
        (j > 0 ? zp : zm) *= (1.0 - cd) / norm;
        (j > 0 ? zm : zp) *= 1.0 / norm;
        if (zp + zm < 1e-200) {
          lz += std::log(zp + zm);
          const double s2 = zp + zm;
          zp /= s2;
          zm /= s2;
        }
      }
      lz += std::log(zp + zm);
      // clause term
      double all_false = 1.0;
      for (std::size_t r = 0; r < p.k; ++r)
        all_false *= detail::spin_prob(pool[uniform_index(rng, pool.size())], detail::random_spin(rng));
      const double la = std::log1p(-c * all_false);
      // edge term: field h_i->a against bias u_a->i on a literal of sign j, averaged
      // over several draws
      constexpr int kEdgeDraws = 16;
      double lia = 0.0;
      for (int r = 0; r < kEdgeDraws; ++r) {
        const Spin j = detail::random_spin(rng);
        const double pi = detail::spin_prob(pool[uniform_index(rng, pool.size())], j);
        const double cd = c * detail::rs_clause_delta(pool, p.k, rng);
        lia += std::log1p(-pi * cd) - std::log(2.0 - cd);
      }
      lia /= kEdgeDraws;
      om.add(lz + p.alpha * la - ka * lia);
      const double th = std::tanh(pool[uniform_index(rng, pool.size())]);
      q.add(th * th);
      mt.add(th);
    }
  }
  res.omega = om.mean();
  res.omega_stderr = om.stderr_();
  res.q_rs = q.mean();
  res.mean_tanh = mt.mean();
  return res;
}

// ---------------------------------------------------------------------------
// 1RSB

enum class OneRsbMethod {
  HardFields,      // warning surveys, any m
  Reconstruction,  // soft fields conditioned on a broadcast value, m = 1 only
};

inline const char* to_string(OneRsbMethod m) {
  return m == OneRsbMethod::HardFields ? "hard-fields" : "reconstruction";
}

/// Warning probabilities eta of the u-surveys; the h-surveys are their
/// reweighted convolutions.
struct SurveyPopulation {
  std::vector<double> eta;
  double m = 0.0;
};

/// RS field with samples of the 1RSB message conditioned on spin +1 and -1.
struct SoftTriple {
  double bar = 0.0;
  double plus = kInf;
  double minus = -kInf;
  double cond(Spin s) const { return s > 0 ? plus : minus; }
};

struct OneRsbResult {
  double phi = 0.0;
  double sigma = 0.0;
  double omega_internal = 0.0;  // Phi'(m), by finite difference for hard fields
  double omega_direct = 0.0;    // Phi'(m) from the reweighted log z expectations
  double q0 = 0.0;
  double q1 = 0.0;
  double phi_stderr = 0.0;
  double sigma_stderr = 0.0;
  double fd_error = 0.0;  // error bound of the finite-difference derivative
  bool trivial = false;
  bool converged = false;
  std::size_t collapsed_updates = 0;
};

namespace detail {

// Weights of a hard cavity field relative to a literal sign: aligned with the
// literal's false value, zero, anti-aligned, from warnings split by direction.
struct HardField {
  double fal = 0.0, zero = 1.0, anti = 0.0;
};

// Incoming warnings towards the false value of the literal (s) and towards its
// true value (t), each Poisson(K alpha / 2).
struct HardDraw {
  std::array<double, 96> s_eta{}, t_eta{};
  int ns = 0, nt = 0;
};

inline void draw_incoming(const std::vector<double>& pool, double half, Rng& rng, HardDraw& d) {
  d.ns = std::min(poisson(rng, half), 96);
  d.nt = std::min(poisson(rng, half), 96);
  for (int r = 0; r < d.ns; ++r) d.s_eta[r] = pool[uniform_index(rng, pool.size())];
  for (int r = 0; r < d.nt; ++r) d.t_eta[r] = pool[uniform_index(rng, pool.size())];
}

inline std::optional<HardField> hard_field(const HardDraw& d, double x) {
  double s_lo = 1.0, s_hi = 1.0, t_lo = 1.0, t_hi = 1.0;
  for (int r = 0; r < d.ns; ++r) {
    s_lo *= 1.0 - d.s_eta[r];
    s_hi *= 1.0 - d.s_eta[r] + d.s_eta[r] * x;
  }
  for (int r = 0; r < d.nt; ++r) {
    t_lo *= 1.0 - d.t_eta[r];
    t_hi *= 1.0 - d.t_eta[r] + d.t_eta[r] * x;
  }
  const double fal = t_lo * (s_hi - s_lo), anti = s_lo * (t_hi - t_lo), zero = x * s_lo * t_lo;
  const double tot = fal + anti + zero;
  if (!(tot > 0.0)) return std::nullopt;
  return HardField{fal / tot, zero / tot, anti / tot};
}

// Distribution of the number of warnings among independent ones.
inline void count_dist(const double* eta, int n, std::vector<double>& out) {
  out.assign(n + 1, 0.0);
  out[0] = 1.0;
  for (int r = 0; r < n; ++r)
    for (int c = r + 1; c >= 0; --c) out[c] = out[c] * (1.0 - eta[r]) + (c ? out[c - 1] * eta[r] : 0.0);
}

// log E z^m and E z^m log z / E z^m for a discrete law of shifts.
struct ShiftMoments {
  double ez = 0.0, ezl = 0.0;
  void add(double prob, double z, double m) {
    if (prob <= 0.0 || z <= 0.0) return;
    const double w = prob * (m == 0.0 ? 1.0 : std::pow(z, m));
    ez += w;
    ezl += w * std::log(z);
  }
  double log_mean() const { return ez > 0.0 ? std::log(ez) : -kInf; }
  double dlog() const { return ez > 0.0 ? ezl / ez : 0.0; }
};

class HardPopulation {
 public:
  HardPopulation(const EnsembleParams& p, double m, std::uint64_t stream)
      : p_(p), m_(m), x_(std::pow(2.0, m)), rng_(make_rng(p.seed, stream)) {}

  void init_random(SurveyPopulation& pop) {
    pop.eta.assign(p_.pool, 0.0);
    for (auto& e : pop.eta) e = uniform01(rng_);
  }

  std::size_t sweep(SurveyPopulation& pop) {
    std::size_t collapsed = 0;
    const double half = static_cast<double>(p_.k) * p_.alpha / 2.0;
    for (std::size_t t = 0; t < pop.eta.size(); ++t) {
      const std::size_t slot = uniform_index(rng_, pop.eta.size());
      double w = 1.0;
      bool ok = true;
      for (std::size_t r = 0; r + 1 < p_.k; ++r) {
        draw_incoming(pop.eta, half, rng_, draw_);
        const auto f = hard_field(draw_, x_);
        if (!f) {
          ok = false;
          continue;
        }
        w *= f->fal;
      }
      if (!ok) {
        ++collapsed;
        continue;
      }
      const double den = w + (1.0 - w) * x_;
      pop.eta[slot] = den > 0.0 ? w / den : 0.0;
    }
    return collapsed;
  }

  struct Sample {
    double phi = 0.0, dphi = 0.0, q0 = 0.0, q1 = 0.0;
    bool ok = true;
  };

  Sample measure(const SurveyPopulation& pop) {
    Sample out;
    const double ka = static_cast<double>(p_.k) * p_.alpha;
    const double half = ka / 2.0;
    // variable: plus and minus warnings, z = 2^max(n,1), 0 when mixed
    draw_incoming(pop.eta, half, rng_, draw_);
    {
      count_dist(draw_.s_eta.data(), draw_.ns, cp_);
      count_dist(draw_.t_eta.data(), draw_.nt, cm_);
      ShiftMoments z;
      z.add(cp_[0] * cm_[0], 2.0, m_);
      for (int n = 1; n <= draw_.ns; ++n) z.add(cp_[n] * cm_[0], std::ldexp(1.0, n), m_);
      for (int n = 1; n <= draw_.nt; ++n) z.add(cm_[n] * cp_[0], std::ldexp(1.0, n), m_);
      if (z.ez <= 0.0) {
        out.ok = false;
        return out;
      }
      out.phi += z.log_mean();
      out.dphi += z.dlog();
      const auto f = hard_field(draw_, x_);
      if (f) {
        out.q0 = (f->fal - f->anti) * (f->fal - f->anti);
        out.q1 = f->fal + f->anti;
      }
    }
    // clause: z = 1 if a field is anti-aligned, else 1 - 2^-zeros (0 without zeros)
    {
      std::array<HardField, 16> fs;
      for (std::size_t r = 0; r < p_.k; ++r) {
        draw_incoming(pop.eta, half, rng_, draw_);
        const auto f = hard_field(draw_, x_);
        if (!f) {
          out.ok = false;
          return out;
        }
        fs[r] = *f;
      }
      // c[n]: no anti-aligned field and n zeros
      std::vector<double>& c = cp_;
      c.assign(p_.k + 1, 0.0);
      c[0] = 1.0;
      double no_anti = 1.0;
      for (std::size_t r = 0; r < p_.k; ++r) {
        no_anti *= fs[r].fal + fs[r].zero;
        for (std::size_t n = r + 1; n-- > 0;) c[n + 1] += c[n] * fs[r].zero, c[n] *= fs[r].fal;
      }
      ShiftMoments z;
      z.add(1.0 - no_anti, 1.0, m_);
      for (std::size_t n = 1; n <= p_.k; ++n) z.add(c[n], 1.0 - std::ldexp(1.0, -static_cast<int>(n)), m_);
      if (z.ez <= 0.0) {
        out.ok = false;
        return out;
      }
      out.phi += p_.alpha * z.log_mean();
      out.dphi += p_.alpha * z.dlog();
    }
    // edge: z = 2 when the field agrees with the warning, 0 when it opposes
    {
      draw_incoming(pop.eta, half, rng_, draw_);
      const auto f = hard_field(draw_, x_);
      if (!f) {
        out.ok = false;
        return out;
      }
      // the warning side is cheap, so average over several pool elements
      constexpr int kEdgeEta = 32;
      double lm = 0.0, dl = 0.0;
      for (int r = 0; r < kEdgeEta; ++r) {
        const double eta = pop.eta[uniform_index(rng_, pop.eta.size())];
        ShiftMoments z;
        z.add(1.0 - eta + eta * f->zero, 1.0, m_);
        z.add(eta * f->anti, 2.0, m_);
        if (z.ez <= 0.0) {
          out.ok = false;
          return out;
        }
        lm += z.log_mean();
        dl += z.dlog();
      }
      struct {
        double lm, dl;
        double log_mean() const { return lm; }
        double dlog() const { return dl; }
      } z{lm / kEdgeEta, dl / kEdgeEta};
      out.phi -= ka * z.log_mean();
      out.dphi -= ka * z.dlog();
    }
    return out;
  }

 private:
  EnsembleParams p_;
  double m_, x_;
  Rng rng_;
  HardDraw draw_;
  std::vector<double> cp_, cm_;
};

struct HardRun {
  double phi = 0.0, phi_err = 0.0, dphi = 0.0, q0 = 0.0, q1 = 0.0;
  double mass = 0.0, drift = 0.0;
  std::size_t collapsed = 0, failed_samples = 0;
};

// Equilibrates pop at m and measures over the second half of the sweeps. The
// random stream depends only on the seed, so runs at nearby m share their draws.
inline HardRun run_hard(const EnsembleParams& p, double m, SurveyPopulation& pop) {
  HardPopulation hp(p, m, 0x1B5);
  pop.m = m;
  if (pop.eta.size() != p.pool) hp.init_random(pop);
  const std::size_t samples = p.samples ? p.samples : p.pool;
  HardRun out;
  Mean phi, dphi, q0, q1, mass_a, mass_b;
  for (std::size_t s = 0; s < p.sweeps; ++s) {
    out.collapsed += hp.sweep(pop);
    if (2 * s < p.sweeps) continue;
    double mass = 0.0;
    for (double e : pop.eta) mass += e;
    mass /= static_cast<double>(pop.eta.size());
    (4 * s < 3 * p.sweeps ? mass_a : mass_b).add(mass);
    for (std::size_t t = 0; t < samples; ++t) {
      const auto smp = hp.measure(pop);
      if (!smp.ok) {
        ++out.failed_samples;
        continue;
      }
      phi.add(smp.phi);
      dphi.add(smp.dphi);
      q0.add(smp.q0);
      q1.add(smp.q1);
    }
  }
  out.phi = phi.mean();
  out.phi_err = phi.stderr_();
  out.dphi = dphi.mean();
  out.q0 = q0.mean();
  out.q1 = q1.mean();
  out.mass = mass_b.n ? mass_b.mean() : mass_a.mean();
  out.drift = std::fabs(mass_b.mean() - mass_a.mean());
  return out;
}

// ---- reconstruction (m = 1) ------------------------------------------------

class SoftPopulation {
 public:
  SoftPopulation(const EnsembleParams& p, std::uint64_t stream)
      : p_(p), c_(p.beta.penalty()), rng_(make_rng(p.seed, stream)) {}

  void init(std::vector<SoftTriple>& pop, bool trivial) {
    pop.assign(p_.pool, SoftTriple{});
    for (auto& t : pop) {
      t.bar = 2.0 * uniform01(rng_) - 1.0;
      if (trivial) t.plus = t.minus = t.bar;
    }
  }

  // Clause bias on a literal of sign jt: the RS bias and, for each value s of the
  // target, the bias computed from children conditioned on a configuration drawn
  // from the clause given s.
  struct Biases {
    double bar, cond[2];
  };

  Biases clause(const std::vector<SoftTriple>& pop, Spin jt) {
    const std::size_t n = p_.k - 1;
    Spin js[16];
    const SoftTriple* ch[16];
    double pf[16];  // RS probability that the child literal is false
    double delta = 1.0;
    for (std::size_t r = 0; r < n; ++r) {
      js[r] = random_spin(rng_);
      ch[r] = &pop[uniform_index(rng_, pop.size())];
      pf[r] = spin_prob(ch[r]->bar, js[r]);
      delta *= pf[r];
    }
    Biases b;
    b.bar = clause_bias(jt, delta, c_);
    for (int si = 0; si < 2; ++si) {
      const Spin s = si == 0 ? 1 : -1;
      const std::uint32_t pat = sample_pattern(pf, n, s == jt);
      double cd = 1.0;
      for (std::size_t r = 0; r < n; ++r) {
        const Spin sj = (pat >> r) & 1u ? js[r] : static_cast<Spin>(-js[r]);
        cd *= spin_prob(ch[r]->cond(sj), js[r]);
      }
      b.cond[si] = clause_bias(jt, cd, c_);
    }
    return b;
  }

  // Draws which of n literals are false (bit set), independently with probability
  // pf, except that the all-false pattern keeps weight 1 - c when restricted.
  std::uint32_t sample_pattern(const double* pf, std::size_t n, bool restricted) {
    const double cut = restricted ? c_ : 0.0;
    double tail[17];
    tail[n] = 1.0;
    for (std::size_t r = n; r-- > 0;) tail[r] = tail[r + 1] * pf[r];
    std::uint32_t pat = 0;
    for (std::size_t r = 0; r < n; ++r) {
      // prefix all false: literal r true frees the rest
      const double w_true = 1.0 - pf[r];
      const double w_false = pf[r] * (1.0 - cut * tail[r + 1]);
      const double tot = w_true + w_false;
      if (tot > 0.0 && uniform01(rng_) * tot < w_true) {
        for (std::size_t q = r + 1; q < n; ++q)
          if (uniform01(rng_) < pf[q]) pat |= 1u << q;
        return pat;
      }
      pat |= 1u << r;
    }
    return pat;
  }

  SoftTriple field(const std::vector<SoftTriple>& pop, int d) {
    SoftTriple t{0.0, 0.0, 0.0};
    for (int b = 0; b < d; ++b) {
      const Spin jt = random_spin(rng_);
      const auto bs = clause(pop, jt);
      t.bar += bs.bar;
      t.plus += bs.cond[0];
      t.minus += bs.cond[1];
    }
    return t;
  }

  std::size_t sweep(std::vector<SoftTriple>& pop) {
    std::size_t bad = 0;
    const double ka = static_cast<double>(p_.k) * p_.alpha;
    for (std::size_t t = 0; t < pop.size(); ++t) {
      const std::size_t slot = uniform_index(rng_, pop.size());
      const auto f = field(pop, poisson(rng_, ka));
      if (std::isnan(f.bar) || std::isnan(f.plus) || std::isnan(f.minus)) {
        ++bad;
        continue;
      }
      pop[slot] = f;
    }
    return bad;
  }

  struct Sample {
    double phi = 0.0, sigma = 0.0, q0 = 0.0, q1 = 0.0;
  };

  // One sample of each factor term: the RS value (Phi(1)) and the difference to
  // the internal entropy Phi'(1) with the same draws.
  Sample measure(const std::vector<SoftTriple>& pop) {
    Sample out;
    const double ka = static_cast<double>(p_.k) * p_.alpha;
    auto lp = [](double h, Spin s) { return -softplus(-2.0 * s * h); };
    // variable
    {
      const int d = poisson(rng_, ka);
      double bar[2] = {0.0, 0.0}, cond[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
      for (int b = 0; b < d; ++b) {
        const auto bs = clause(pop, random_spin(rng_));
        for (int s = 0; s < 2; ++s) {
          const Spin sg = s == 0 ? 1 : -1;
          bar[s] += lp(bs.bar, sg);
          for (int c = 0; c < 2; ++c) cond[c][s] += lp(bs.cond[c], sg);
        }
      }
      const double lz = log_add_exp(bar[0], bar[1]);
      double li = 0.0;
      for (int c = 0; c < 2; ++c) {
        const double w = std::exp(bar[c] - lz);
        if (w > 0.0) li += w * log_add_exp(cond[c][0], cond[c][1]);
      }
      out.phi += lz;
      out.sigma += lz - li;
    }
    // clause, conditioned patterns enumerated exactly
    {
      const std::size_t k = p_.k;
      Spin js[16];
      const SoftTriple* ch[16];
      double pf[16];
      double all = 1.0;
      for (std::size_t r = 0; r < k; ++r) {
        js[r] = random_spin(rng_);
        ch[r] = &pop[uniform_index(rng_, pop.size())];
        pf[r] = spin_prob(ch[r]->bar, js[r]);
        all *= pf[r];
      }
      const double za = 1.0 - c_ * all;
      double li = 0.0;
      const std::uint32_t full = (1u << k) - 1u;
      for (std::uint32_t pat = 0; pat <= full; ++pat) {
        double w = pat == full ? 1.0 - c_ : 1.0;
        double cd = 1.0;
        for (std::size_t r = 0; r < k; ++r) {
          const bool fal = (pat >> r) & 1u;
          w *= fal ? pf[r] : 1.0 - pf[r];
          cd *= spin_prob(ch[r]->cond(fal ? js[r] : static_cast<Spin>(-js[r])), js[r]);
        }
        if (w <= 0.0) continue;
        li += w / za * std::log1p(-c_ * cd);
      }
      out.phi += p_.alpha * std::log(za);
      out.sigma += p_.alpha * (std::log(za) - li);
    }
    // edge, averaged over several draws since one is cheap
    {
      constexpr int kEdgeDraws = 32;
      double phi = 0.0, sig = 0.0;
      for (int r = 0; r < kEdgeDraws; ++r) {
        const Spin j = random_spin(rng_);
        const SoftTriple& t = pop[uniform_index(rng_, pop.size())];
        const auto bs = clause(pop, j);
        const double a = lp(t.bar, 1) + lp(bs.bar, 1), b = lp(t.bar, -1) + lp(bs.bar, -1);
        const double lz = log_add_exp(a, b);
        double li = 0.0;
        for (int c = 0; c < 2; ++c) {
          const double w = std::exp((c == 0 ? a : b) - lz);
          if (w <= 0.0) continue;
          const Spin sg = c == 0 ? 1 : -1;
          const double h = t.cond(sg), u = bs.cond[c];
          li += w * log_add_exp(lp(h, 1) + lp(u, 1), lp(h, -1) + lp(u, -1));
        }
        phi += lz;
        sig += lz - li;
      }
      out.phi -= ka * phi / kEdgeDraws;
      out.sigma -= ka * sig / kEdgeDraws;
    }
    const SoftTriple& t = pop[uniform_index(rng_, pop.size())];
    const double tb = std::tanh(t.bar);
    out.q0 = tb * tb;
    const double pp = spin_prob(t.bar, 1);
    const double tp = std::tanh(t.plus), tm = std::tanh(t.minus);
    out.q1 = pp * tp * tp + (1.0 - pp) * tm * tm;
    return out;
  }

 private:
  EnsembleParams p_;
  double c_;
  Rng rng_;
};

}  // namespace detail

/// Options of a 1RSB run beyond the ensemble parameters.
struct OneRsbOptions {
  OneRsbMethod method = OneRsbMethod::HardFields;
  bool trivial_init = false;          // start from the all-delta(0) population
  bool derivative = true;             // hard fields: finite-difference Phi'(m)
  double nontrivial_threshold = 1e-2; // q1 - q0 (reconstruction) or mean eta (hard fields)
};

/// 1RSB population dynamics at Parisi parameter m. Hard fields cover any m in
/// [0, 1]; reconstruction requires m = 1.
inline OneRsbResult pd_1rsb(const EnsembleParams& p, double m, const OneRsbOptions& opt = {},
                            SurveyPopulation* warm = nullptr) {
  validate(p);
  if (!(m >= 0.0 && m <= 1.0)) throw Error(ErrorKind::InvalidParameters, "m must lie in [0, 1]");
  OneRsbResult res;
  if (opt.method == OneRsbMethod::Reconstruction) {
    if (m != 1.0) throw Error(ErrorKind::InvalidParameters, "reconstruction needs m = 1");
    detail::SoftPopulation sp(p, 0x2C7);
    std::vector<SoftTriple> pop;
    sp.init(pop, opt.trivial_init);
    const std::size_t samples = p.samples ? p.samples : p.pool;
    detail::Mean phi, sig, q0, q1, gap_a, gap_b;
    for (std::size_t s = 0; s < p.sweeps; ++s) {
      res.collapsed_updates += sp.sweep(pop);
      if (2 * s < p.sweeps) continue;
      detail::Mean gap;
      for (std::size_t t = 0; t < samples; ++t) {
        const auto smp = sp.measure(pop);
        phi.add(smp.phi);
        sig.add(smp.sigma);
        q0.add(smp.q0);
        q1.add(smp.q1);
        gap.add(smp.q1 - smp.q0);
      }
      (4 * s < 3 * p.sweeps ? gap_a : gap_b).add(gap.mean());
    }
    res.phi = phi.mean();
    res.phi_stderr = phi.stderr_();
    res.sigma = sig.mean();
    res.sigma_stderr = sig.stderr_();
    res.omega_internal = res.omega_direct = res.phi - res.sigma;
    res.q0 = q0.mean();
    res.q1 = q1.mean();
    res.trivial = res.q1 - res.q0 < opt.nontrivial_threshold;
    res.converged = std::fabs(gap_b.mean() - gap_a.mean()) < std::max(1e-2, 0.05 * gap_b.mean());
    return res;
  }

  SurveyPopulation local;
  SurveyPopulation& pop = warm ? *warm : local;
  if (opt.trivial_init) pop.eta.assign(p.pool, 0.0);
  const SurveyPopulation start = pop;
  const auto mid = detail::run_hard(p, m, pop);
  res.phi = mid.phi;
  res.phi_stderr = mid.phi_err;
  res.omega_direct = mid.dphi;
  res.omega_internal = mid.dphi;
  res.q0 = mid.q0;
  res.q1 = mid.q1;
  res.collapsed_updates = mid.collapsed;
  res.trivial = mid.mass < opt.nontrivial_threshold * 1e-3;
  res.converged = mid.drift < std::max(1e-3, 0.02 * mid.mass);
  if (opt.derivative) {
    // common random numbers: both sides restart from the same population and seed
    const double lo = std::max(0.0, m - p.dm), hi = std::min(1.0, m + p.dm);
    SurveyPopulation a = start, b = start;
    const auto r_lo = lo < m ? detail::run_hard(p, lo, a) : mid;
    const auto r_hi = hi > m ? detail::run_hard(p, hi, b) : mid;
    res.omega_internal = (r_hi.phi - r_lo.phi) / (hi - lo);
    // noise of the difference plus the truncation term from a second difference
    const double noise = (r_hi.phi_err + r_lo.phi_err) / (hi - lo);
    double curv = 0.0;
    if (lo < m && hi > m) curv = std::fabs(r_hi.phi - 2.0 * mid.phi + r_lo.phi) / (hi - lo);
    res.fd_error = noise + curv;
  }
  res.sigma = res.phi - m * res.omega_internal;
  res.sigma_stderr = res.phi_stderr;
  return res;
}

// ---------------------------------------------------------------------------
// Complexity curve

struct ComplexityRow {
  double alpha = 0.0;
  double m = 0.0;
  double phi = 0.0;
  double omega = 0.0;         // Phi'(m) by finite difference
  double sigma = 0.0;         // Phi - m omega
  double omega_direct = 0.0;  // reweighted expectation of log z
  double q0 = 0.0, q1 = 0.0;
  double legendre_residual = 0.0;  // |Sigma + m omega_direct - Phi|
  double bound = 0.0;              // finite-difference error bound times m
  bool converged = false;
  bool trivial = false;
  std::size_t pool = 0, sweeps = 0;
  std::uint64_t seed = 0;
};

/// One hard-field 1RSB run per m, warm-started along the grid in the order given
/// (descending grids follow the usual continuation from m = 1). Only a nontrivial,
/// settled population is carried over; otherwise the next m starts fresh.
inline std::vector<ComplexityRow> complexity_curve(std::size_t k, double alpha,
                                                   const std::vector<double>& m_grid,
                                                   EnsembleParams params) {
  params.k = k;
  params.alpha = alpha;
  for (double m : m_grid)
    if (!(m >= 0.0 && m <= 1.0)) throw Error(ErrorKind::InvalidParameters, "m grid must lie in [0, 1]");
  std::vector<ComplexityRow> rows;
  SurveyPopulation pop;
  // worst-case rounding of the naive sums behind Phi, seen through the difference quotient
  const double n_meas = static_cast<double>((params.samples ? params.samples : params.pool) *
                                            (params.sweeps - params.sweeps / 2));
  const double round_floor = n_meas * std::numeric_limits<double>::epsilon() / params.dm;
  for (double m : m_grid) {
    const auto r = pd_1rsb(params, m, {}, &pop);
    if (r.trivial || !r.converged) pop = SurveyPopulation{};
    ComplexityRow row;
    row.alpha = alpha;
    row.m = m;
    row.phi = r.phi;
    row.omega = r.omega_internal;
    row.sigma = r.sigma;
    row.omega_direct = r.omega_direct;
    row.q0 = r.q0;
    row.q1 = r.q1;
    row.legendre_residual = std::fabs(row.sigma + m * row.omega_direct - row.phi);
    row.bound = m * r.fd_error + round_floor * (1.0 + std::fabs(r.phi));
    row.converged = r.converged;
    row.trivial = r.trivial;
    row.pool = params.pool;
    row.sweeps = params.sweeps;
    row.seed = params.seed;
    rows.push_back(row);
  }
  return rows;
}

inline void write_complexity_csv(const std::vector<ComplexityRow>& rows, std::ostream& out) {
  out << "alpha,m,phi,omega,sigma,q0,q1,converged,pool,sweeps,seed,omega_direct,legendre_residual,bound,trivial\n";
  for (const auto& r : rows)
    out << r.alpha << ',' << r.m << ',' << r.phi << ',' << r.omega << ',' << r.sigma << ',' << r.q0
        << ',' << r.q1 << ',' << r.converged << ',' << r.pool << ',' << r.sweeps << ',' << r.seed
        << ',' << r.omega_direct << ',' << r.legendre_residual << ',' << r.bound << ','
        << r.trivial << '\n';
}

// ---------------------------------------------------------------------------
// Transitions

struct TransitionConfig {
  std::vector<double> alpha_grid;
  std::size_t pool = 10000;
  std::size_t sweeps = 200;
  std::size_t seeds = 1;
  std::size_t bisect_steps = 3;
  std::uint64_t seed = 0;
  double nontrivial_threshold = 1e-2;
};

struct TransitionEstimate {
  bool found = false;
  double value = 0.0;
  double uncertainty = 0.0;
};

struct TransitionPoint {
  double alpha = 0.0;
  double sigma0 = 0.0;  // hard fields, m = 0
  bool nontrivial0 = false;
  double sigma1 = 0.0;  // reconstruction, m = 1
  bool nontrivial1 = false;
  double gap1 = 0.0;    // q1 - q0 at m = 1
};

struct Transitions {
  TransitionEstimate alpha_d, alpha_c, alpha_s;
  std::vector<TransitionPoint> points;  // every evaluated alpha, sorted
};

namespace detail {

template <class Eval, class Pred>
TransitionEstimate bracket_and_bisect(const std::vector<double>& grid, Eval&& eval, Pred&& pred,
                                      std::size_t steps) {
  TransitionEstimate est;
  for (std::size_t r = 1; r < grid.size(); ++r) {
    const bool a = pred(eval(grid[r - 1])), b = pred(eval(grid[r]));
    if (a == b) continue;
    double lo = grid[r - 1], hi = grid[r];
    for (std::size_t s = 0; s < steps; ++s) {
      const double mid = 0.5 * (lo + hi);
      (pred(eval(mid)) == a ? lo : hi) = mid;
    }
    est.found = true;
    est.value = 0.5 * (lo + hi);
    est.uncertainty = 0.5 * (hi - lo);
    return est;
  }
  return est;
}

}  // namespace detail

/// alpha_d: first alpha with a nontrivial m = 1 solution and Sigma(1) >= 0;
/// alpha_c: where Sigma(1) of that solution turns negative;
/// alpha_s: where Sigma(0) of the nontrivial hard-field solution turns negative.
inline Transitions locate_transitions(std::size_t k, const TransitionConfig& cfg) {
  if (cfg.alpha_grid.size() < 2) throw Error(ErrorKind::InvalidParameters, "alpha grid needs two points");
  if (!std::is_sorted(cfg.alpha_grid.begin(), cfg.alpha_grid.end()))
    throw Error(ErrorKind::InvalidParameters, "alpha grid must be ascending");
  Transitions out;
  auto eval = [&](double alpha) -> const TransitionPoint& {
    for (const auto& pt : out.points)
      if (pt.alpha == alpha) return pt;
    TransitionPoint pt;
    pt.alpha = alpha;
    double s0 = 0.0, s1 = 0.0, g1 = 0.0;
    std::size_t nt0 = 0, nt1 = 0;
    for (std::size_t sd = 0; sd < std::max<std::size_t>(cfg.seeds, 1); ++sd) {
      EnsembleParams p;
      p.k = k;
      p.alpha = alpha;
      p.pool = cfg.pool;
      p.sweeps = cfg.sweeps;
      p.seed = mix_seed(cfg.seed, sd);
      OneRsbOptions o;
      o.derivative = false;
      o.nontrivial_threshold = cfg.nontrivial_threshold;
      const auto r0 = pd_1rsb(p, 0.0, o);
      s0 += r0.sigma;
      nt0 += !r0.trivial;
      o.method = OneRsbMethod::Reconstruction;
      const auto r1 = pd_1rsb(p, 1.0, o);
      s1 += r1.sigma;
      g1 += r1.q1 - r1.q0;
      nt1 += !r1.trivial && r1.converged;
    }
    const double n = static_cast<double>(std::max<std::size_t>(cfg.seeds, 1));
    pt.sigma0 = s0 / n;
    pt.sigma1 = s1 / n;
    pt.gap1 = g1 / n;
    pt.nontrivial0 = 2 * nt0 > static_cast<std::size_t>(n);
    pt.nontrivial1 = 2 * nt1 > static_cast<std::size_t>(n);
    out.points.push_back(pt);
    return out.points.back();
  };
  out.alpha_d = detail::bracket_and_bisect(
      cfg.alpha_grid, eval, [](const TransitionPoint& p) { return p.nontrivial1 && p.sigma1 >= 0.0; },
      cfg.bisect_steps);
  // alpha_c and alpha_s are searched from the first grid point with a nontrivial solution
  auto tail = [&](auto has) {
    std::vector<double> g;
    bool on = false;
    for (double a : cfg.alpha_grid) {
      on = on || has(eval(a));
      if (on) g.push_back(a);
    }
    return g;
  };
  const auto g1 = tail([](const TransitionPoint& p) { return p.nontrivial1; });
  out.alpha_c = detail::bracket_and_bisect(
      g1, eval, [](const TransitionPoint& p) { return p.nontrivial1 && p.sigma1 > 0.0; }, cfg.bisect_steps);
  const auto g0 = tail([](const TransitionPoint& p) { return p.nontrivial0; });
  out.alpha_s = detail::bracket_and_bisect(
      g0, eval, [](const TransitionPoint& p) { return p.nontrivial0 && p.sigma0 > 0.0; }, cfg.bisect_steps);
  std::sort(out.points.begin(), out.points.end(),
            [](const TransitionPoint& a, const TransitionPoint& b) { return a.alpha < b.alpha; });
  return out;
}

inline void write_transitions_csv(const Transitions& t, std::ostream& out) {
  out << "alpha,sigma0,nontrivial0,sigma1,nontrivial1,gap1\n";
  for (const auto& p : t.points)
    out << p.alpha << ',' << p.sigma0 << ',' << p.nontrivial0 << ',' << p.sigma1 << ','
        << p.nontrivial1 << ',' << p.gap1 << '\n';
}

}  // namespace ksat

#endif
