#ifndef KSATLAB_SK_HPP
#define KSATLAB_SK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <vector>

#include "ksatlab/common.hpp"
#include "ksatlab/instance.hpp"

// Sherrington-Kirkpatrick sandbox. H = -(1/sqrt N) sum_{i != j} g_ij s_i s_j with
// symmetric standard Gaussian g. Each pair enters twice, so the effective coupling
// 2 g / sqrt N has variance 4/N and the critical temperature is 2.

namespace ksat {

constexpr double kSkCriticalTemperature = 2.0;

struct SkSystem {
  std::size_t n = 0;
  std::vector<double> g;  // row-major n x n, symmetric, zero diagonal
  std::uint64_t seed = 0;

  double at(std::size_t i, std::size_t j) const { return g[i * n + j]; }

  static SkSystem random(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw Error(ErrorKind::InvalidParameters, "SK system needs n >= 1");
    SkSystem s;
    s.n = n;
    s.seed = seed;
    s.g.assign(n * n, 0.0);
    Rng rng = make_rng(seed, 0x5C);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s.g[i * n + j] = s.g[j * n + i] = normal(rng);
    return s;
  }
};

inline double sk_energy(const SkSystem& sys, const SpinConfig& s) {
  if (s.size() != sys.n) throw Error(ErrorKind::InvalidParameters, "spin count mismatch");
  double e = 0.0;
  for (std::size_t i = 0; i < sys.n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < sys.n; ++j) row += sys.at(i, j) * s[j];
    e += s[i] * row;
  }
  return -e / std::sqrt(static_cast<double>(sys.n));
}

/// Energy change of flipping spin i given the local sum h_i = sum_j g_ij s_j.
inline double sk_flip_delta(const SkSystem& sys, Spin si, double hi) {
  return 4.0 * si * hi / std::sqrt(static_cast<double>(sys.n));
}

/// No single flip lowers the energy.
inline bool one_flip_stable(const SkSystem& sys, const SpinConfig& s) {
  for (std::size_t i = 0; i < sys.n; ++i) {
    double h = 0.0;
    for (std::size_t j = 0; j < sys.n; ++j) h += sys.at(i, j) * s[j];
    if (sk_flip_delta(sys, s[i], h) < 0.0) return false;
  }
  return true;
}

struct AnnealSchedule {
  double t_start = 1.2 * kSkCriticalTemperature;
  double t_end = 0.1 * kSkCriticalTemperature;
  std::size_t steps = 1000;  // sweeps of n proposals
};

inline void validate(const AnnealSchedule& s) {
  if (!(s.t_end > 0.0 && s.t_start > s.t_end))
    throw Error(ErrorKind::InvalidParameters, "schedule needs t_start > t_end > 0");
  if (s.steps == 0) throw Error(ErrorKind::InvalidParameters, "schedule needs steps >= 1");
}

namespace detail {

class Metropolis {
 public:
  Metropolis(const SkSystem& sys, SpinConfig s) : sys_(&sys), s_(std::move(s)), h_(sys.n, 0.0) {
    for (std::size_t i = 0; i < sys.n; ++i)
      for (std::size_t j = 0; j < sys.n; ++j) h_[i] += sys.at(i, j) * s_[j];
  }

  void sweep(double t, Rng& rng) {
    const std::size_t n = sys_->n;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = uniform_index(rng, n);
      const double de = sk_flip_delta(*sys_, s_[i], h_[i]);
      if (de > 0.0 && uniform01(rng) >= std::exp(-de / t)) continue;
      const double d = -2.0 * s_[i];
      s_[i] = static_cast<Spin>(-s_[i]);
      const double* row = &sys_->g[i * n];
      for (std::size_t j = 0; j < n; ++j) h_[j] += row[j] * d;
    }
  }

  const SpinConfig& spins() const { return s_; }

 private:
  const SkSystem* sys_;
  SpinConfig s_;
  std::vector<double> h_;
};

}  // namespace detail

/// Metropolis single-spin-flip annealing with geometric cooling from t_start to
/// t_end over the given number of sweeps; random start unless one is given.
inline SpinConfig anneal(const SkSystem& sys, const AnnealSchedule& sched, std::uint64_t seed,
                         const SpinConfig* start = nullptr) {
  validate(sched);
  Rng rng = make_rng(seed, 0xA7);
  SpinConfig s(sys.n);
  if (start) {
    if (start->size() != sys.n) throw Error(ErrorKind::InvalidParameters, "spin count mismatch");
    s = *start;
  } else {
    for (auto& x : s) x = coin(rng) ? 1 : -1;
  }
  detail::Metropolis mc(sys, std::move(s));
  const double ratio = sched.steps > 1 ? std::pow(sched.t_end / sched.t_start, 1.0 / static_cast<double>(sched.steps - 1)) : 1.0;
  double t = sched.steps > 1 ? sched.t_start : sched.t_end;
  for (std::size_t k = 0; k < sched.steps; ++k, t *= ratio) mc.sweep(t, rng);
  return mc.spins();
}

struct PureStateConfig {
  std::size_t samples = 100;
  std::size_t repeats = 100;
  AnnealSchedule schedule;
  // each repeat re-anneals from the stored configuration, from this multiple of
  // t_end down to t_end over resample_steps sweeps
  double reheat = 1.5;
  std::size_t resample_steps = 20;
  std::uint64_t seed = 0;
  // changes only the re-anneal seeds; the stored configurations stay the same
  std::uint64_t resample_seed = 0;
};

/// Mean-spin vectors of `samples` low-temperature states, each averaged over
/// `repeats` short re-anneals from its stored configuration (distinct seeds).
/// repeats = 1 returns the annealed configurations themselves.
inline std::vector<std::vector<double>> sample_pure_states(const SkSystem& sys,
                                                           const PureStateConfig& cfg) {
  validate(cfg.schedule);
  if (cfg.samples == 0 || cfg.repeats == 0)
    throw Error(ErrorKind::InvalidParameters, "samples and repeats must be >= 1");
  std::vector<std::vector<double>> out;
  out.reserve(cfg.samples);
  AnnealSchedule re;
  re.t_end = cfg.schedule.t_end;
  re.t_start = cfg.schedule.t_end * std::max(cfg.reheat, 1.0 + 1e-9);
  re.steps = std::max<std::size_t>(cfg.resample_steps, 1);
  for (std::size_t a = 0; a < cfg.samples; ++a) {
    const std::uint64_t coarse = mix_seed(cfg.seed, a);
    const SpinConfig base = anneal(sys, cfg.schedule, coarse);
    const std::uint64_t fine = cfg.resample_seed ? mix_seed(coarse, ~cfg.resample_seed) : coarse;
    std::vector<double> mean(sys.n, 0.0);
    if (cfg.repeats == 1) {
      for (std::size_t i = 0; i < sys.n; ++i) mean[i] = base[i];
    } else {
      for (std::size_t r = 0; r < cfg.repeats; ++r) {
        const auto s = anneal(sys, re, mix_seed(fine, r + 1), &base);
        for (std::size_t i = 0; i < sys.n; ++i) mean[i] += s[i];
      }
      for (auto& x : mean) x /= static_cast<double>(cfg.repeats);
    }
    out.push_back(std::move(mean));
  }
  return out;
}

struct OverlapMatrix {
  std::size_t s = 0;
  std::vector<double> q;  // row-major s x s

  double at(std::size_t a, std::size_t b) const { return q[a * s + b]; }
  /// Mean of the self-overlaps.
  double q_ea() const {
    double t = 0.0;
    for (std::size_t a = 0; a < s; ++a) t += at(a, a);
    return s ? t / static_cast<double>(s) : 0.0;
  }
};

inline OverlapMatrix overlap_matrix(const std::vector<std::vector<double>>& states) {
  OverlapMatrix m;
  m.s = states.size();
  m.q.assign(m.s * m.s, 0.0);
  if (m.s == 0) return m;
  const std::size_t n = states[0].size();
  for (const auto& v : states)
    if (v.size() != n) throw Error(ErrorKind::InvalidParameters, "state lengths differ");
  for (std::size_t a = 0; a < m.s; ++a)
    for (std::size_t b = a; b < m.s; ++b) {
      double t = 0.0;
      for (std::size_t i = 0; i < n; ++i) t += states[a][i] * states[b][i];
      m.q[a * m.s + b] = m.q[b * m.s + a] = n ? t / static_cast<double>(n) : 0.0;
    }
  return m;
}

/// d = 2 (q_EA - q) off the diagonal, 0 on it.
inline std::vector<double> state_distances(const OverlapMatrix& m) {
  std::vector<double> d(m.s * m.s, 0.0);
  const double qea = m.q_ea();
  for (std::size_t a = 0; a < m.s; ++a)
    for (std::size_t b = 0; b < m.s; ++b)
      if (a != b) d[a * m.s + b] = 2.0 * (qea - m.at(a, b));
  return d;
}

/// Fraction of triples whose two largest distances differ by at most eps_rel of the
/// largest one.
inline double ultrametricity_score(const std::vector<double>& d, std::size_t s, double eps_rel = 0.1) {
  std::size_t good = 0, total = 0;
  for (std::size_t a = 0; a < s; ++a)
    for (std::size_t b = a + 1; b < s; ++b)
      for (std::size_t c = b + 1; c < s; ++c) {
        double x[3] = {d[a * s + b], d[a * s + c], d[b * s + c]};
        std::sort(x, x + 3);
        ++total;
        if (x[2] - x[1] <= eps_rel * std::fabs(x[2])) ++good;
      }
  return total ? static_cast<double>(good) / static_cast<double>(total) : 1.0;
}

struct Merge {
  std::size_t step = 0;
  std::size_t a = 0, b = 0;  // cluster ids; leaves are 0..s-1, merge t creates s + t
  double height = 0.0;
};

struct ClusterResult {
  std::vector<Merge> dendrogram;
  double ultrametricity_score = 1.0;
};

/// Average-linkage agglomerative clustering on a distance matrix.
inline std::vector<Merge> average_linkage(const std::vector<double>& d, std::size_t s) {
  std::vector<Merge> out;
  if (s < 2) return out;
  std::vector<double> dist = d;  // rows reused for merged clusters
  std::vector<std::size_t> size(s, 1), id(s);
  std::vector<bool> alive(s, true);
  for (std::size_t a = 0; a < s; ++a) id[a] = a;
  for (std::size_t t = 0; t + 1 < s; ++t) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < s; ++a) {
      if (!alive[a]) continue;
      for (std::size_t b = a + 1; b < s; ++b)
        if (alive[b] && dist[a * s + b] < best) {
          best = dist[a * s + b];
          ba = a;
          bb = b;
        }
    }
    out.push_back({t, std::min(id[ba], id[bb]), std::max(id[ba], id[bb]), best});
    for (std::size_t c = 0; c < s; ++c) {
      if (!alive[c] || c == ba || c == bb) continue;
      const double v = (dist[ba * s + c] * static_cast<double>(size[ba]) +
                        dist[bb * s + c] * static_cast<double>(size[bb])) /
                       static_cast<double>(size[ba] + size[bb]);
      dist[ba * s + c] = dist[c * s + ba] = v;
    }
    size[ba] += size[bb];
    alive[bb] = false;
    id[ba] = s + t;
  }
  return out;
}

inline ClusterResult cluster_and_score(const OverlapMatrix& m, double eps_rel = 0.1) {
  for (std::size_t a = 0; a < m.s; ++a)
    for (std::size_t b = 0; b < a; ++b)
      if (std::fabs(m.at(a, b) - m.at(b, a)) > 1e-12)
        throw Error(ErrorKind::InvalidParameters, "overlap matrix is not symmetric");
  const auto d = state_distances(m);
  ClusterResult r;
  r.dendrogram = average_linkage(d, m.s);
  r.ultrametricity_score = ultrametricity_score(d, m.s, eps_rel);
  return r;
}

inline void write_overlap_csv(const OverlapMatrix& m, std::ostream& out) {
  out << "a,b,q\n";
  for (std::size_t a = 0; a < m.s; ++a)
    for (std::size_t b = 0; b < m.s; ++b) out << a << ',' << b << ',' << m.at(a, b) << '\n';
}

inline void write_dendrogram_csv(const std::vector<Merge>& merges, std::ostream& out) {
  out << "step,cluster_a,cluster_b,height\n";
  for (const auto& mg : merges) out << mg.step << ',' << mg.a << ',' << mg.b << ',' << mg.height << '\n';
}

}  // namespace ksat

#endif
