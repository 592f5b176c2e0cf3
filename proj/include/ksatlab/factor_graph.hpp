#ifndef KSATLAB_FACTOR_GRAPH_HPP
#define KSATLAB_FACTOR_GRAPH_HPP

#include <cstdint>
#include <map>
#include <ostream>
#include <queue>
#include <span>
#include <vector>

#include "ksatlab/instance.hpp"

namespace ksat {

using EdgeId = std::uint32_t;

/// Bipartite clause/variable graph. Edge e joins clause edge_clause[e] and variable
/// edge_var[e]; every edge owns two message slots (i->a and a->i) indexed by e.
/// Clause a's edges are the contiguous range [clause_offset[a], clause_offset[a+1]).
class FactorGraph {
 public:
  FactorGraph() = default;

  explicit FactorGraph(const CnfInstance& inst) : n_vars_(inst.n_vars) {
    clause_offset_.reserve(inst.clauses.size() + 1);
    clause_offset_.push_back(0);
    for (std::size_t a = 0; a < inst.clauses.size(); ++a) {
      for (const auto& l : inst.clauses[a].literals) {
        edge_var_.push_back(l.var);
        edge_clause_.push_back(static_cast<std::uint32_t>(a));
        edge_j_.push_back(l.j_sign);
      }
      clause_offset_.push_back(static_cast<EdgeId>(edge_var_.size()));
    }
    var_offset_.assign(n_vars_ + 1, 0);
    for (auto v : edge_var_) ++var_offset_[v + 1];
    for (std::size_t i = 0; i < n_vars_; ++i) var_offset_[i + 1] += var_offset_[i];
    var_edges_.resize(edge_var_.size());
    std::vector<EdgeId> fill(var_offset_.begin(), var_offset_.end() - 1);
    for (EdgeId e = 0; e < edge_var_.size(); ++e) var_edges_[fill[edge_var_[e]]++] = e;
  }

  std::size_t n_vars() const { return n_vars_; }
  std::size_t n_clauses() const { return clause_offset_.empty() ? 0 : clause_offset_.size() - 1; }
  std::size_t n_edges() const { return edge_var_.size(); }

  EdgeId clause_begin(std::size_t a) const { return clause_offset_[a]; }
  EdgeId clause_end(std::size_t a) const { return clause_offset_[a + 1]; }
  std::size_t clause_degree(std::size_t a) const { return clause_end(a) - clause_begin(a); }

  std::span<const EdgeId> var_edges(std::size_t i) const {
    return {var_edges_.data() + var_offset_[i], var_edges_.data() + var_offset_[i + 1]};
  }
  std::size_t var_degree(std::size_t i) const { return var_offset_[i + 1] - var_offset_[i]; }

  std::uint32_t edge_var(EdgeId e) const { return edge_var_[e]; }
  std::uint32_t edge_clause(EdgeId e) const { return edge_clause_[e]; }
  Spin edge_j(EdgeId e) const { return edge_j_[e]; }

 private:
  std::size_t n_vars_ = 0;
  std::vector<EdgeId> clause_offset_;
  std::vector<std::uint32_t> edge_var_;
  std::vector<std::uint32_t> edge_clause_;
  std::vector<Spin> edge_j_;
  std::vector<EdgeId> var_offset_;
  std::vector<EdgeId> var_edges_;
};

inline FactorGraph build(const CnfInstance& inst) { return FactorGraph(inst); }

/// Decimation view over an immutable graph: fixed spins and satisfied clauses.
struct GraphMask {
  std::vector<Spin> value;                 // 0 = free
  std::vector<std::uint8_t> clause_alive;  // 0 = satisfied by a fixed spin

  static GraphMask all_free(const FactorGraph& g) {
    return {std::vector<Spin>(g.n_vars(), 0), std::vector<std::uint8_t>(g.n_clauses(), 1)};
  }

  bool var_free(std::size_t i) const { return value[i] == 0; }
  bool alive(std::size_t a) const { return clause_alive[a] != 0; }
  bool edge_active(const FactorGraph& g, EdgeId e) const {
    return clause_alive[g.edge_clause(e)] && value[g.edge_var(e)] == 0;
  }
};

/// Mask induced by a partial assignment: a clause dies once any literal is satisfied.
inline GraphMask mask_from(const FactorGraph& g, const std::vector<Spin>& value) {
  GraphMask m{value, std::vector<std::uint8_t>(g.n_clauses(), 1)};
  for (std::size_t a = 0; a < g.n_clauses(); ++a)
    for (EdgeId e = g.clause_begin(a); e < g.clause_end(a); ++e) {
      const Spin v = value[g.edge_var(e)];
      if (v != 0 && v != g.edge_j(e)) {
        m.clause_alive[a] = 0;
        break;
      }
    }
  return m;
}

inline std::map<std::size_t, std::size_t> degree_histogram(const FactorGraph& g) {
  std::map<std::size_t, std::size_t> h;
  for (std::size_t i = 0; i < g.n_vars(); ++i) ++h[g.var_degree(i)];
  return h;
}

struct NodeRef {
  enum class Kind { Var, Clause } kind = Kind::Var;
  std::size_t index = 0;
};

struct Ball {
  std::vector<std::uint32_t> vars;
  std::vector<std::uint32_t> clauses;
  std::vector<EdgeId> edges;  // edges with both endpoints in the ball
  bool is_tree = true;
};

/// Induced subgraph on all nodes within graph distance `radius` of `center`
/// (a variable-clause hop counts 1). The ball is connected, so it is a tree iff
/// |edges| = |nodes| - 1.
inline Ball bfs_ball(const FactorGraph& g, NodeRef center, std::size_t radius) {
  const bool is_var = center.kind == NodeRef::Kind::Var;
  if ((is_var && center.index >= g.n_vars()) || (!is_var && center.index >= g.n_clauses()))
    throw Error(ErrorKind::NodeOutOfRange, "bfs_ball center out of range");
  const std::size_t nv = g.n_vars();
  std::vector<int> dist(nv + g.n_clauses(), -1);  // vars first, then clauses
  std::queue<std::size_t> q;
  const std::size_t c0 = is_var ? center.index : nv + center.index;
  dist[c0] = 0;
  q.push(c0);
  Ball ball;
  while (!q.empty()) {
    const std::size_t u = q.front();
    q.pop();
    if (u < nv) ball.vars.push_back(static_cast<std::uint32_t>(u));
    else ball.clauses.push_back(static_cast<std::uint32_t>(u - nv));
    if (static_cast<std::size_t>(dist[u]) == radius) continue;
    auto visit = [&](std::size_t w) {
      if (dist[w] < 0) {
        dist[w] = dist[u] + 1;
        q.push(w);
      }
    };
    if (u < nv) {
      for (EdgeId e : g.var_edges(u)) visit(nv + g.edge_clause(e));
    } else {
      for (EdgeId e = g.clause_begin(u - nv); e < g.clause_end(u - nv); ++e) visit(g.edge_var(e));
    }
  }
  for (auto a : ball.clauses)
    for (EdgeId e = g.clause_begin(a); e < g.clause_end(a); ++e)
      if (dist[g.edge_var(e)] >= 0) ball.edges.push_back(e);
  ball.is_tree = ball.edges.size() + 1 == ball.vars.size() + ball.clauses.size();
  return ball;
}

inline void write_edge_list(const FactorGraph& g, std::ostream& out) {
  out << "edge,clause,var,j_sign\n";
  for (EdgeId e = 0; e < g.n_edges(); ++e)
    out << e << ',' << g.edge_clause(e) << ',' << g.edge_var(e) << ','
        << static_cast<int>(g.edge_j(e)) << '\n';
}

}  // namespace ksat

#endif
