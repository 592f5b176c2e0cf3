#ifndef KSATLAB_PROPAGATE_HPP
#define KSATLAB_PROPAGATE_HPP

#include <cstdint>
#include <vector>

#include "ksatlab/instance.hpp"

namespace ksat {

/// Trail-based unit clause propagation over a fixed instance. Assignments are
/// pushed onto a trail and can be undone, which makes the same object usable for
/// DPLL backtracking and for monotone decimation.
class Propagator {
 public:
  explicit Propagator(const CnfInstance& inst)
      : inst_(&inst),
        value_(inst.n_vars, 0),
        occ_begin_(inst.n_vars + 1, 0),
        true_cnt_(inst.clauses.size(), 0),
        false_cnt_(inst.clauses.size(), 0) {
    for (const auto& c : inst.clauses)
      for (const auto& l : c.literals) ++occ_begin_[l.var + 1];
    for (std::size_t i = 0; i < inst.n_vars; ++i) occ_begin_[i + 1] += occ_begin_[i];
    occ_.resize(occ_begin_.back());
    std::vector<std::uint32_t> fill(occ_begin_.begin(), occ_begin_.end() - 1);
    for (std::size_t a = 0; a < inst.clauses.size(); ++a)
      for (const auto& l : inst.clauses[a].literals)
        occ_[fill[l.var]++] = {static_cast<std::uint32_t>(a), l.j_sign};
    conflict_ = inst.contradiction;
    for (std::size_t a = 0; a < inst.clauses.size(); ++a) {
      const auto& c = inst.clauses[a];
      if (c.literals.empty()) conflict_ = true;
      else if (c.literals.size() == 1) enqueue(c.literals[0].var, static_cast<Spin>(-c.literals[0].j_sign));
    }
  }

  const CnfInstance& instance() const { return *inst_; }
  const std::vector<Spin>& values() const { return value_; }
  Spin value(std::size_t v) const { return value_[v]; }
  bool clause_satisfied(std::size_t a) const { return true_cnt_[a] > 0; }
  std::size_t clause_free(std::size_t a) const {
    return inst_->clauses[a].size() - false_cnt_[a] - true_cnt_[a];
  }
  std::size_t n_satisfied() const { return n_sat_; }
  bool all_satisfied() const { return n_sat_ == inst_->clauses.size(); }
  bool conflict() const { return conflict_; }
  std::size_t trail_size() const { return trail_.size(); }
  const std::vector<std::uint32_t>& trail() const { return trail_; }

  /// With unit propagation off, assignments only detect fully falsified clauses.
  void set_unit_propagation(bool on) { units_ = on; }

  /// Assigns v = s and propagates. Returns false on conflict; the caller undoes.
  bool assign(std::size_t v, Spin s) {
    if (conflict_) return false;
    if (value_[v] != 0) {
      if (value_[v] != s) conflict_ = true;
      return !conflict_;
    }
    enqueue(v, s);
    return propagate();
  }

  bool propagate() {
    while (!conflict_ && qhead_ < trail_.size()) {
      const std::uint32_t v = trail_[qhead_++];
      const Spin s = value_[v];
      for (std::uint32_t o = occ_begin_[v]; o < occ_begin_[v + 1]; ++o) {
        const auto [a, j] = occ_[o];
        if (s != j) {
          if (true_cnt_[a]++ == 0) ++n_sat_;
          continue;
        }
        ++false_cnt_[a];
        if (true_cnt_[a] > 0) continue;
        const std::size_t w = inst_->clauses[a].size();
        if (false_cnt_[a] == w) {
          conflict_ = true;
        } else if (units_ && false_cnt_[a] + 1 == w) {
          for (const auto& l : inst_->clauses[a].literals)
            if (value_[l.var] == 0) {
              enqueue(l.var, static_cast<Spin>(-l.j_sign));
              break;
            }
        }
      }
    }
    return !conflict_;
  }

  /// Undoes all assignments made after the trail had `pos` entries.
  void undo_to(std::size_t pos) {
    for (std::size_t t = trail_.size(); t-- > pos;) {
      const std::uint32_t v = trail_[t];
      if (t < qhead_) {
        const Spin s = value_[v];
        for (std::uint32_t o = occ_begin_[v]; o < occ_begin_[v + 1]; ++o) {
          const auto [a, j] = occ_[o];
          if (s != j) {
            if (--true_cnt_[a] == 0) --n_sat_;
          } else {
            --false_cnt_[a];
          }
        }
      }
      value_[v] = 0;
    }
    trail_.resize(pos);
    if (qhead_ > pos) qhead_ = pos;
    conflict_ = inst_->contradiction;
    for (const auto& c : inst_->clauses)
      if (c.literals.empty()) conflict_ = true;
  }

 private:
  struct Occ {
    std::uint32_t clause;
    Spin j;
  };

  void enqueue(std::size_t v, Spin s) {
    if (value_[v] != 0) {
      if (value_[v] != s) conflict_ = true;
      return;
    }
    value_[v] = s;
    trail_.push_back(static_cast<std::uint32_t>(v));
  }

  const CnfInstance* inst_;
  std::vector<Spin> value_;
  std::vector<std::uint32_t> occ_begin_;
  std::vector<Occ> occ_;
  std::vector<std::uint32_t> true_cnt_;
  std::vector<std::uint32_t> false_cnt_;
  std::vector<std::uint32_t> trail_;
  std::size_t qhead_ = 0;
  std::size_t n_sat_ = 0;
  bool conflict_ = false;
  bool units_ = true;
};

}  // namespace ksat

#endif
