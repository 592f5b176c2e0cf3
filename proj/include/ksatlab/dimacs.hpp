#ifndef KSATLAB_DIMACS_HPP
#define KSATLAB_DIMACS_HPP

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "ksatlab/instance.hpp"

namespace ksat {

struct DimacsReadOptions {
  bool require_uniform_width = true;  // reject instances whose clauses differ in width
};

// DIMACS literals are 1-based; variable v occurring negated has j_sign = +1.
inline CnfInstance parse_dimacs(std::istream& in, const DimacsReadOptions& opt = {}) {
  CnfInstance inst;
  bool have_header = false;
  std::size_t declared_m = 0;
  std::string line;
  Clause cur;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::MalformedInput, "line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == "c" || tok[0] == 'c' || tok[0] == '%') continue;
    if (tok == "p") {
      std::string fmt;
      long long n = -1, m = -1;
      if (have_header) fail("duplicate header");
      if (!(ls >> fmt >> n >> m) || fmt != "cnf" || n < 0 || m < 0) fail("malformed header");
      inst.n_vars = static_cast<std::size_t>(n);
      declared_m = static_cast<std::size_t>(m);
      have_header = true;
      continue;
    }
    if (!have_header) fail("clause before header");
    ls.clear();
    ls.str(line);
    long long lit = 0;
    while (ls >> lit) {
      if (lit == 0) {
        if (cur.literals.empty()) fail("empty clause");
        inst.clauses.push_back(std::move(cur));
        cur = Clause{};
        continue;
      }
      const auto a = static_cast<unsigned long long>(lit < 0 ? -lit : lit);
      if (a > inst.n_vars) fail("variable index " + std::to_string(a) + " out of range");
      const Literal l{static_cast<std::uint32_t>(a - 1), static_cast<Spin>(lit < 0 ? 1 : -1)};
      for (const auto& o : cur.literals)
        if (o.var == l.var) fail("repeated variable in clause");
      cur.literals.push_back(l);
    }
    if (!ls.eof()) fail("unexpected token");
  }
  if (!have_header) throw Error(ErrorKind::MalformedInput, "missing header");
  if (!cur.literals.empty()) throw Error(ErrorKind::MalformedInput, "unterminated clause");
  if (inst.clauses.size() != declared_m)
    throw Error(ErrorKind::MalformedInput, "header declares " + std::to_string(declared_m) +
                                               " clauses, found " +
                                               std::to_string(inst.clauses.size()));
  std::size_t kmax = 0, kmin = inst.clauses.empty() ? 0 : ~std::size_t{0};
  for (const auto& c : inst.clauses) {
    kmax = std::max(kmax, c.size());
    kmin = std::min(kmin, c.size());
  }
  if (opt.require_uniform_width && kmin != kmax)
    throw Error(ErrorKind::MalformedInput, "width mismatch: clauses of width " +
                                               std::to_string(kmin) + " and " +
                                               std::to_string(kmax));
  inst.k = kmax;
  return inst;
}

inline CnfInstance read_dimacs(const std::string& path, const DimacsReadOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  return parse_dimacs(in, opt);
}

inline void write_dimacs(const CnfInstance& inst, std::ostream& out) {
  out << "p cnf " << inst.n_vars << ' ' << inst.clauses.size() << '\n';
  for (const auto& c : inst.clauses) {
    for (const auto& l : c.literals)
      out << (l.j_sign > 0 ? -static_cast<long long>(l.var + 1) : static_cast<long long>(l.var + 1))
          << ' ';
    out << "0\n";
  }
}

inline void write_dimacs(const CnfInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  write_dimacs(inst, out);
}

/// Reproducibility sidecar stored next to generated instances.
struct InstanceMeta {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::string model = "uniform";
};

inline void to_json(nlohmann::json& j, const InstanceMeta& meta) {
  j = nlohmann::json{{"n", meta.n}, {"m", meta.m}, {"k", meta.k}, {"seed", meta.seed},
                     {"model", meta.model}};
}

inline void from_json(const nlohmann::json& j, InstanceMeta& meta) {
  j.at("n").get_to(meta.n);
  j.at("m").get_to(meta.m);
  j.at("k").get_to(meta.k);
  j.at("seed").get_to(meta.seed);
  j.at("model").get_to(meta.model);
}

/// Spin configuration in DIMACS solution-line style: "v 1 -2 3 ... 0".
inline void write_assignment(const SpinConfig& s, std::ostream& out) {
  out << 'v';
  for (std::size_t i = 0; i < s.size(); ++i)
    out << ' ' << (s[i] > 0 ? static_cast<long long>(i + 1) : -static_cast<long long>(i + 1));
  out << " 0\n";
}

inline SpinConfig parse_assignment(std::istream& in, std::size_t n) {
  SpinConfig s(n, 0);
  std::string tok;
  while (in >> tok) {
    if (tok == "v" || tok == "s" || tok == "SATISFIABLE") continue;
    const long long lit = std::stoll(tok);
    if (lit == 0) break;
    const auto a = static_cast<std::size_t>(lit < 0 ? -lit : lit);
    if (a == 0 || a > n) throw Error(ErrorKind::MalformedInput, "assignment literal out of range");
    s[a - 1] = lit > 0 ? 1 : -1;
  }
  for (auto v : s)
    if (v == 0) throw Error(ErrorKind::MalformedInput, "assignment is incomplete");
  return s;
}

}  // namespace ksat

#endif
