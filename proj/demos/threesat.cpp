// One pass over the 3-SAT picture at a single density: RS entropy from the
// ensemble, BP and SP on one sample, then survey-inspired decimation.
//   demo_threesat [n] [alpha] [seed]

#include <cstdlib>
#include <iostream>

#include "ksatlab/bp.hpp"
#include "ksatlab/cavity.hpp"
#include "ksatlab/sp.hpp"

using namespace ksat;

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 2000;
  const double alpha = argc > 2 ? std::atof(argv[2]) : 4.2;
  const std::uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 1;

  EnsembleParams ep;
  ep.alpha = alpha;
  ep.pool = 5000;
  ep.sweeps = 60;
  ep.seed = seed;
  const auto rs = pd_rs(ep);
  std::cout << "ensemble  omega_RS = " << rs.omega << "  q_RS = " << rs.q_rs << '\n';

  const auto inst = gen_uniform(n, clauses_for_density(alpha, n), 3, seed);
  const auto g = build(inst);
  const auto bp = run(g, BpConfig{.max_sweeps = 500, .tol = 1e-6, .seed = seed}, Beta::infinity());
  std::cout << "BP        converged=" << bp.converged << " sweeps=" << bp.sweeps;
  if (bp.converged && !bp.contradiction)
    std::cout << "  bethe entropy = " << bethe_free_entropy(g, bp.state);
  std::cout << '\n';

  const auto sp = sp_run(g, 0.0, SpConfig{.seed = seed});
  double warned = 0.0;
  for (double e : sp.state.eta) warned += e;
  std::cout << "SP(m=0)   converged=" << sp.converged << " mean eta = "
            << warned / static_cast<double>(sp.state.eta.size()) << '\n';

  SidConfig sc;
  sc.seed = seed;
  const auto r = sid(inst, sc);
  std::cout << "SID       " << to_string(r.status) << " after " << r.rounds.size()
            << " rounds, " << r.free_at_handoff << " free at hand-off\n";
  return r.status == SidStatus::Solved ? 0 : 1;
}
