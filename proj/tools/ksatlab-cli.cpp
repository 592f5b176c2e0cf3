// ksatlab-cli: instance generation, solvers, ensemble scans, population dynamics
// and the SK sandbox, each run leaving a JSON manifest that `replay` re-executes.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <locale>
#include <mutex>
#include <sstream>
#include <thread>

#include "ksatlab/bp.hpp"
#include "ksatlab/cavity.hpp"
#include "ksatlab/decimate.hpp"
#include "ksatlab/dimacs.hpp"
#include "ksatlab/sk.hpp"
#include "ksatlab/sp.hpp"

#ifndef KSATLAB_VERSION
#define KSATLAB_VERSION "dev"
#endif

using nlohmann::json;
using namespace ksat;

namespace {

constexpr int kExitSat = 10;
constexpr int kExitUnsat = 20;
constexpr int kCsvSchema = 1;

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path);
  f.imbue(std::locale::classic());
  f << std::setprecision(10);
  return f;
}

double parse_beta(const std::string& s) {
  if (s == "inf" || s == "infinity") return kInf;
  std::size_t pos = 0;
  const double b = std::stod(s, &pos);
  if (pos != s.size() || !(b >= 0.0)) throw Error(ErrorKind::InvalidParameters, "bad beta " + s);
  return b;
}

std::vector<double> parse_grid(const std::vector<std::string>& items, const char* what) {
  std::vector<double> out;
  for (const auto& it : items) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(it, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (it.empty() || pos != it.size() || !std::isfinite(v))
      throw Error(ErrorKind::InvalidParameters, std::string("bad value '") + it + "' in " + what);
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorKind::InvalidParameters, std::string("empty ") + what);
  return out;
}

// Runs f(0..count-1) on up to `jobs` threads; f must only write its own slot.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& f) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < count;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lk(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------------------
// manifest

struct Run {
  std::string subcommand;
  std::string manifest_path;
  json outputs = json::array();
  std::string started;
  int exit_code = 0;
  json extra = json::object();

  void output(const std::string& p) { outputs.push_back(p); }
};

// Effective value of every option of a subcommand, defaults included.
json collect_params(const CLI::App& sub) {
  json p = json::object();
  for (const CLI::Option* o : sub.get_options()) {
    const std::string name = o->get_single_name();
    if (name.empty() || name == "help" || name == "manifest") continue;
    if (o->get_expected_min() == 0) {
      p[name] = o->count() > 0;
    } else if (o->count() > 0) {
      const auto& r = o->results();
      if (o->get_expected_max() > 1) {
        p[name] = r;
      } else {
        p[name] = r.back();
      }
    } else if (!o->get_default_str().empty()) {
      p[name] = o->get_default_str();
    } else {
      p[name] = nullptr;
    }
  }
  return p;
}

void write_manifest(const CLI::App& sub, const Run& run) {
  json m;
  m["subcommand"] = run.subcommand;
  m["params"] = collect_params(sub);
  m["artifact_version"] = KSATLAB_VERSION;
  m["csv_schema"] = kCsvSchema;
  m["started"] = run.started;
  m["finished"] = now_utc();
  m["outputs"] = run.outputs;
  m["exit_code"] = run.exit_code;
  if (!run.extra.empty()) m["result"] = run.extra;
  std::ofstream f(run.manifest_path);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + run.manifest_path);
  f << m.dump(2) << '\n';
}

std::vector<std::string> replay_args(const json& manifest, const std::string& out_override) {
  std::vector<std::string> args{manifest.at("subcommand").get<std::string>()};
  for (const auto& [name, v] : manifest.at("params").items()) {
    if (v.is_null()) continue;
    if (v.is_boolean()) {
      if (v.get<bool>()) args.push_back("--" + name);
      continue;
    }
    if (name == "out" && !out_override.empty()) {
      args.push_back("--out");
      args.push_back(out_override);
      continue;
    }
    args.push_back("--" + name);
    if (v.is_array()) {
      for (const auto& x : v) args.push_back(x.get<std::string>());
    } else {
      args.push_back(v.get<std::string>());
    }
  }
  return args;
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
  std::size_t n = 0;
  std::size_t m = 0;
  double alpha = 0.0;
  std::size_t k = 3;
  std::string model = "uniform";
  std::uint64_t seed = 0;
  std::string out;
};

int run_gen(const GenArgs& a, CLI::App& sub, Run& run) {
  const CLI::Option* m_opt = sub.get_option("--m");
  const CLI::Option* a_opt = sub.get_option("--alpha");
  if (m_opt->count() == 0 && a_opt->count() == 0)
    throw Error(ErrorKind::InvalidParameters, "one of --m or --alpha is required");
  const std::size_t m = m_opt->count() ? a.m : clauses_for_density(a.alpha, a.n);
  CnfInstance inst;
  if (a.model == "planted") {
    auto p = gen_planted(a.n, m, a.k, a.seed);
    if (energy(p.instance, p.planted) != 0)
      throw Error(ErrorKind::InvalidParameters, "planted assignment violates the instance");
    auto f = open_out(a.out + ".planted");
    write_assignment(p.planted, f);
    run.output(a.out + ".planted");
    inst = std::move(p.instance);
  } else {
    inst = gen_uniform(a.n, m, a.k, a.seed);
  }
  write_dimacs(inst, a.out);
  run.output(a.out);
  InstanceMeta meta{a.n, m, a.k, a.seed, a.model};
  {
    auto f = open_out(a.out + ".meta.json");
    f << json(meta).dump(2) << '\n';
  }
  run.output(a.out + ".meta.json");
  run.extra["m"] = m;
  std::cout << "wrote " << a.out << " (n=" << a.n << " m=" << m << " k=" << a.k << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// solve

struct SolveArgs {
  std::string in;
  std::string algo = "bp-dec";
  std::uint64_t seed = 0;
  std::string beta = "inf";
  double m = 0.0;
  double damping = 0.2;
  double tol = 1e-7;
  std::size_t max_sweeps = 1000;
  double fix_fraction = 0.0;
  double noise = 0.5;
  std::uint64_t max_flips = 10000000;
  std::string out;
};

struct SolveOutcome {
  bool sat = false;
  bool info = false;
  SpinConfig assignment;
  std::size_t steps = 0;
  std::string status;
};

SolveOutcome solve_instance(const CnfInstance& inst, const SolveArgs& a, std::ostream* trace) {
  SolveOutcome o;
  if (a.algo == "dpll") {
    const auto r = dpll(inst, {.seed = a.seed});
    o.sat = r.sat;
    o.assignment = r.assignment;
    o.steps = r.nodes;
    o.status = r.sat ? "sat" : "unsat";
  } else if (a.algo == "walksat") {
    const auto r = walksat(inst, {.max_flips = a.max_flips, .noise = a.noise, .seed = a.seed});
    o.sat = r.solved;
    o.assignment = r.assignment;
    o.steps = r.flips;
    o.status = r.solved ? "sat" : "flip-limit";
  } else if (a.algo == "bp-dec") {
    DecimationConfig dc;
    dc.bp = {.max_sweeps = a.max_sweeps, .tol = a.tol, .damping = a.damping, .seed = a.seed};
    dc.beta = Beta{parse_beta(a.beta)};
    dc.fix_fraction = a.fix_fraction;
    dc.seed = a.seed;
    const auto tr = bp_guided_decimation(inst, dc);
    o.sat = tr.outcome == Outcome::Solution;
    o.assignment = tr.assignment;
    o.steps = tr.steps.size();
    o.status = to_string(tr.outcome);
    if (trace) write_trace_csv(tr, *trace);
  } else if (a.algo == "sid") {
    SidConfig sc;
    sc.m = a.m;
    sc.sp.max_sweeps = a.max_sweeps;
    sc.sp.tol = a.tol;
    sc.sp.damping = a.damping;
    sc.fix_fraction = a.fix_fraction;
    sc.walksat.noise = a.noise;
    sc.walksat.max_flips = a.max_flips;
    sc.seed = a.seed;
    const auto r = sid(inst, sc);
    o.sat = r.status == SidStatus::Solved;
    o.assignment = r.assignment;
    o.steps = r.rounds.size();
    o.status = to_string(r.status);
    if (trace) {
      *trace << "round,free_before,sp_sweeps,fixed,max_bias,phi\n";
      for (std::size_t i = 0; i < r.rounds.size(); ++i) {
        const auto& x = r.rounds[i];
        *trace << i << ',' << x.free_before << ',' << x.sp_sweeps << ',' << x.fixed << ','
               << x.max_bias << ',' << x.phi << '\n';
      }
    }
  } else if (a.algo == "sp") {
    // info only: surveys and variable biases
    const auto g = build(inst);
    const auto r = sp_run(g, a.m, {.max_sweeps = a.max_sweeps, .tol = a.tol, .damping = a.damping,
                                   .seed = a.seed});
    o.info = true;
    o.status = r.converged ? "converged" : "not-converged";
    o.steps = r.sweeps;
    if (trace) write_biases_csv(g, r.state, *trace);
  } else {
    throw Error(ErrorKind::InvalidParameters, "unknown algorithm " + a.algo);
  }
  if (o.sat && (o.assignment.size() != inst.n_vars || energy(inst, o.assignment) != 0))
    throw Error(ErrorKind::InvalidParameters, "solver returned an assignment that is not a solution");
  return o;
}

int run_solve(SolveArgs a, Run& run) {
  const auto inst = read_dimacs(a.in);
  if (a.out.empty()) a.out = a.in;
  const std::string trace_path = a.out + (a.algo == "sp" ? ".biases.csv" : ".trace.csv");
  const bool traced = a.algo == "bp-dec" || a.algo == "sid" || a.algo == "sp";
  std::ofstream trace;
  if (traced) {
    trace = open_out(trace_path);
    run.output(trace_path);
  }
  const auto o = solve_instance(inst, a, traced ? &trace : nullptr);
  run.extra["status"] = o.status;
  run.extra["steps"] = o.steps;
  if (o.info) {
    std::cout << "c " << a.algo << ' ' << o.status << " after " << o.steps << " sweeps\n";
    return 0;
  }
  if (o.sat) {
    auto f = open_out(a.out + ".sol");
    write_assignment(o.assignment, f);
    run.output(a.out + ".sol");
    std::cout << "s SATISFIABLE\n";
    return kExitSat;
  }
  std::cout << (a.algo == "dpll" ? "s UNSATISFIABLE\n" : "s UNKNOWN\n") << "c " << o.status << '\n';
  return kExitUnsat;
}

// ---------------------------------------------------------------------------
// scan

struct ScanArgs {
  std::size_t k = 3;
  std::vector<std::string> grid;
  std::vector<double> alpha_grid;
  std::size_t n = 1000;
  std::size_t seeds = 10;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool phi_theta = false;
  SolveArgs solver;
  std::string out;
};

int run_scan(ScanArgs a, Run& run) {
  a.alpha_grid = parse_grid(a.grid, "alpha grid");
  if (a.seeds == 0) throw Error(ErrorKind::InvalidParameters, "seeds must be >= 1");
  const std::size_t cells = a.alpha_grid.size() * a.seeds;
  std::vector<char> ok(cells, 0);
  std::vector<double> steps(cells, 0.0);
  parallel_for(cells, a.jobs, [&](std::size_t c) {
    const double alpha = a.alpha_grid[c / a.seeds];
    const std::uint64_t s = mix_seed(a.seed, c % a.seeds);
    const auto inst = gen_uniform(a.n, clauses_for_density(alpha, a.n), a.k, s);
    SolveArgs sa = a.solver;
    sa.seed = s;
    const auto o = solve_instance(inst, sa, nullptr);
    ok[c] = o.sat;
    steps[c] = static_cast<double>(o.steps);
  });
  auto f = open_out(a.out);
  f << "alpha,n,success_rate,stderr,mean_steps\n";
  for (std::size_t g = 0; g < a.alpha_grid.size(); ++g) {
    double hits = 0.0, st = 0.0;
    for (std::size_t r = 0; r < a.seeds; ++r) {
      hits += ok[g * a.seeds + r];
      st += steps[g * a.seeds + r];
    }
    const double n = static_cast<double>(a.seeds);
    const double p = hits / n;
    f << a.alpha_grid[g] << ',' << a.n << ',' << p << ',' << std::sqrt(p * (1.0 - p) / n) << ','
      << st / n << '\n';
  }
  run.output(a.out);
  if (a.phi_theta) {
    // frozen-variable bookkeeping along BP-guided and random decimation
    std::vector<std::vector<PhiThetaPoint>> curves(2 * a.alpha_grid.size());
    parallel_for(curves.size(), a.jobs, [&](std::size_t c) {
      PhiThetaConfig pc;
      pc.n = a.n;
      pc.alpha = a.alpha_grid[c / 2];
      pc.k = a.k;
      pc.seeds = a.seeds;
      pc.seed = a.seed;
      pc.bp_guided = c % 2 == 0;
      pc.decimation.bp = {.max_sweeps = a.solver.max_sweeps, .tol = a.solver.tol,
                          .damping = a.solver.damping};
      pc.decimation.fix_fraction = a.solver.fix_fraction;
      curves[c] = measure_phi_theta(pc);
    });
    for (std::size_t c = 0; c < curves.size(); ++c) {
      std::ostringstream name;
      name << a.out << ".phi_theta." << (c % 2 == 0 ? "bp" : "random") << ".alpha"
           << a.alpha_grid[c / 2] << ".csv";
      auto g = open_out(name.str());
      write_phi_theta_csv(curves[c], g);
      run.output(name.str());
    }
  }
  std::cout << "wrote " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// pd and transitions

struct PdArgs {
  std::size_t k = 3;
  std::vector<std::string> alphas;
  std::vector<std::string> ms{"1"};
  std::vector<double> alpha_grid;
  std::vector<double> m_grid;
  std::size_t pool = 10000;
  std::size_t sweeps = 200;
  std::uint64_t seed = 0;
  std::string beta = "inf";
  std::string method = "hf";
  bool rs = false;
  bool cold = false;
  std::size_t jobs = 1;
  std::string out;
};

int run_pd(PdArgs a, CLI::App& sub, Run& run) {
  const CLI::Option* one = sub.get_option("--alpha");
  if (one->count()) a.alphas = {one->as<std::string>()};
  a.alpha_grid = parse_grid(a.alphas, "alpha grid");
  const CLI::Option* mo = sub.get_option("--m");
  if (mo->count()) a.ms = {mo->as<std::string>()};
  a.m_grid = parse_grid(a.ms, "m grid");
  for (double m : a.m_grid)
    if (!(m >= 0.0 && m <= 1.0)) throw Error(ErrorKind::InvalidParameters, "m must lie in [0, 1]");
  EnsembleParams base;
  base.k = a.k;
  base.pool = a.pool;
  base.sweeps = a.sweeps;
  base.seed = a.seed;
  base.beta = Beta{parse_beta(a.beta)};
  auto f = open_out(a.out);
  if (a.rs) {
    std::vector<RsResult> res(a.alpha_grid.size());
    parallel_for(res.size(), a.jobs, [&](std::size_t i) {
      EnsembleParams p = base;
      p.alpha = a.alpha_grid[i];
      res[i] = pd_rs(p);
    });
    f << "alpha,omega,stderr,q_rs,pool,sweeps,seed\n";
    for (std::size_t i = 0; i < res.size(); ++i)
      f << a.alpha_grid[i] << ',' << res[i].omega << ',' << res[i].omega_stderr << ','
        << res[i].q_rs << ',' << a.pool << ',' << a.sweeps << ',' << a.seed << '\n';
  } else if (a.method == "reconstruction") {
    for (double m : a.m_grid)
      if (m != 1.0) throw Error(ErrorKind::InvalidParameters, "reconstruction needs m = 1");
    std::vector<OneRsbResult> res(a.alpha_grid.size());
    parallel_for(res.size(), a.jobs, [&](std::size_t i) {
      EnsembleParams p = base;
      p.alpha = a.alpha_grid[i];
      res[i] = pd_1rsb(p, 1.0, {.method = OneRsbMethod::Reconstruction});
    });
    f << "alpha,m,phi,sigma,q0,q1,sigma_stderr,converged,trivial,pool,sweeps,seed\n";
    for (std::size_t i = 0; i < res.size(); ++i) {
      const auto& r = res[i];
      f << a.alpha_grid[i] << ",1," << r.phi << ',' << r.sigma << ',' << r.q0 << ',' << r.q1 << ','
        << r.sigma_stderr << ',' << r.converged << ',' << r.trivial << ',' << a.pool << ','
        << a.sweeps << ',' << a.seed << '\n';
    }
  } else if (a.method == "hf") {
    std::vector<std::vector<ComplexityRow>> rows(a.alpha_grid.size());
    parallel_for(rows.size(), a.jobs, [&](std::size_t i) {
      const double alpha = a.alpha_grid[i];
      if (a.cold) {
        for (double m : a.m_grid) {
          auto r = complexity_curve(a.k, alpha, {m}, base);
          rows[i].push_back(r.front());
        }
      } else {
        rows[i] = complexity_curve(a.k, alpha, a.m_grid, base);
      }
    });
    std::vector<ComplexityRow> all;
    for (auto& r : rows) all.insert(all.end(), r.begin(), r.end());
    write_complexity_csv(all, f);
  } else {
    throw Error(ErrorKind::InvalidParameters, "unknown method " + a.method);
  }
  run.output(a.out);
  std::cout << "wrote " << a.out << '\n';
  return 0;
}

struct TransitionArgs {
  std::size_t k = 4;
  std::vector<std::string> alpha_grid;
  std::size_t pool = 10000;
  std::size_t sweeps = 200;
  std::size_t bisect = 3;
  std::uint64_t seed = 0;
  std::string out;
};

int run_transitions(const TransitionArgs& a, Run& run) {
  TransitionConfig cfg;
  cfg.alpha_grid = parse_grid(a.alpha_grid, "alpha grid");
  cfg.pool = a.pool;
  cfg.sweeps = a.sweeps;
  cfg.bisect_steps = a.bisect;
  cfg.seed = a.seed;
  const auto t = locate_transitions(a.k, cfg);
  {
    auto f = open_out(a.out);
    write_transitions_csv(t, f);
  }
  run.output(a.out);
  const std::string est = a.out + ".estimates.csv";
  auto f = open_out(est);
  f << "transition,found,value,uncertainty\n";
  const std::pair<const char*, const TransitionEstimate*> rows[] = {
      {"alpha_d", &t.alpha_d}, {"alpha_c", &t.alpha_c}, {"alpha_s", &t.alpha_s}};
  for (const auto& [name, e] : rows) {
    f << name << ',' << e->found << ',' << e->value << ',' << e->uncertainty << '\n';
    std::cout << name << ' ';
    if (e->found)
      std::cout << e->value << " +- " << e->uncertainty << '\n';
    else
      std::cout << "not bracketed\n";
    run.extra[name] = e->found ? json(e->value) : json(nullptr);
  }
  run.output(est);
  return 0;
}

// ---------------------------------------------------------------------------
// sk

struct SkArgs {
  std::size_t n = 400;
  std::size_t samples = 100;
  std::size_t repeats = 100;
  double t_start = 1.2 * kSkCriticalTemperature;
  double t_end = 0.12;
  std::size_t steps = 1000;
  double reheat = 1.5;
  std::size_t resample_steps = 20;
  double eps = 0.1;
  std::uint64_t seed = 0;
  std::string out;
};

int run_sk(const SkArgs& a, Run& run) {
  PureStateConfig pc;
  pc.samples = a.samples;
  pc.repeats = a.repeats;
  pc.schedule = {.t_start = a.t_start, .t_end = a.t_end, .steps = a.steps};
  pc.reheat = a.reheat;
  pc.resample_steps = a.resample_steps;
  pc.seed = mix_seed(a.seed, 1);
  validate(pc.schedule);
  const auto sys = SkSystem::random(a.n, a.seed);
  const auto states = sample_pure_states(sys, pc);
  const auto q = overlap_matrix(states);
  const auto res = cluster_and_score(q, a.eps);
  {
    auto f = open_out(a.out + ".overlap.csv");
    write_overlap_csv(q, f);
  }
  {
    auto f = open_out(a.out + ".dendrogram.csv");
    write_dendrogram_csv(res.dendrogram, f);
  }
  {
    auto f = open_out(a.out + ".score.csv");
    f << "n,samples,t_end,q_ea,eps,score\n"
      << a.n << ',' << a.samples << ',' << a.t_end << ',' << q.q_ea() << ',' << a.eps << ','
      << res.ultrametricity_score << '\n';
  }
  for (const char* s : {".overlap.csv", ".dendrogram.csv", ".score.csv"}) run.output(a.out + s);
  run.extra["score"] = res.ultrametricity_score;
  std::cout << "ultrametricity " << res.ultrametricity_score << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

void add_solver_flags(CLI::App* s, SolveArgs& a) {
  s->add_option("--algo", a.algo, "bp-dec | sid | dpll | walksat | sp (info only)")
      ->check(CLI::IsMember({"bp-dec", "sid", "dpll", "walksat", "sp"}))
      ->capture_default_str();
  s->add_option("--beta", a.beta, "inverse temperature for bp-dec, or inf")->capture_default_str();
  s->add_option("--m", a.m, "Parisi parameter for sid / sp")->capture_default_str();
  s->add_option("--damping", a.damping)->capture_default_str();
  s->add_option("--tol", a.tol)->capture_default_str();
  s->add_option("--max-sweeps", a.max_sweeps)->capture_default_str();
  s->add_option("--fix-fraction", a.fix_fraction, "variables fixed per message-passing run")
      ->capture_default_str();
  s->add_option("--noise", a.noise, "walksat noise")->capture_default_str();
  s->add_option("--max-flips", a.max_flips)->capture_default_str();
}

int dispatch(const std::vector<std::string>& argv_tail, int depth = 0);

int dispatch(const std::vector<std::string>& argv_tail, int depth) {
  CLI::App app{"random K-SAT lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", KSATLAB_VERSION);
  std::string manifest;

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a random instance");
  g->add_option("--n", gen.n)->required();
  auto* gm = g->add_option("--m", gen.m);
  auto* ga = g->add_option("--alpha", gen.alpha, "m = ceil(alpha n)");
  gm->excludes(ga);
  g->add_option("--k", gen.k)->capture_default_str();
  g->add_option("--model", gen.model)->check(CLI::IsMember({"uniform", "planted"}))->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--out", gen.out)->required();

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "solve a DIMACS instance; exit 10 SAT, 20 UNSAT or failure");
  s->add_option("--in", solve.in)->required()->check(CLI::ExistingFile);
  add_solver_flags(s, solve);
  s->add_option("--seed", solve.seed)->capture_default_str();
  s->add_option("--out", solve.out, "output prefix, defaults to the input path");

  ScanArgs scan;
  scan.solver.max_flips = 1000000;
  auto* sc = app.add_subcommand("scan", "success probability over an alpha grid");
  sc->add_option("--k", scan.k)->capture_default_str();
  sc->add_option("--alpha-grid", scan.grid)->required()->delimiter(',');
  sc->add_option("--n", scan.n)->capture_default_str();
  sc->add_option("--seeds", scan.seeds)->capture_default_str();
  sc->add_option("--seed", scan.seed)->capture_default_str();
  sc->add_option("--jobs", scan.jobs)->capture_default_str();
  sc->add_flag("--phi-theta", scan.phi_theta, "also write frozen-variable curves");
  add_solver_flags(sc, scan.solver);
  sc->add_option("--out", scan.out)->required();

  PdArgs pd;
  auto* p = app.add_subcommand("pd", "population dynamics on the random ensemble");
  p->add_option("--k", pd.k)->capture_default_str();
  auto* pa = p->add_option("--alpha", "single density");
  auto* pg = p->add_option("--alpha-grid", pd.alphas)->delimiter(',');
  pa->excludes(pg);
  auto* pm = p->add_option("--m", "single Parisi parameter");
  auto* pmg = p->add_option("--m-grid", pd.ms)->delimiter(',')->capture_default_str();
  pm->excludes(pmg);
  p->add_option("--pool", pd.pool)->capture_default_str();
  p->add_option("--sweeps", pd.sweeps)->capture_default_str();
  p->add_option("--seed", pd.seed)->capture_default_str();
  p->add_option("--beta", pd.beta, "RS only")->capture_default_str();
  p->add_option("--method", pd.method)->check(CLI::IsMember({"hf", "reconstruction"}))->capture_default_str();
  p->add_flag("--rs", pd.rs, "replica-symmetric free entropy instead of 1RSB");
  p->add_flag("--cold", pd.cold, "start every m from a fresh population");
  p->add_option("--jobs", pd.jobs)->capture_default_str();
  p->add_option("--out", pd.out)->required();

  TransitionArgs tr;
  auto* t = app.add_subcommand("transitions", "locate alpha_d, alpha_c, alpha_s");
  t->add_option("--k", tr.k)->capture_default_str();
  t->add_option("--alpha-grid", tr.alpha_grid)->required()->delimiter(',');
  t->add_option("--pool", tr.pool)->capture_default_str();
  t->add_option("--sweeps", tr.sweeps)->capture_default_str();
  t->add_option("--bisect", tr.bisect)->capture_default_str();
  t->add_option("--seed", tr.seed)->capture_default_str();
  t->add_option("--out", tr.out)->required();

  SkArgs sk;
  auto* k = app.add_subcommand("sk", "SK pure states, overlaps and clustering");
  k->add_option("--n", sk.n)->capture_default_str();
  k->add_option("--samples", sk.samples)->capture_default_str();
  k->add_option("--repeats", sk.repeats)->capture_default_str();
  k->add_option("--t-start", sk.t_start)->capture_default_str();
  k->add_option("--t-end", sk.t_end)->capture_default_str();
  k->add_option("--steps", sk.steps)->capture_default_str();
  k->add_option("--reheat", sk.reheat)->capture_default_str();
  k->add_option("--resample-steps", sk.resample_steps)->capture_default_str();
  k->add_option("--eps", sk.eps, "relative tolerance of the isosceles test")->capture_default_str();
  k->add_option("--seed", sk.seed)->capture_default_str();
  k->add_option("--out", sk.out, "output prefix")->required();

  std::string replay_path, replay_out;
  auto* r = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  r->add_option("manifest", replay_path)->required()->check(CLI::ExistingFile);
  r->add_option("--out", replay_out, "redirect outputs");

  for (auto* sub : {g, s, sc, p, t, k})
    sub->add_option("--manifest", manifest, "manifest path, defaults to <out>.manifest.json");

  std::vector<std::string> rev(argv_tail.rbegin(), argv_tail.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (r->parsed()) {
    if (depth > 0) throw Error(ErrorKind::InvalidParameters, "nested replay");
    std::ifstream f(replay_path);
    const json m = json::parse(f);
    return dispatch(replay_args(m, replay_out), depth + 1);
  }

  CLI::App* sub = app.get_subcommands().front();
  Run run;
  run.subcommand = sub->get_name();
  run.started = now_utc();
  std::string out;
  if (sub == g) out = gen.out;
  if (sub == s) out = solve.out.empty() ? solve.in : solve.out;
  if (sub == sc) out = scan.out;
  if (sub == p) out = pd.out;
  if (sub == t) out = tr.out;
  if (sub == k) out = sk.out;
  run.manifest_path = manifest.empty() ? out + ".manifest.json" : manifest;

  if (sub == g) run.exit_code = run_gen(gen, *g, run);
  if (sub == s) run.exit_code = run_solve(solve, run);
  if (sub == sc) run.exit_code = run_scan(scan, run);
  if (sub == p) run.exit_code = run_pd(pd, *p, run);
  if (sub == t) run.exit_code = run_transitions(tr, run);
  if (sub == k) run.exit_code = run_sk(sk, run);
  write_manifest(*sub, run);
  return run.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  std::cout.imbue(std::locale::classic());
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return dispatch(args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
