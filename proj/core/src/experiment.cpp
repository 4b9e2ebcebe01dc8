#include "bilevel/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include "bilevel/analysis.hpp"
#include "bilevel/itd.hpp"
#include "bilevel/parallel.hpp"
#include "bilevel/registry.hpp"
#include "bilevel/stability.hpp"
#include "bilevel/validate.hpp"

namespace fs = std::filesystem;

namespace bilevel {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int effective_workers(const CliOptions& opts) {
  if (opts.workers > 0) return opts.workers;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

fs::path ensure_out_dir(const CliOptions& opts) {
  fs::path dir = opts.out_dir;
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open output file " + path.string());
  f << content;
}

ProblemSpec problem_spec_from(const ExperimentConfig& cfg) {
  ProblemSpec spec;
  spec.name = cfg.require("problem.name");
  for (const auto& [k, v] : cfg.raw())
    if (k.rfind("problem.", 0) == 0 && k != "problem.name")
      spec.params[k.substr(8)] = v;
  return spec;
}

Vec parse_x0(const std::string& text, const Problem& p) {
  if (text == "zeros") return Vec::Zero(p.dx());
  if (text == "identity") {
    const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(p.dx()))));
    if (d * d != p.dx())
      throw ConfigError("solver.x0 = identity needs a square-matrix upper variable");
    Vec x = Vec::Zero(p.dx());
    for (int i = 0; i < d; ++i) x[i * d + i] = 1.0;
    return x;
  }
  throw ConfigError("solver.x0: expected 'zeros' or 'identity', got '" + text + "'");
}

SolverConfig solver_from(const ExperimentConfig& cfg, const Problem& p) {
  SolverConfig sc;
  sc.T = cfg.get_int("solver.T", 1000);
  sc.K = cfg.get_int("solver.K", 10);
  sc.eta_z = cfg.get_double("solver.eta_z", 0.01);
  sc.eta_x = parse_schedule(cfg.get("solver.eta_x", "constant:0.01"), sc.T);
  sc.eta_y = parse_schedule(cfg.get("solver.eta_y", "constant:0.01"), sc.T);
  sc.eta_m = parse_schedule(cfg.get("solver.eta_m", "constant:0.01"), sc.T);
  sc.seed = static_cast<uint64_t>(cfg.get_int("solver.seed", 0));
  sc.batch = cfg.get_int("solver.batch", 1);
  sc.record_every = cfg.get_int("solver.record_every", 1);
  sc.full_batch = cfg.get_bool("solver.full_batch", false);
  sc.record_grad_oracle = cfg.get_bool("solver.record_grad_oracle", false);
  sc.record_y_dist = cfg.get_bool("solver.record_y_dist", false);
  if (cfg.has("solver.x0")) sc.x0 = parse_x0(cfg.require("solver.x0"), p);
  sc.validate();
  return sc;
}

struct NamedScheduleSpec {
  std::string name;
  std::string spec;  // bound to a horizon later
};

// sweep.schedules = name=constant:0.01;name2=diminishing:2:1000
std::vector<NamedScheduleSpec> parse_schedule_axis(const ExperimentConfig& cfg) {
  std::vector<NamedScheduleSpec> out;
  const std::string raw = cfg.get("sweep.schedules", "");
  if (raw.empty()) return out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    const auto eq = cur.find('=');
    if (eq == std::string::npos)
      throw ConfigError("sweep.schedules: expected name=spec, got '" + cur + "'");
    out.push_back({cur.substr(0, eq), cur.substr(eq + 1)});
    cur.clear();
  };
  for (char ch : raw) {
    if (ch == ';')
      flush();
    else if (ch != ' ')
      cur.push_back(ch);
  }
  flush();
  return out;
}

ScheduleTriple bind_triple(const NamedScheduleSpec& s, int horizon) {
  const Schedule sch = parse_schedule(s.spec, horizon);
  return {s.name, sch, sch, sch};
}

std::vector<int> seeds_from(const ExperimentConfig& cfg, const CliOptions& opts) {
  std::vector<int> seeds = cfg.get_int_list("run.seeds");
  if (seeds.empty()) seeds.push_back(cfg.get_int("solver.seed", 0));
  for (auto& s : seeds) s += static_cast<int>(opts.seed_offset);
  return seeds;
}

double gap_or_nan(const Problem& p, const Vec& x) {
  return p.has_ground_truth() ? p.ground_truth_gap(x)
                              : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

int cmd_run(const ExperimentConfig& cfg, const CliOptions& opts) {
  cfg.validate_keys("run");
  const fs::path out = ensure_out_dir(opts);
  const std::string run_name = cfg.get("run.name", "run");
  const ProblemSpec base_spec = problem_spec_from(cfg);
  const std::string kind = cfg.get("solver.kind", "aid");
  if (kind != "aid" && kind != "itd")
    throw ConfigError("solver.kind: expected 'aid' or 'itd', got '" + kind + "'");

  std::vector<int> n_values = cfg.get_int_list("sweep.n");
  const bool has_n_axis = !n_values.empty();
  if (!has_n_axis) n_values.push_back(-1);  // single cell with the configured problem

  std::vector<NamedScheduleSpec> sched_axis = parse_schedule_axis(cfg);
  const bool has_sched_axis = !sched_axis.empty();
  const std::vector<int> seeds = seeds_from(cfg, opts);

  struct Cell {
    std::string label;
    ProblemPtr problem;
    SolverConfig solver;
  };
  std::vector<Cell> cells;
  for (int n : n_values) {
    ProblemSpec spec = base_spec;
    if (n > 0) spec.params["n"] = std::to_string(n);
    ProblemPtr problem = make_problem(spec);
    SolverConfig sc = solver_from(cfg, *problem);
    if (has_sched_axis) {
      for (const auto& s : sched_axis) {
        Cell c;
        c.label = (n > 0 ? "n" + std::to_string(n) + "_" : "") + s.name;
        c.problem = problem;
        c.solver = sc;
        const ScheduleTriple tr = bind_triple(s, sc.T);
        c.solver.eta_x = tr.x;
        c.solver.eta_y = tr.y;
        c.solver.eta_m = tr.m;
        cells.push_back(std::move(c));
      }
    } else {
      Cell c;
      c.label = n > 0 ? "n" + std::to_string(n) : "default";
      c.problem = problem;
      c.solver = sc;
      cells.push_back(std::move(c));
    }
  }

  struct Job {
    size_t cell;
    int seed;
  };
  std::vector<Job> jobs;
  for (size_t ci = 0; ci < cells.size(); ++ci)
    for (int s : seeds) jobs.push_back({ci, s});

  std::vector<RunTrace> traces(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), effective_workers(opts), [&](int ji) {
    const Job& job = jobs[static_cast<size_t>(ji)];
    const Cell& cell = cells[job.cell];
    SolverConfig sc = cell.solver;
    sc.seed = static_cast<uint64_t>(job.seed);
    traces[static_cast<size_t>(ji)] =
        kind == "aid" ? aid_run(*cell.problem, sc) : itd_run(*cell.problem, sc);
  });

  bool any_abort = false;
  std::ostringstream summary;
  summary << "name,cell,seed,final_phi,min_grad_norm_sq,final_gap,aborted\n";
  for (size_t ji = 0; ji < jobs.size(); ++ji) {
    const Job& job = jobs[ji];
    const Cell& cell = cells[job.cell];
    const RunTrace& tr = traces[ji];
    tr.write_csv_file(
        (out / (run_name + "_" + cell.label + "_seed" + std::to_string(job.seed) + ".csv"))
            .string());
    any_abort = any_abort || tr.aborted;
    const double gap =
        tr.points.empty() ? std::numeric_limits<double>::quiet_NaN()
                          : gap_or_nan(*cell.problem, tr.points.back().x);
    summary << run_name << ',' << cell.label << ',' << job.seed << ','
            << fmt17(tr.final_phi()) << ',' << fmt17(tr.min_grad_norm_sq()) << ','
            << fmt17(gap) << ',' << (tr.aborted ? 1 : 0) << '\n';
  }
  write_file(out / (run_name + "_summary.csv"), summary.str());

  // per-cell panels: seed-averaged objective and ground-truth gap per recorded step
  for (size_t ci = 0; ci < cells.size(); ++ci) {
    if (seeds.size() < 2) break;
    std::vector<const RunTrace*> cell_traces;
    for (size_t ji = 0; ji < jobs.size(); ++ji)
      if (jobs[ji].cell == ci && !traces[ji].aborted) cell_traces.push_back(&traces[ji]);
    if (cell_traces.size() < 2) continue;
    size_t rows = cell_traces[0]->points.size();
    for (const auto* t : cell_traces) rows = std::min(rows, t->points.size());
    std::ostringstream panel;
    panel << "t,mean_phi,mean_gap\n";
    for (size_t r = 0; r < rows; ++r) {
      double phi = 0.0, gap = 0.0;
      for (const auto* t : cell_traces) {
        phi += t->points[r].phi;
        gap += gap_or_nan(*cells[ci].problem, t->points[r].x);
      }
      panel << cell_traces[0]->points[r].t << ',' << fmt17(phi / cell_traces.size()) << ','
            << fmt17(gap / cell_traces.size()) << '\n';
    }
    write_file(out / (run_name + "_" + cells[ci].label + "_panel.csv"), panel.str());
  }

  if (any_abort) {
    std::cerr << "run: at least one trace aborted; partial outputs kept\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_stability(const ExperimentConfig& cfg, const CliOptions& opts) {
  cfg.validate_keys("stability");
  const fs::path out = ensure_out_dir(opts);
  const std::string run_name = cfg.get("run.name", "stability");
  const ProblemSpec base_spec = problem_spec_from(cfg);

  ProblemPtr probe_problem = make_problem(base_spec);
  SolverConfig base_cfg = solver_from(cfg, *probe_problem);

  std::vector<int> n_list = cfg.get_int_list("sweep.n");
  if (n_list.empty()) n_list.push_back(probe_problem->n_upper());
  std::vector<int> t_list = cfg.get_int_list("sweep.T");
  if (t_list.empty()) t_list.push_back(base_cfg.T);

  std::vector<ScheduleTriple> schedules;
  for (const auto& s : parse_schedule_axis(cfg)) schedules.push_back(bind_triple(s, base_cfg.T));
  if (schedules.empty())
    schedules.push_back({"default", base_cfg.eta_x, base_cfg.eta_y, base_cfg.eta_m});

  SweepOptions so;
  so.pairs_per_cell = cfg.get_int("stability.pairs", 20);
  const std::string swap = cfg.get("stability.swap_index", "0");
  if (swap == "random")
    so.randomize_swap = true;
  else
    so.swap_index = std::stoi(swap);
  so.probe_count = cfg.get_int("stability.probe_count", 100);
  so.base_seed = static_cast<uint64_t>(cfg.get_int("stability.base_seed", 1)) + opts.seed_offset;
  so.force_identical = cfg.get_bool("stability.force_identical", false);
  so.workers = effective_workers(opts);

  auto gen_for_n = [base_spec](int n) {
    ProblemSpec spec = base_spec;
    spec.params["n"] = std::to_string(n);
    return make_problem_gen(spec);
  };

  const StabilityReport report =
      stability_sweep(gen_for_n, n_list, schedules, t_list, base_cfg, so);

  std::ostringstream pairs, cells, fits;
  write_pairs_csv(pairs, report);
  write_cells_csv(cells, report);
  write_fits_csv(fits, report);
  write_file(out / (run_name + "_pairs.csv"), pairs.str());
  write_file(out / (run_name + "_cells.csv"), cells.str());
  write_file(out / (run_name + "_fits.csv"), fits.str());
  return kExitOk;
}

int cmd_check(const ExperimentConfig& cfg, const CliOptions& opts) {
  cfg.validate_keys("check");
  const fs::path out = ensure_out_dir(opts);
  const std::string run_name = cfg.get("run.name", "check");
  ProblemPtr problem = make_problem(problem_spec_from(cfg));
  const SolverConfig sc = solver_from(cfg, *problem);
  const ProblemConstants k = problem->constants();
  const int T = cfg.get_int("check.T", sc.T);
  const int n = cfg.get_int("check.n", problem->n_upper());
  const double z0_norm = cfg.get_double("check.z0_norm", 0.0);

  const BoundReport report =
      make_bound_report(sc.eta_x, sc.eta_y, sc.eta_m, k, sc.eta_z, T, n, z0_norm);
  std::cout << "problem: " << problem->name() << "  (domain: " << k.domain_note << ")\n"
            << "constants: L0=" << k.L0 << " L1=" << k.L1 << " L2=" << k.L2 << " mu=" << k.mu
            << " D0=" << k.D0 << " D1=" << k.D1 << '\n'
            << report.to_text();
  std::ostringstream kv;
  report.write_kv(kv);
  write_file(out / (run_name + "_bound.kv"), kv.str());
  return report.admissible ? kExitOk : kExitCondition;
}

int cmd_grad_check(const ExperimentConfig& cfg, const CliOptions& opts) {
  cfg.validate_keys("grad-check");
  const fs::path out = ensure_out_dir(opts);
  const std::string run_name = cfg.get("run.name", "grad_check");
  ProblemPtr problem = make_problem(problem_spec_from(cfg));
  const int points = cfg.get_int("grad_check.points", 10);
  std::vector<int> k_list = cfg.get_int_list("grad_check.k_list");
  if (k_list.empty()) k_list = {1, 2, 4, 8, 16, 32, 64};
  RngStream rng(static_cast<uint64_t>(cfg.get_int("grad_check.seed", 0)) + opts.seed_offset,
                StreamId::kData);
  const Domain domain = problem->default_domain();

  std::ostringstream csv;
  csv << "point,K,exact_first,exact_norm,rel_fd_vs_exact,rel_aid_vs_exact,rel_itd_vs_exact\n";
  std::cout << "point  K   exact[0]      |exact|       fd-rel        aid-rel       itd-rel\n";
  for (int pi = 0; pi < points; ++pi) {
    const Vec x = domain.sample_x(rng);
    const HypergradResult ex = exact_hypergradient(*problem, x);
    const Vec fd = fd_phi_gradient(*problem, x);
    const double rel_fd = rel_err(fd, ex.grad);
    for (int K : k_list) {
      const Vec aid = aid_hypergradient_estimate(*problem, x, ex.y_star, K);
      const Vec itd = itd_hypergradient_estimate(*problem, x, problem->initial_y(), K);
      const double rel_aid = rel_err(aid, ex.grad);
      const double rel_itd = rel_err(itd, ex.grad);
      csv << pi << ',' << K << ',' << fmt17(ex.grad[0]) << ',' << fmt17(ex.grad.norm()) << ','
          << fmt17(rel_fd) << ',' << fmt17(rel_aid) << ',' << fmt17(rel_itd) << '\n';
      char line[160];
      std::snprintf(line, sizeof line, "%4d %4d  %12.5g  %12.5g  %12.5g  %12.5g  %12.5g\n",
                    pi, K, ex.grad[0], ex.grad.norm(), rel_fd, rel_aid, rel_itd);
      std::cout << line;
    }
  }
  write_file(out / (run_name + ".csv"), csv.str());
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& cfg, const CliOptions& opts) {
  cfg.validate_keys("sweep");
  const fs::path out = ensure_out_dir(opts);
  const std::string run_name = cfg.get("run.name", "sweep");
  const ProblemSpec base_spec = problem_spec_from(cfg);
  const std::string kind = cfg.get("solver.kind", "aid");

  ProblemPtr probe_problem = make_problem(base_spec);
  const SolverConfig proto = solver_from(cfg, *probe_problem);

  std::vector<int> n_list = cfg.get_int_list("sweep.n");
  if (n_list.empty()) n_list.push_back(-1);
  std::vector<int> t_list = cfg.get_int_list("sweep.T");
  if (t_list.empty()) t_list.push_back(proto.T);
  std::vector<int> k_list = cfg.get_int_list("sweep.K");
  if (!k_list.empty() && k_list.size() != t_list.size())
    throw ConfigError("sweep.K must be empty or match sweep.T in length");
  std::vector<NamedScheduleSpec> sched_axis = parse_schedule_axis(cfg);
  const std::vector<int> seeds = seeds_from(cfg, opts);

  struct Job {
    int n, T, K, seed;
    std::string sched_name;
    ProblemPtr problem;
    SolverConfig solver;
  };
  std::vector<Job> jobs;
  for (int n : n_list) {
    ProblemSpec spec = base_spec;
    if (n > 0) spec.params["n"] = std::to_string(n);
    ProblemPtr problem = make_problem(spec);
    for (size_t ti = 0; ti < t_list.size(); ++ti) {
      const int T = t_list[ti];
      const int K = k_list.empty() ? proto.K : k_list[ti];
      std::vector<std::pair<std::string, ScheduleTriple>> tr_list;
      if (sched_axis.empty())
        tr_list.emplace_back("default",
                             ScheduleTriple{"default", proto.eta_x, proto.eta_y, proto.eta_m});
      else
        for (const auto& s : sched_axis) tr_list.emplace_back(s.name, bind_triple(s, T));
      for (const auto& [sname, tr] : tr_list)
        for (int seed : seeds) {
          Job j;
          j.n = problem->n_upper();
          j.T = T;
          j.K = K;
          j.seed = seed;
          j.sched_name = sname;
          j.problem = problem;
          j.solver = proto;
          j.solver.T = T;
          j.solver.K = K;
          j.solver.eta_x = tr.x;
          j.solver.eta_y = tr.y;
          j.solver.eta_m = tr.m;
          j.solver.seed = static_cast<uint64_t>(seed);
          jobs.push_back(std::move(j));
        }
    }
  }

  std::vector<RunTrace> traces(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), effective_workers(opts), [&](int ji) {
    const Job& j = jobs[static_cast<size_t>(ji)];
    traces[static_cast<size_t>(ji)] =
        kind == "aid" ? aid_run(*j.problem, j.solver) : itd_run(*j.problem, j.solver);
  });

  bool any_abort = false;
  std::ostringstream metrics;
  metrics << "n,schedule,T,K,seed,min_grad_norm_sq,final_phi,final_gap,aborted\n";
  std::map<std::pair<int, std::string>, std::vector<std::pair<int, double>>> fit_groups;
  for (size_t ji = 0; ji < jobs.size(); ++ji) {
    const Job& j = jobs[ji];
    const RunTrace& tr = traces[ji];
    any_abort = any_abort || tr.aborted;
    const double min_grad = tr.min_grad_norm_sq();
    const double gap = tr.points.empty()
                           ? std::numeric_limits<double>::quiet_NaN()
                           : gap_or_nan(*j.problem, tr.points.back().x);
    metrics << j.n << ',' << j.sched_name << ',' << j.T << ',' << j.K << ',' << j.seed << ','
            << fmt17(min_grad) << ',' << fmt17(tr.final_phi()) << ',' << fmt17(gap) << ','
            << (tr.aborted ? 1 : 0) << '\n';
    if (!tr.aborted && std::isfinite(min_grad))
      fit_groups[{j.n, j.sched_name}].emplace_back(j.T, min_grad);
  }
  write_file(out / (run_name + "_metrics.csv"), metrics.str());

  std::ostringstream fits;
  fits << "n,schedule,slope,intercept,ci95_half_width,points_used\n";
  for (const auto& [key, pts] : fit_groups) {
    std::vector<int> distinct;
    for (const auto& [T, v] : pts) {
      (void)v;
      if (std::find(distinct.begin(), distinct.end(), T) == distinct.end()) distinct.push_back(T);
    }
    if (distinct.size() < 3) continue;
    const PowerLawFit f = convergence_rate_summary(pts);
    fits << key.first << ',' << key.second << ',' << fmt17(f.slope) << ','
         << fmt17(f.intercept) << ',' << fmt17(f.ci95_half_width) << ',' << f.points_used
         << '\n';
  }
  write_file(out / (run_name + "_fits.csv"), fits.str());

  return any_abort ? kExitRuntime : kExitOk;
}

}  // namespace bilevel
