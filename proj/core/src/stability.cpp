#include "bilevel/stability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "bilevel/parallel.hpp"

namespace bilevel {

namespace {
constexpr uint64_t kSwapStreamId = 7;  // replacement-draw stream, fixed offset
}

CoupledPair make_coupled_pair(const ProblemGen& gen, int swap_index, uint64_t data_seed,
                              bool force_identical) {
  CoupledPair pair;
  pair.base = gen(data_seed);
  if (swap_index < 0 || swap_index >= pair.base->n_upper())
    throw std::out_of_range("make_coupled_pair: swap index out of range");
  pair.swap_index = swap_index;
  pair.data_seed = data_seed;
  pair.forced_identical = force_identical;
  if (force_identical) {
    pair.perturbed = gen(data_seed);  // same dataset, regenerated bit-identically
  } else {
    RngStream swap_rng(data_seed, kSwapStreamId);
    pair.perturbed = pair.base->with_replaced_upper(swap_index, swap_rng);
  }
  return pair;
}

CoupledRunResult run_coupled(const CoupledPair& pair, const SolverConfig& cfg,
                             const CoupledRunOptions& opts) {
  cfg.validate();
  const Problem& pa = *pair.base;
  const Problem& pb = *pair.perturbed;

  CoupledRunResult out;
  SolverRng rng_a(cfg.seed), rng_b(cfg.seed);

  AidState a, b;
  a.x = cfg.x0 ? *cfg.x0 : pa.initial_x(rng_a.init);
  a.y = cfg.y0 ? *cfg.y0 : pa.initial_y();
  a.m = cfg.m0 ? *cfg.m0 : Vec::Zero(pa.dx());
  b.x = cfg.x0 ? *cfg.x0 : pb.initial_x(rng_b.init);
  b.y = cfg.y0 ? *cfg.y0 : pb.initial_y();
  b.m = cfg.m0 ? *cfg.m0 : Vec::Zero(pb.dx());

  int first_hit = -1;
  AidObserver watch_hits = [&](const AidStepInfo& info) {
    if (first_hit < 0 &&
        std::find(info.xi1.begin(), info.xi1.end(), pair.swap_index) != info.xi1.end())
      first_hit = info.t;
  };

  if (opts.record_series) out.div_series.reserve(static_cast<size_t>(cfg.T));
  try {
    for (int t = 1; t <= cfg.T; ++t) {
      a = aid_step(pa, a, cfg, rng_a, &watch_hits);
      b = aid_step(pb, b, cfg, rng_b, nullptr);
      if (opts.record_series)
        out.div_series.push_back((a.x - b.x).norm() + (a.y - b.y).norm() + (a.m - b.m).norm());
    }
  } catch (const NonFiniteError& e) {
    out.valid = false;
    out.error = e.what();
    return out;
  }

  out.first_hit_t = first_hit;
  out.div_output = (a.x - b.x).norm() + (a.y - b.y).norm();
  out.div_m = (a.m - b.m).norm();
  out.div_total = out.div_output + out.div_m;
  out.fval_gap_max = std::numeric_limits<double>::quiet_NaN();
  if (pa.supports_resample() && opts.probe_count > 0) {
    const auto fa = pa.probe_values(a.x, a.y, opts.probe_count, opts.probe_seed);
    const auto fb = pa.probe_values(b.x, b.y, opts.probe_count, opts.probe_seed);
    double gap = 0.0;
    for (int i = 0; i < opts.probe_count; ++i)
      gap = std::max(gap, std::abs(fa[static_cast<size_t>(i)] - fb[static_cast<size_t>(i)]));
    out.fval_gap_max = gap;
  }
  out.valid = true;
  return out;
}

StabilityReport stability_sweep(const std::function<ProblemGen(int n)>& gen_for_n,
                                const std::vector<int>& n_list,
                                const std::vector<ScheduleTriple>& schedules,
                                const std::vector<int>& T_list, SolverConfig base_cfg,
                                const SweepOptions& opts) {
  StabilityReport report;
  struct Cell {
    int n, T;
    const ScheduleTriple* sched;
  };
  std::vector<Cell> grid;
  for (int n : n_list)
    for (const auto& s : schedules)
      for (int T : T_list) grid.push_back({n, T, &s});

  std::vector<std::vector<PairRow>> cell_pairs(grid.size());
  std::vector<CellRow> cells(grid.size());

  parallel_for(static_cast<int>(grid.size()), opts.workers, [&](int ci) {
    const Cell& cell = grid[static_cast<size_t>(ci)];
    const ProblemGen gen = gen_for_n(cell.n);

    SolverConfig cfg = base_cfg;
    cfg.T = cell.T;
    cfg.eta_x = cell.sched->x;
    cfg.eta_y = cell.sched->y;
    cfg.eta_m = cell.sched->m;
    cfg.record_every = 0;
    cfg.record_grad_oracle = false;
    cfg.record_y_dist = false;

    CellRow row;
    row.n = cell.n;
    row.T = cell.T;
    row.schedule = cell.sched->name;
    row.pairs = opts.pairs_per_cell;

    double sum = 0.0, sum_sq = 0.0, sum_out = 0.0, sum_gap = 0.0;
    int valid = 0, gap_count = 0;
    for (int pi = 0; pi < opts.pairs_per_cell; ++pi) {
      const uint64_t data_seed = mix_seed(opts.base_seed, 1000003ULL * ci + pi);
      int swap = opts.swap_index;
      if (opts.randomize_swap) {
        RngStream pick(data_seed, 11);
        swap = pick.draw_index(cell.n);
      }
      PairRow pr;
      pr.n = cell.n;
      pr.T = cell.T;
      pr.schedule = cell.sched->name;
      pr.pair_id = pi;
      pr.data_seed = data_seed;
      pr.run_seed = mix_seed(data_seed, 13);
      pr.swap_index = swap;

      CoupledPair pair = make_coupled_pair(gen, swap, data_seed, opts.force_identical);
      cfg.seed = pr.run_seed;
      CoupledRunOptions ro;
      ro.probe_count = opts.probe_count;
      pr.result = run_coupled(pair, cfg, ro);
      if (pr.result.valid) {
        ++valid;
        sum += pr.result.div_total;
        sum_sq += pr.result.div_total * pr.result.div_total;
        sum_out += pr.result.div_output;
        if (std::isfinite(pr.result.fval_gap_max)) {
          sum_gap += pr.result.fval_gap_max;
          ++gap_count;
        }
      }
      cell_pairs[static_cast<size_t>(ci)].push_back(std::move(pr));
    }

    row.valid_pairs = valid;
    if (valid > 0) {
      row.mean_div = sum / valid;
      row.mean_output_div = sum_out / valid;
      const double var = std::max(0.0, sum_sq / valid - row.mean_div * row.mean_div);
      row.std_div = std::sqrt(var);
      row.mean_fgap = gap_count > 0 ? sum_gap / gap_count
                                    : std::numeric_limits<double>::quiet_NaN();
    }
    row.bound_eps = std::numeric_limits<double>::quiet_NaN();
    row.bound_log_eps = std::numeric_limits<double>::quiet_NaN();
    if (opts.compute_bound) {
      const ProblemPtr sample_instance = gen(mix_seed(opts.base_seed, 999));
      const ProblemConstants k = sample_instance->constants();
      const StabilityBound sb =
          stability_bound(cfg.eta_x, cfg.eta_y, cfg.eta_m, k, cell.T, cell.n);
      row.bound_eps = sb.eps;
      row.bound_log_eps = sb.log_eps;
    }
    cells[static_cast<size_t>(ci)] = std::move(row);
  });

  for (auto& cp : cell_pairs)
    for (auto& pr : cp) report.pairs.push_back(std::move(pr));
  report.cells = std::move(cells);
  auto [nf, tf] = fit_sweep_exponents(report.cells);
  report.n_fit = nf;
  report.t_fit = tf;
  return report;
}

std::pair<PowerLawFit, PowerLawFit> fit_sweep_exponents(const std::vector<CellRow>& cells) {
  std::vector<std::pair<double, double>> by_n, by_t;
  for (const auto& c : cells) {
    if (c.valid_pairs == 0) continue;
    by_n.emplace_back(static_cast<double>(c.n), c.mean_div);
    by_t.emplace_back(static_cast<double>(c.T), c.mean_div);
  }
  return {fit_power_law(by_n), fit_power_law(by_t)};
}

namespace {
void put(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}
}  // namespace

void write_pairs_csv(std::ostream& os, const StabilityReport& r) {
  os << "n,T,schedule,pair_id,data_seed,run_seed,swap_index,divergence,output_divergence,"
        "m_divergence,fval_gap_max,first_hit_t,valid\n";
  for (const auto& p : r.pairs) {
    os << p.n << ',' << p.T << ',' << p.schedule << ',' << p.pair_id << ',' << p.data_seed
       << ',' << p.run_seed << ',' << p.swap_index << ',';
    put(os, p.result.div_total);
    os << ',';
    put(os, p.result.div_output);
    os << ',';
    put(os, p.result.div_m);
    os << ',';
    put(os, p.result.fval_gap_max);
    os << ',' << p.result.first_hit_t << ',' << (p.result.valid ? 1 : 0) << '\n';
  }
}

void write_cells_csv(std::ostream& os, const StabilityReport& r) {
  os << "n,T,schedule,pairs,valid_pairs,mean_divergence,std_divergence,mean_output_divergence,"
        "mean_fval_gap,bound_eps,bound_log_eps\n";
  for (const auto& c : r.cells) {
    os << c.n << ',' << c.T << ',' << c.schedule << ',' << c.pairs << ',' << c.valid_pairs
       << ',';
    put(os, c.mean_div);
    os << ',';
    put(os, c.std_div);
    os << ',';
    put(os, c.mean_output_div);
    os << ',';
    put(os, c.mean_fgap);
    os << ',';
    put(os, c.bound_eps);
    os << ',';
    put(os, c.bound_log_eps);
    os << '\n';
  }
}

void write_fits_csv(std::ostream& os, const StabilityReport& r) {
  os << "axis,slope,intercept,ci95_half_width,points_used,defined\n";
  const auto row = [&](const char* axis, const PowerLawFit& f) {
    os << axis << ',';
    put(os, f.slope);
    os << ',';
    put(os, f.intercept);
    os << ',';
    put(os, f.ci95_half_width);
    os << ',' << f.points_used << ',' << (f.defined ? 1 : 0) << '\n';
  };
  row("n", r.n_fit);
  row("T", r.t_fit);
}

}  // namespace bilevel
