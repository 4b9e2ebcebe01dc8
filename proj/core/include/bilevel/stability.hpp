#pragma once

#include <functional>
#include <iosfwd>

#include "bilevel/aid.hpp"
#include "bilevel/analysis.hpp"

namespace bilevel {

/// Two problem instances sharing the training set and every draw of algorithm
/// randomness, with validation sets differing in exactly one index. With
/// force_identical the "replacement" is the original sample, which must make
/// the coupled trajectories bit-identical.
struct CoupledPair {
  ProblemPtr base;
  ProblemPtr perturbed;
  int swap_index = 0;
  uint64_t data_seed = 0;
  bool forced_identical = false;
};

CoupledPair make_coupled_pair(const ProblemGen& gen, int swap_index, uint64_t data_seed,
                              bool force_identical = false);

struct CoupledRunResult {
  double div_total = 0.0;   // ||x - x~|| + ||y - y~|| + ||m - m~|| at T
  double div_output = 0.0;  // ||x - x~|| + ||y - y~|| only (the algorithm's output)
  double div_m = 0.0;
  double fval_gap_max = 0.0;  // max |f(out) - f(out~)| over fresh probe samples, NaN if unsupported
  int first_hit_t = -1;       // first step whose shared upper draw hits the swapped index
  bool valid = false;
  std::string error;
  std::vector<double> div_series;  // per-step div_total, when requested
};

struct CoupledRunOptions {
  int probe_count = 100;
  uint64_t probe_seed = 9001;
  bool record_series = false;
};

/// Runs the solver on both instances in lockstep with a shared seed and
/// reports the divergence. Aborted runs flag the result invalid.
CoupledRunResult run_coupled(const CoupledPair& pair, const SolverConfig& cfg,
                             const CoupledRunOptions& opts = {});

struct ScheduleTriple {
  std::string name;
  Schedule x, y, m;
};

struct PairRow {
  int n = 0, T = 0;
  std::string schedule;
  int pair_id = 0;
  uint64_t data_seed = 0, run_seed = 0;
  int swap_index = 0;
  CoupledRunResult result;
};

struct CellRow {
  int n = 0, T = 0;
  std::string schedule;
  int pairs = 0, valid_pairs = 0;
  double mean_div = 0.0, std_div = 0.0;
  double mean_output_div = 0.0, mean_fgap = 0.0;
  double bound_eps = 0.0, bound_log_eps = 0.0;  // closed-form bound with the cell's constants
};

struct StabilityReport {
  std::vector<PairRow> pairs;
  std::vector<CellRow> cells;
  PowerLawFit n_fit, t_fit;  // divergence against n and against T, over cell means
};

struct SweepOptions {
  int pairs_per_cell = 20;
  int swap_index = 0;
  bool randomize_swap = false;  // average over uniform swap positions instead of a fixed one
  int probe_count = 100;
  uint64_t base_seed = 1;
  bool force_identical = false;
  bool compute_bound = true;
  int workers = 1;
};

/// Full factorial grid over (n, schedule, T). Each cell runs pairs_per_cell
/// coupled pairs with distinct data and run seeds; cells with no valid pair
/// are kept but marked with zero valid_pairs.
StabilityReport stability_sweep(const std::function<ProblemGen(int n)>& gen_for_n,
                                const std::vector<int>& n_list,
                                const std::vector<ScheduleTriple>& schedules,
                                const std::vector<int>& T_list, SolverConfig base_cfg,
                                const SweepOptions& opts);

/// Log-log exponents of mean divergence against each grid axis, over valid
/// cells. Degenerate axes (fewer than two distinct values) come back undefined.
std::pair<PowerLawFit, PowerLawFit> fit_sweep_exponents(const std::vector<CellRow>& cells);

void write_pairs_csv(std::ostream& os, const StabilityReport& r);
void write_cells_csv(std::ostream& os, const StabilityReport& r);
void write_fits_csv(std::ostream& os, const StabilityReport& r);

}  // namespace bilevel
