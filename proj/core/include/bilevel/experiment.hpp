#pragma once

#include <string>

#include "bilevel/config.hpp"

namespace bilevel {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;     // malformed config, unknown/missing key
inline constexpr int kExitRuntime = 3;    // a run aborted mid-way
inline constexpr int kExitCondition = 4;  // a step-size condition failed

struct CliOptions {
  std::string out_dir = "out";
  int workers = 0;  // 0: hardware concurrency
  uint64_t seed_offset = 0;
};

/// Solver runs over the configured (n, schedule) grid and seeds: one trace CSV
/// per (cell, seed), per-cell seed-averaged panel CSVs, and a summary CSV.
int cmd_run(const ExperimentConfig& cfg, const CliOptions& opts);

/// Coupled-run divergence sweep: pairs.csv, cells.csv, fits.csv.
int cmd_stability(const ExperimentConfig& cfg, const CliOptions& opts);

/// Prints the bound/condition report and writes its key-value form; exit code
/// kExitCondition when a step-size condition fails.
int cmd_check(const ExperimentConfig& cfg, const CliOptions& opts);

/// Per-point relative errors of {finite differences, inner-solve estimate,
/// unrolled estimate} against the exact hypergradient, over a grid of inner
/// iteration counts.
int cmd_grad_check(const ExperimentConfig& cfg, const CliOptions& opts);

/// Grid of (n, schedule, T) cells x seeds with per-run metrics and a power-law
/// fit of min_t ||grad Phi||^2 against the horizon.
int cmd_sweep(const ExperimentConfig& cfg, const CliOptions& opts);

}  // namespace bilevel
