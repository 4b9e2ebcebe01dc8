#pragma once

#include <functional>
#include <optional>

#include "bilevel/problem.hpp"
#include "bilevel/rng.hpp"
#include "bilevel/schedule.hpp"
#include "bilevel/trace.hpp"

namespace bilevel {

/// Shared configuration for both solvers. The momentum and inner-solve fields
/// are ignored by the unrolled-differentiation solver. Schedules are evaluated
/// at the 0-based iteration, so loop step t uses eta.at(t - 1).
struct SolverConfig {
  int T = 1000;
  int K = 10;
  double eta_z = 0.01;
  Schedule eta_x = Schedule::constant(0.01);
  Schedule eta_y = Schedule::constant(0.01);
  Schedule eta_m = Schedule::constant(0.01);
  uint64_t seed = 0;
  int batch = 1;
  int record_every = 1;  // 0: record only the initialization and the final point
  bool full_batch = false;
  bool record_grad_oracle = false;  // exact hypergradient norm per recorded point
  bool record_y_dist = false;       // ||y_t - y*(x_t)|| per recorded point
  std::optional<Vec> x0, y0, m0, z0;

  void validate() const;
};

struct AidState {
  Vec x, y, m;
  int t = 0;
};

/// Per-step internals handed to an observer: sampled indices, inner-iterate
/// norms, and the evaluated step sizes. Pointers stay valid only during the
/// callback.
struct AidStepInfo {
  int t = 0;
  const Vec* x_prev = nullptr;
  const Vec* y_prev = nullptr;
  std::vector<int> xi1;                    // upper indices shared by the inner solve and g_t
  std::vector<std::vector<int>> zeta_inner;  // K batches of lower indices
  std::vector<int> zeta_y, zeta_x;
  std::vector<double> z_norms;  // ||z_t^k|| for k = 1..K
  double b_norm = 0.0;          // norm of the inner-solve target
  double grad_x_f_norm = 0.0;
  double eta_x = 0.0, eta_y = 0.0, eta_m = 0.0;
  const Vec* g_t = nullptr;
  const Vec* m_t = nullptr;
  const Vec* y_t = nullptr;
  const Vec* x_t = nullptr;
};
using AidObserver = std::function<void(const AidStepInfo&)>;

/// Streams used by one run, all derived from the config seed. The index
/// sequences depend only on (seed, pool sizes), which is what lets two runs on
/// neighboring datasets consume identical samples.
struct SolverRng {
  RngStream inner, y_step, x_step, init;
  explicit SolverRng(uint64_t seed)
      : inner(seed, StreamId::kInner),
        y_step(seed, StreamId::kYStep),
        x_step(seed, StreamId::kXStep),
        init(seed, StreamId::kInit) {}
};

/// K stochastic steps on the inner quadratic 0.5 z'Hz - b.z with per-step
/// sampled H = hess_yy g(x, y, zeta^(k)) and fixed b = grad_y f(x, y, xi^(1)):
///   z^k = z^(k-1) - eta_z (H_k z^(k-1) - b).
/// Index batches are averaged; passing the full pool reproduces the
/// deterministic recursion. Fills z_norms with ||z^k|| when provided.
Vec z_inner_loop(const Problem& p, const Vec& x, const Vec& y, std::span<const int> xi1,
                 const std::vector<std::vector<int>>& zeta, const Vec& z0, double eta_z,
                 int K, std::vector<double>* z_norms = nullptr);

/// One outer step, in the printed order: sample, inner solve from z0, y-step,
/// hypergradient estimate g_t, momentum average, x-step. All derivatives are
/// evaluated at (x_{t-1}, y_{t-1}). Throws NonFiniteError naming the first
/// non-finite quantity.
AidState aid_step(const Problem& p, const AidState& state, const SolverConfig& cfg,
                  SolverRng& rng, const AidObserver* obs = nullptr);

/// T sequential steps from the configured initialization; deterministic given
/// the seed. A non-finite abort is recorded on the returned trace rather than
/// thrown.
RunTrace aid_run(const Problem& p, const SolverConfig& cfg, const AidObserver* obs = nullptr);

/// Deterministic full-batch hypergradient estimate at (x, y): K full-batch
/// inner steps from z = 0, then mean grad_x f - cross' z. eta_z <= 0 picks
/// 1 / lambda_max of the pooled lower Hessian. K = 0 degenerates to the plain
/// upper gradient.
Vec aid_hypergradient_estimate(const Problem& p, const Vec& x, const Vec& y, int K,
                               double eta_z = 0.0);

std::vector<int> all_indices(int pool);

}  // namespace bilevel
