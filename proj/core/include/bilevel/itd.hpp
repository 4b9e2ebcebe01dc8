#pragma once

#include "bilevel/aid.hpp"

namespace bilevel {

/// Unrolled-differentiation baseline: each outer step restarts the inner
/// variable at y0, runs K stochastic gradient steps on g, and differentiates
/// the realized trajectory in x by forward-mode accumulation of the dense
/// d_y x d_x Jacobian. Memory grows with d_y * d_x by construction; fine at
/// desk scale, and the contrast with the implicit solver is the point.
struct ItdState {
  Vec x;
  Vec y_k;  // end of the latest inner trajectory
  Mat jac;  // d y_k / d x for the realized sample sequence
  int t = 0;
};

/// Runs the inner loop from y0 with the step schedule evaluated at the inner
/// index (step k uses eta_y.at(k - 1)), propagating
///   J_k = (I - eta_k H_k) J_{k-1} - eta_k C_k,   J_0 = 0,
/// where H_k and C_k are the lower second derivatives at (x, y^{k-1}) averaged
/// over the k-th index batch. Returns (y^K, J_K); J_K is the exact Jacobian of
/// y^K in x for this sample sequence.
std::pair<Vec, Mat> itd_inner_loop(const Problem& p, const Vec& x, const Vec& y0,
                                   const Schedule& eta_y, int K,
                                   const std::vector<std::vector<int>>& zeta);

/// One outer step: inner loop, then g_t = grad_x f + J' grad_y f at
/// (x_{t-1}, y^K) and a plain gradient step on x (no momentum).
ItdState itd_step(const Problem& p, const ItdState& state, const SolverConfig& cfg,
                  SolverRng& rng);

RunTrace itd_run(const Problem& p, const SolverConfig& cfg);

/// Deterministic full-batch estimate at x with the inner loop started from y0.
/// eta_y <= 0 picks 1 / lambda_max of the pooled lower Hessian at (x, y0).
Vec itd_hypergradient_estimate(const Problem& p, const Vec& x, const Vec& y0, int K,
                               double eta_y = 0.0);

}  // namespace bilevel
