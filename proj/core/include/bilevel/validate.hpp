#pragma once

#include "bilevel/problem.hpp"

namespace bilevel {

/// Relative error with an absolute floor for near-zero references.
double rel_err(const Vec& got, const Vec& want, double floor = 1e-8);
double rel_err(double got, double want, double floor = 1e-8);

// Central finite differences of the per-sample objectives. Step sizes follow
// h ~ cbrt(eps) scaled by coordinate magnitude.
Vec fd_grad_x_f(const Problem& p, const Vec& x, const Vec& y, int i);
Vec fd_grad_y_f(const Problem& p, const Vec& x, const Vec& y, int i);
Vec fd_grad_y_g(const Problem& p, const Vec& x, const Vec& y, int j);
Vec fd_hess_yy_g_vp(const Problem& p, const Vec& x, const Vec& y, int j, const Vec& v);
Vec fd_cross_xy_g_vp(const Problem& p, const Vec& x, const Vec& y, int j, const Vec& v);

struct ValidationReport {
  double max_rel_err_first = 0.0;   // first derivatives vs finite differences
  double max_rel_err_second = 0.0;  // second-derivative products vs finite differences
  double min_hessian_eig = 0.0;     // over sampled (x, y, zeta)
  int probes = 0;
};

/// Construction-time checks: strong convexity of g in y (sampled Hessian
/// eigenvalues) and derivative consistency against central finite differences
/// (first derivatives to tol_first, second products to tol_second). Throws
/// std::runtime_error describing the first violated check.
ValidationReport validate_problem(const Problem& p, const Domain& domain, uint64_t seed,
                                  int probes = 5, double tol_first = 1e-5,
                                  double tol_second = 1e-4);

/// Empirical variance-growth constants: samples (x, y) in the domain, computes
/// the per-sample lower-gradient variance V and squared mean-gradient norm M,
/// fits V <= D1 M + D0 so that the fit dominates every probe.
std::pair<double, double> estimate_variance_bounds(const Problem& p, const Domain& domain,
                                                   uint64_t seed, int probes = 200);

}  // namespace bilevel
