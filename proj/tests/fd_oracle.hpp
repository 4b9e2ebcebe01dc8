#pragma once

// Test-local central-difference oracles. Deliberately separate from the
// library's finite-difference helpers so the tests check the analytic
// derivatives through an independent code path.

#include <cmath>

#include "bilevel/problem.hpp"

namespace testfd {

using bilevel::Problem;
using bilevel::Vec;

inline double hstep(double coord) { return 5e-6 * std::max(1.0, std::abs(coord)); }

template <class F>
Vec central_grad(const Vec& at, F&& value) {
  Vec g(at.size());
  Vec p = at;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    const double h = hstep(at[i]);
    p[i] = at[i] + h;
    const double fp = value(p);
    p[i] = at[i] - h;
    const double fm = value(p);
    p[i] = at[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline Vec grad_y_f(const Problem& p, const Vec& x, const Vec& y, int i) {
  return central_grad(y, [&](const Vec& yy) { return p.f_value(x, yy, i); });
}
inline Vec grad_x_f(const Problem& p, const Vec& x, const Vec& y, int i) {
  return central_grad(x, [&](const Vec& xx) { return p.f_value(xx, y, i); });
}
inline Vec grad_y_g(const Problem& p, const Vec& x, const Vec& y, int j) {
  return central_grad(y, [&](const Vec& yy) { return p.g_value(x, yy, j); });
}
inline Vec hess_yy_vp(const Problem& p, const Vec& x, const Vec& y, int j, const Vec& v) {
  const double h = 5e-6 / std::max(1.0, v.norm());
  return (p.grad_y_g(x, y + h * v, j) - p.grad_y_g(x, y - h * v, j)) / (2.0 * h);
}
inline Vec cross_xy_vp(const Problem& p, const Vec& x, const Vec& y, int j, const Vec& v) {
  Vec out(p.dx());
  Vec xx = x;
  for (int a = 0; a < p.dx(); ++a) {
    const double h = hstep(x[a]);
    xx[a] = x[a] + h;
    const Vec gp = p.grad_y_g(xx, y, j);
    xx[a] = x[a] - h;
    const Vec gm = p.grad_y_g(xx, y, j);
    xx[a] = x[a];
    out[a] = (gp - gm).dot(v) / (2.0 * h);
  }
  return out;
}

// error relative to the reference norm, floored so zero blocks compare absolutely
inline double err(const Vec& got, const Vec& want, double floor = 1.0) {
  return (got - want).norm() / std::max(want.norm(), floor);
}

}  // namespace testfd
