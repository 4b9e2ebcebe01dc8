#include "bilevel/validate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bilevel {

namespace {
const double kFdStep = 6e-6;  // ~cbrt(machine eps)

double step_for(double coord) { return kFdStep * std::max(1.0, std::abs(coord)); }
}  // namespace

double rel_err(const Vec& got, const Vec& want, double floor) {
  return (got - want).norm() / std::max(want.norm(), floor);
}

double rel_err(double got, double want, double floor) {
  return std::abs(got - want) / std::max(std::abs(want), floor);
}

Vec fd_grad_x_f(const Problem& p, const Vec& x, const Vec& y, int i) {
  Vec g(p.dx());
  Vec xp = x;
  for (int a = 0; a < p.dx(); ++a) {
    const double h = step_for(x[a]);
    xp[a] = x[a] + h;
    const double fp = p.f_value(xp, y, i);
    xp[a] = x[a] - h;
    const double fm = p.f_value(xp, y, i);
    xp[a] = x[a];
    g[a] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Vec fd_grad_y_f(const Problem& p, const Vec& x, const Vec& y, int i) {
  Vec g(p.dy());
  Vec yp = y;
  for (int c = 0; c < p.dy(); ++c) {
    const double h = step_for(y[c]);
    yp[c] = y[c] + h;
    const double fp = p.f_value(x, yp, i);
    yp[c] = y[c] - h;
    const double fm = p.f_value(x, yp, i);
    yp[c] = y[c];
    g[c] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Vec fd_grad_y_g(const Problem& p, const Vec& x, const Vec& y, int j) {
  Vec g(p.dy());
  Vec yp = y;
  for (int c = 0; c < p.dy(); ++c) {
    const double h = step_for(y[c]);
    yp[c] = y[c] + h;
    const double fp = p.g_value(x, yp, j);
    yp[c] = y[c] - h;
    const double fm = p.g_value(x, yp, j);
    yp[c] = y[c];
    g[c] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Vec fd_hess_yy_g_vp(const Problem& p, const Vec& x, const Vec& y, int j, const Vec& v) {
  const double h = kFdStep / std::max(1.0, v.norm());
  return (p.grad_y_g(x, y + h * v, j) - p.grad_y_g(x, y - h * v, j)) / (2.0 * h);
}

Vec fd_cross_xy_g_vp(const Problem& p, const Vec& x, const Vec& y, int j, const Vec& v) {
  Vec out(p.dx());
  Vec xp = x;
  for (int a = 0; a < p.dx(); ++a) {
    const double h = step_for(x[a]);
    xp[a] = x[a] + h;
    const Vec gp = p.grad_y_g(xp, y, j);
    xp[a] = x[a] - h;
    const Vec gm = p.grad_y_g(xp, y, j);
    xp[a] = x[a];
    out[a] = (gp - gm).dot(v) / (2.0 * h);
  }
  return out;
}

ValidationReport validate_problem(const Problem& p, const Domain& domain, uint64_t seed,
                                  int probes, double tol_first, double tol_second) {
  ValidationReport rep;
  rep.probes = probes;
  rep.min_hessian_eig = std::numeric_limits<double>::infinity();
  RngStream rng(seed, StreamId::kData);

  for (int k = 0; k < probes; ++k) {
    const Vec x = domain.sample_x(rng);
    const Vec y = domain.sample_y(rng);
    const int i = rng.draw_index(p.n_upper());
    const int j = rng.draw_index(p.n_lower());
    const Vec v = rng.normal_vec(p.dy());

    // error relative to the derivative norm, floored at 1 so identically-zero
    // blocks compare absolutely against finite-difference noise
    rep.max_rel_err_first = std::max({rep.max_rel_err_first,
                                      rel_err(p.grad_x_f(x, y, i), fd_grad_x_f(p, x, y, i), 1.0),
                                      rel_err(p.grad_y_f(x, y, i), fd_grad_y_f(p, x, y, i), 1.0),
                                      rel_err(p.grad_y_g(x, y, j), fd_grad_y_g(p, x, y, j), 1.0)});
    rep.max_rel_err_second =
        std::max({rep.max_rel_err_second,
                  rel_err(p.hess_yy_g_vp(x, y, j, v), fd_hess_yy_g_vp(p, x, y, j, v), 1.0),
                  rel_err(p.cross_xy_g_vp(x, y, j, v), fd_cross_xy_g_vp(p, x, y, j, v), 1.0)});

    // per-sample Hessian in y, assembled densely
    Mat hj(p.dy(), p.dy());
    Vec e = Vec::Zero(p.dy());
    for (int c = 0; c < p.dy(); ++c) {
      e[c] = 1.0;
      hj.col(c) = p.hess_yy_g_vp(x, y, j, e);
      e[c] = 0.0;
    }
    const double sym = (hj - hj.transpose()).norm() / std::max(1.0, hj.norm());
    if (sym > 1e-8)
      throw std::runtime_error(p.name() + ": lower Hessian not symmetric (asymmetry " +
                               std::to_string(sym) + ")");
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (hj + hj.transpose()));
    rep.min_hessian_eig = std::min(rep.min_hessian_eig, es.eigenvalues().minCoeff());
  }

  if (!(rep.min_hessian_eig > 0.0))
    throw std::runtime_error(p.name() + ": lower objective is not strongly convex on the domain (min sampled Hessian eigenvalue " +
                             std::to_string(rep.min_hessian_eig) + ")");
  if (rep.max_rel_err_first > tol_first)
    throw std::runtime_error(p.name() + ": first derivatives disagree with finite differences (rel err " +
                             std::to_string(rep.max_rel_err_first) + ")");
  if (rep.max_rel_err_second > tol_second)
    throw std::runtime_error(p.name() + ": second-derivative products disagree with finite differences (rel err " +
                             std::to_string(rep.max_rel_err_second) + ")");
  return rep;
}

std::pair<double, double> estimate_variance_bounds(const Problem& p, const Domain& domain,
                                                   uint64_t seed, int probes) {
  if (p.n_lower() == 1) return {0.0, 0.0};  // single sample: variance identically zero
  RngStream rng(seed, StreamId::kData);
  std::vector<double> vs(probes), ms(probes);
  for (int k = 0; k < probes; ++k) {
    const Vec x = domain.sample_x(rng);
    const Vec y = domain.sample_y(rng);
    const Vec mean = p.mean_grad_y_g(x, y);
    double v = 0.0;
    for (int j = 0; j < p.n_lower(); ++j) v += (p.grad_y_g(x, y, j) - mean).squaredNorm();
    vs[k] = v / p.n_lower();
    ms[k] = mean.squaredNorm();
  }
  // least-squares slope, clamped nonnegative, then lift the intercept so the
  // bound dominates every probe
  double mm = 0.0, mv = 0.0, m2 = 0.0, vbar = 0.0, mbar = 0.0;
  for (int k = 0; k < probes; ++k) {
    mbar += ms[k];
    vbar += vs[k];
  }
  mbar /= probes;
  vbar /= probes;
  for (int k = 0; k < probes; ++k) {
    mm += (ms[k] - mbar) * (ms[k] - mbar);
    mv += (ms[k] - mbar) * (vs[k] - vbar);
    m2 += ms[k] * ms[k];
  }
  double d1 = mm > 0.0 ? std::max(0.0, mv / mm) : 0.0;
  double d0 = 0.0;
  for (int k = 0; k < probes; ++k) d0 = std::max(d0, vs[k] - d1 * ms[k]);
  // inflate the envelope so it also holds off the probe set
  return {1.5 * d0, 1.25 * d1};
}

}  // namespace bilevel
