#include "bilevel/itd.hpp"

#include <chrono>
#include <cmath>

#include "bilevel/analysis.hpp"

namespace bilevel {

namespace {
Mat dense_hess(const Problem& p, const Vec& x, const Vec& y, std::span<const int> idx) {
  Mat h(p.dy(), p.dy());
  Vec e = Vec::Zero(p.dy());
  for (int c = 0; c < p.dy(); ++c) {
    e[c] = 1.0;
    h.col(c) = p.mean_hess_yy_g_vp(x, y, e, idx);
    e[c] = 0.0;
  }
  return h;
}

// rows of the d_y x d_x matrix C with C(c, a) = d^2 g / dx_a dy_c
Mat dense_cross(const Problem& p, const Vec& x, const Vec& y, std::span<const int> idx) {
  Mat c(p.dy(), p.dx());
  Vec e = Vec::Zero(p.dy());
  for (int r = 0; r < p.dy(); ++r) {
    e[r] = 1.0;
    c.row(r) = p.mean_cross_xy_g_vp(x, y, e, idx).transpose();
    e[r] = 0.0;
  }
  return c;
}
}  // namespace

std::pair<Vec, Mat> itd_inner_loop(const Problem& p, const Vec& x, const Vec& y0,
                                   const Schedule& eta_y, int K,
                                   const std::vector<std::vector<int>>& zeta) {
  Vec y = y0;
  Mat jac = Mat::Zero(p.dy(), p.dx());
  for (int k = 1; k <= K; ++k) {
    const double eta = eta_y.at(k - 1);
    const auto& idx = zeta[static_cast<size_t>(k - 1)];
    const Mat h = dense_hess(p, x, y, idx);
    const Mat c = dense_cross(p, x, y, idx);
    jac = jac - eta * (h * jac + c);
    y -= eta * p.mean_grad_y_g(x, y, idx);
    require_finite(y, "y_t^k", -1);
    if (!jac.allFinite()) throw NonFiniteError("dy/dx", -1);
  }
  return {std::move(y), std::move(jac)};
}

ItdState itd_step(const Problem& p, const ItdState& state, const SolverConfig& cfg,
                  SolverRng& rng) {
  const int t = state.t + 1;
  const double eta_x = cfg.eta_x.at(t - 1);

  std::vector<std::vector<int>> zeta(static_cast<size_t>(cfg.K));
  std::vector<int> xi1;
  if (cfg.full_batch) {
    for (auto& v : zeta) v = all_indices(p.n_lower());
    xi1 = all_indices(p.n_upper());
  } else {
    for (auto& v : zeta) v = rng.inner.draw_indices(p.n_lower(), cfg.batch);
    xi1 = rng.x_step.draw_indices(p.n_upper(), cfg.batch);
  }

  const Vec y0 = cfg.y0 ? *cfg.y0 : p.initial_y();
  ItdState next;
  next.t = t;
  try {
    auto [yk, jac] = itd_inner_loop(p, state.x, y0, cfg.eta_y, cfg.K, zeta);
    next.y_k = std::move(yk);
    next.jac = std::move(jac);
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(e.quantity, t);
  }

  const Vec g = p.mean_grad_x_f(state.x, next.y_k, xi1) +
                next.jac.transpose() * p.mean_grad_y_f(state.x, next.y_k, xi1);
  require_finite(g, "g_t", t);
  next.x = state.x - eta_x * g;
  require_finite(next.x, "x_t", t);
  return next;
}

RunTrace itd_run(const Problem& p, const SolverConfig& cfg) {
  cfg.validate();
  SolverRng rng(cfg.seed);
  ItdState s;
  s.x = cfg.x0 ? *cfg.x0 : p.initial_x(rng.init);
  s.y_k = cfg.y0 ? *cfg.y0 : p.initial_y();
  s.jac = Mat::Zero(p.dy(), p.dx());
  require_dim(s.x, p.dx(), "x0");

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  // latest hypergradient estimate, recovered from the x-update; fills the
  // momentum column since the x-update is the momentum recursion with eta_m = 1
  Vec last_g = Vec::Zero(p.dx());

  auto record = [&](double el) {
    TracePoint tp;
    tp.t = s.t;
    tp.x = s.x;
    tp.y = s.y_k;
    tp.m = last_g;
    tp.phi = p.mean_f(s.x, s.y_k);
    tp.m_norm_sq = tp.m.squaredNorm();
    tp.grad_norm_sq = std::numeric_limits<double>::quiet_NaN();
    tp.y_dist = std::numeric_limits<double>::quiet_NaN();
    if (cfg.record_grad_oracle) tp.grad_norm_sq = exact_hypergradient(p, s.x).grad.squaredNorm();
    if (cfg.record_y_dist) tp.y_dist = (s.y_k - solve_y_star(p, s.x)).norm();
    tp.elapsed_s = el;
    return tp;
  };

  RunTrace trace;
  trace.points.push_back(record(0.0));
  for (int t = 1; t <= cfg.T; ++t) {
    const Vec prev_x = s.x;
    const double eta_x = cfg.eta_x.at(t - 1);
    try {
      s = itd_step(p, s, cfg, rng);
    } catch (const NonFiniteError& e) {
      trace.aborted = true;
      trace.abort_reason = e.what();
      return trace;
    }
    last_g = (prev_x - s.x) / eta_x;
    const bool due = cfg.record_every > 0 && t % cfg.record_every == 0;
    if (due || t == cfg.T) trace.points.push_back(record(elapsed()));
  }
  return trace;
}

Vec itd_hypergradient_estimate(const Problem& p, const Vec& x, const Vec& y0, int K,
                               double eta_y) {
  if (eta_y <= 0.0) {
    Eigen::SelfAdjointEigenSolver<Mat> es(p.hess_yy_full(x, y0));
    eta_y = 1.0 / es.eigenvalues().maxCoeff();
  }
  std::vector<std::vector<int>> zeta(static_cast<size_t>(K), all_indices(p.n_lower()));
  auto [yk, jac] = itd_inner_loop(p, x, y0, Schedule::constant(eta_y), K, zeta);
  return p.mean_grad_x_f(x, yk) + jac.transpose() * p.mean_grad_y_f(x, yk);
}

}  // namespace bilevel
