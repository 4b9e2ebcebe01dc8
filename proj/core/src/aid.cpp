#include "bilevel/aid.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "bilevel/analysis.hpp"

namespace bilevel {

void SolverConfig::validate() const {
  if (T < 0) throw std::invalid_argument("solver.T must be >= 0");
  if (K < 0) throw std::invalid_argument("solver.K must be >= 0");
  if (!(eta_z > 0.0) || !std::isfinite(eta_z))
    throw std::invalid_argument("solver.eta_z must be positive");
  if (batch < 1) throw std::invalid_argument("solver.batch must be >= 1");
  if (record_every < 0) throw std::invalid_argument("solver.record_every must be >= 0");
}

std::vector<int> all_indices(int pool) {
  std::vector<int> v(static_cast<size_t>(pool));
  for (int i = 0; i < pool; ++i) v[i] = i;
  return v;
}

Vec z_inner_loop(const Problem& p, const Vec& x, const Vec& y, std::span<const int> xi1,
                 const std::vector<std::vector<int>>& zeta, const Vec& z0, double eta_z,
                 int K, std::vector<double>* z_norms) {
  const Vec b = p.mean_grad_y_f(x, y, xi1);
  Vec z = z0;
  if (z_norms) z_norms->clear();
  for (int k = 0; k < K; ++k) {
    const Vec hz = p.mean_hess_yy_g_vp(x, y, z, zeta[static_cast<size_t>(k)]);
    z -= eta_z * (hz - b);
    require_finite(z, "z_t^k", -1);
    if (z_norms) z_norms->push_back(z.norm());
  }
  return z;
}

namespace {
double clamp_momentum(double eta) { return std::min(eta, 1.0); }
}  // namespace

AidState aid_step(const Problem& p, const AidState& state, const SolverConfig& cfg,
                  SolverRng& rng, const AidObserver* obs) {
  const int t = state.t + 1;
  const double eta_x = cfg.eta_x.at(t - 1);
  const double eta_y = cfg.eta_y.at(t - 1);
  const double eta_m = clamp_momentum(cfg.eta_m.at(t - 1));

  AidStepInfo info;
  const bool fill = obs != nullptr;

  // samples for the inner solve and the shared upper index
  std::vector<std::vector<int>> zeta_inner(static_cast<size_t>(cfg.K));
  std::vector<int> xi1, zeta_y, zeta_x;
  if (cfg.full_batch) {
    for (auto& v : zeta_inner) v = all_indices(p.n_lower());
    xi1 = all_indices(p.n_upper());
    zeta_y = all_indices(p.n_lower());
    zeta_x = all_indices(p.n_lower());
  } else {
    for (auto& v : zeta_inner) v = rng.inner.draw_indices(p.n_lower(), cfg.batch);
    xi1 = rng.inner.draw_indices(p.n_upper(), cfg.batch);
  }

  const Vec z0 = cfg.z0 ? *cfg.z0 : Vec::Zero(p.dy());
  std::vector<double> z_norms;
  Vec z;
  try {
    z = z_inner_loop(p, state.x, state.y, xi1, zeta_inner, z0, cfg.eta_z, cfg.K,
                     fill ? &z_norms : nullptr);
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(e.quantity, t);
  }

  if (!cfg.full_batch) {
    zeta_y = rng.y_step.draw_indices(p.n_lower(), cfg.batch);
    zeta_x = rng.x_step.draw_indices(p.n_lower(), cfg.batch);
  }

  AidState next;
  next.t = t;
  next.y = state.y - eta_y * p.mean_grad_y_g(state.x, state.y, zeta_y);
  require_finite(next.y, "y_t", t);

  const Vec gxf = p.mean_grad_x_f(state.x, state.y, xi1);
  const Vec g = gxf - p.mean_cross_xy_g_vp(state.x, state.y, z, zeta_x);
  require_finite(g, "g_t", t);

  next.m = (1.0 - eta_m) * state.m + eta_m * g;
  require_finite(next.m, "m_t", t);

  next.x = state.x - eta_x * next.m;
  require_finite(next.x, "x_t", t);

  if (fill) {
    info.t = t;
    info.x_prev = &state.x;
    info.y_prev = &state.y;
    info.xi1 = std::move(xi1);
    info.zeta_inner = std::move(zeta_inner);
    info.zeta_y = std::move(zeta_y);
    info.zeta_x = std::move(zeta_x);
    info.z_norms = std::move(z_norms);
    info.b_norm = p.mean_grad_y_f(state.x, state.y, info.xi1).norm();
    info.grad_x_f_norm = gxf.norm();
    info.eta_x = eta_x;
    info.eta_y = eta_y;
    info.eta_m = eta_m;
    info.g_t = &g;
    info.m_t = &next.m;
    info.y_t = &next.y;
    info.x_t = &next.x;
    (*obs)(info);
  }
  return next;
}

namespace {
TracePoint record_point(const Problem& p, const AidState& s, const SolverConfig& cfg,
                        double elapsed) {
  TracePoint tp;
  tp.t = s.t;
  tp.x = s.x;
  tp.y = s.y;
  tp.m = s.m;
  tp.phi = p.mean_f(s.x, s.y);
  tp.m_norm_sq = s.m.squaredNorm();
  tp.grad_norm_sq = std::numeric_limits<double>::quiet_NaN();
  tp.y_dist = std::numeric_limits<double>::quiet_NaN();
  if (cfg.record_grad_oracle) tp.grad_norm_sq = exact_hypergradient(p, s.x).grad.squaredNorm();
  if (cfg.record_y_dist) tp.y_dist = (s.y - solve_y_star(p, s.x)).norm();
  tp.elapsed_s = elapsed;
  return tp;
}
}  // namespace

RunTrace aid_run(const Problem& p, const SolverConfig& cfg, const AidObserver* obs) {
  cfg.validate();
  SolverRng rng(cfg.seed);
  AidState s;
  s.x = cfg.x0 ? *cfg.x0 : p.initial_x(rng.init);
  s.y = cfg.y0 ? *cfg.y0 : p.initial_y();
  s.m = cfg.m0 ? *cfg.m0 : Vec::Zero(p.dx());
  require_dim(s.x, p.dx(), "x0");
  require_dim(s.y, p.dy(), "y0");
  require_dim(s.m, p.dx(), "m0");

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  RunTrace trace;
  trace.points.push_back(record_point(p, s, cfg, 0.0));
  for (int t = 1; t <= cfg.T; ++t) {
    try {
      s = aid_step(p, s, cfg, rng, obs);
    } catch (const NonFiniteError& e) {
      trace.aborted = true;
      trace.abort_reason = e.what();
      return trace;
    }
    const bool due = cfg.record_every > 0 && t % cfg.record_every == 0;
    if (due || t == cfg.T) trace.points.push_back(record_point(p, s, cfg, elapsed()));
  }
  return trace;
}

Vec aid_hypergradient_estimate(const Problem& p, const Vec& x, const Vec& y, int K,
                               double eta_z) {
  if (eta_z <= 0.0) {
    Eigen::SelfAdjointEigenSolver<Mat> es(p.hess_yy_full(x, y));
    eta_z = 1.0 / es.eigenvalues().maxCoeff();
  }
  const auto xi = all_indices(p.n_upper());
  std::vector<std::vector<int>> zeta(static_cast<size_t>(K), all_indices(p.n_lower()));
  const Vec z = z_inner_loop(p, x, y, xi, zeta, Vec::Zero(p.dy()), eta_z, K);
  return p.mean_grad_x_f(x, y) - p.mean_cross_xy_g_vp(x, y, z);
}

}  // namespace bilevel
