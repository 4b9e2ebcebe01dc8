#include "bilevel/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace bilevel {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Mat pooled_hessian_checked(const Problem& p, const Vec& x, const Vec& y, double* min_eig,
                           double* cond) {
  const Mat h = p.hess_yy_full(x, y);
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) throw SingularHessianError(lo);
  if (min_eig) *min_eig = lo;
  if (cond) *cond = hi / lo;
  return h;
}
}  // namespace

Vec solve_y_star(const Problem& p, const Vec& x, double tol) {
  if (p.has_y_star()) return p.y_star(x);
  Vec y = p.initial_y();
  for (int it = 0; it < 100; ++it) {
    const Vec g = p.mean_grad_y_g(x, y);
    if (g.norm() <= tol) return y;
    const Mat h = pooled_hessian_checked(p, x, y, nullptr, nullptr);
    y -= h.ldlt().solve(g);
  }
  if (p.mean_grad_y_g(x, y).norm() <= tol) return y;
  throw std::runtime_error(p.name() + ": inner minimization did not reach tolerance");
}

double phi_value(const Problem& p, const Vec& x) { return p.mean_f(x, solve_y_star(p, x)); }

HypergradResult exact_hypergradient(const Problem& p, const Vec& x) {
  HypergradResult r;
  r.y_star = solve_y_star(p, x);
  const Mat h = pooled_hessian_checked(p, x, r.y_star, &r.hess_min_eig, &r.hess_cond);
  const Vec v = h.ldlt().solve(p.mean_grad_y_f(x, r.y_star));
  r.grad = p.mean_grad_x_f(x, r.y_star) - p.mean_cross_xy_g_vp(x, r.y_star, v);
  return r;
}

Vec fd_phi_gradient(const Problem& p, const Vec& x, double h) {
  Vec g(p.dx());
  Vec xp = x;
  for (int a = 0; a < p.dx(); ++a) {
    const double step = h * std::max(1.0, std::abs(x[a]));
    xp[a] = x[a] + step;
    const double fp = phi_value(p, xp);
    xp[a] = x[a] - step;
    const double fm = phi_value(p, xp);
    xp[a] = x[a];
    g[a] = (fp - fm) / (2.0 * step);
  }
  return g;
}

Vec expected_delta(const Problem& p, const Vec& x, const Vec& y, int K, double eta_z,
                   const Vec& z0) {
  const Mat hbar = p.hess_yy_full(x, y);
  const Vec bbar = p.mean_grad_y_f(x, y);
  const Mat step = Mat::Identity(p.dy(), p.dy()) - eta_z * hbar;
  Vec ez = z0;
  Vec geom = Vec::Zero(p.dy());
  Vec pow_b = bbar;  // step^k bbar
  for (int k = 0; k < K; ++k) {
    geom += pow_b;
    pow_b = step * pow_b;
    ez = step * ez;
  }
  ez += eta_z * geom;
  return p.mean_grad_x_f(x, y) - p.mean_cross_xy_g_vp(x, y, ez);
}

Vec expected_delta_enumerated(const Problem& p, const Vec& x, const Vec& y, int K,
                              double eta_z, const Vec& z0, long max_tuples) {
  const long q = p.n_lower(), n = p.n_upper();
  double tuples = static_cast<double>(n) * q;
  for (int k = 0; k < K; ++k) {
    tuples *= q;
    if (tuples > static_cast<double>(max_tuples))
      throw std::invalid_argument("expected_delta_enumerated: index space too large");
  }

  Vec acc = Vec::Zero(p.dx());
  std::vector<int> zeta(static_cast<size_t>(K), 0);
  long count = 0;
  while (true) {
    for (int xi = 0; xi < n; ++xi) {
      // inner recursion for this zeta sequence and xi
      const Vec b = p.grad_y_f(x, y, xi);
      Vec z = z0;
      for (int k = 0; k < K; ++k)
        z -= eta_z * (p.hess_yy_g_vp(x, y, zeta[static_cast<size_t>(k)], z) - b);
      for (int zx = 0; zx < q; ++zx) {
        acc += p.grad_x_f(x, y, xi) - p.cross_xy_g_vp(x, y, zx, z);
        ++count;
      }
    }
    // next zeta tuple, odometer order
    int pos = 0;
    while (pos < K && ++zeta[static_cast<size_t>(pos)] == q) {
      zeta[static_cast<size_t>(pos)] = 0;
      ++pos;
    }
    if (pos == K) break;
  }
  return acc / static_cast<double>(count);
}

double hypergradient_bias_bound(const ProblemConstants& k, double y_dist, int K,
                                double eta_z, double z0_norm) {
  k.validate();
  if (!(eta_z > 0.0) || eta_z > 1.0 / k.L1 + 1e-15)
    throw std::invalid_argument("hypergradient_bias_bound: requires 0 < eta_z <= 1/L1");
  const double dz = k.d_z(z0_norm);
  const double contraction = std::pow(1.0 - eta_z * k.mu, 2 * K);
  const double t1 = 2.0 * std::pow(k.L1 + dz * k.L2, 2.0) * y_dist * y_dist;
  const double t2 = 2.0 * k.L1 * k.L1 * contraction * std::pow(dz + k.L0 / k.mu, 2.0);
  return t1 + t2;
}

namespace {
double momentum_clamped(const Schedule& s, int iter) { return std::min(1.0, s.at(iter)); }

double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}
}  // namespace

StabilityBound stability_bound(const Schedule& eta_x, const Schedule& eta_y,
                               const Schedule& eta_m, const ProblemConstants& k, int T,
                               int n, double z0_norm) {
  k.validate();
  if (T < 1 || n < 1) throw std::invalid_argument("stability_bound: need T >= 1 and n >= 1");
  StabilityBound out;
  out.d_z = k.d_z(z0_norm);
  out.c_m = 2.0 * (n - 1) * k.L1 / n + 2.0 * k.L2 * out.d_z +
            (k.L1 / k.mu) * ((n - 1) * k.L1 / n + out.d_z * k.L2);
  out.c_c = 2.0 * k.L0 + 2.0 * k.L1 * k.L0 / k.mu;

  double suffix = 1.0, log_suffix = 0.0;
  double acc = 0.0, log_acc = -std::numeric_limits<double>::infinity();
  for (int t = T; t >= 1; --t) {
    const double ex = eta_x.at(t - 1);
    const double em = momentum_clamped(eta_m, t - 1);
    const double ey = eta_y.at(t - 1);
    const double term = (1.0 + ex) * em * out.c_c / n;
    acc += term * suffix;
    log_acc = log_sum_exp(log_acc, std::log(term) + log_suffix);
    const double factor = 1.0 + ex * em * out.c_m + em * out.c_m + ey * k.L1;
    suffix *= factor;
    log_suffix += std::log(factor);
  }
  out.overflowed = !std::isfinite(acc);
  out.eps = out.overflowed ? std::numeric_limits<double>::infinity() : acc;
  out.log_eps = log_acc;
  return out;
}

double stability_q_exponent(double alpha, double beta, const ProblemConstants& k, int n,
                            double z0_norm) {
  const double dz = k.d_z(z0_norm);
  const double cm = 2.0 * (n - 1) * k.L1 / n + 2.0 * k.L2 * dz +
                    (k.L1 / k.mu) * ((n - 1) * k.L1 / n + dz * k.L2);
  const double g = 2.0 * cm * alpha + k.L1 * beta;
  return g / (g + 1.0);
}

double phi_smoothness_constant(const ProblemConstants& k) {
  return (k.mu + k.L1) *
         (k.L1 * k.mu * k.mu + k.L0 * k.L2 * k.mu + k.L1 * k.L1 * k.mu + k.L2 * k.L0) /
         (k.mu * k.mu * k.mu);
}

namespace {
Condition threshold_condition(std::string name, double value, double threshold) {
  Condition c;
  c.name = std::move(name);
  c.value = value;
  c.threshold = threshold;
  c.margin = threshold - value;
  c.satisfied = value <= threshold + 1e-15;
  return c;
}

template <class F>
Condition monotone_condition(std::string name, F&& value_at, int T) {
  Condition c;
  c.name = std::move(name);
  const int limit = std::min(T, 100000);
  double worst = std::numeric_limits<double>::infinity();
  double prev = value_at(1);
  double vmax = prev;
  for (int t = 2; t <= limit; ++t) {
    const double cur = value_at(t);
    worst = std::min(worst, prev - cur);
    vmax = std::max(vmax, cur);
    prev = cur;
  }
  if (limit < 2) worst = 0.0;
  c.value = -worst;  // largest observed increase
  c.threshold = 0.0;
  c.margin = worst;
  c.satisfied = worst >= -1e-12 * std::max(1.0, vmax);
  return c;
}
}  // namespace

std::vector<Condition> stepsize_conditions(const Schedule& eta_x, const Schedule& eta_y,
                                           const Schedule& eta_m, const ProblemConstants& k,
                                           double eta_z, int T, double z0_norm) {
  k.validate();
  const double dz = k.d_z(z0_norm);
  const double l_phi = phi_smoothness_constant(k);

  double ex_max = 0.0, ratio_max = 0.0;
  const int limit = std::min(std::max(T, 1), 100000);
  for (int t = 1; t <= limit; ++t) {
    const double ex = eta_x.at(t - 1);
    ex_max = std::max(ex_max, ex);
    ratio_max = std::max(ratio_max, ex / eta_y.at(t - 1));
  }

  std::vector<Condition> cs;
  cs.push_back(threshold_condition("eta_z <= 1/L1", eta_z, 1.0 / k.L1));
  cs.push_back(threshold_condition("eta_x <= 1/(2 L_Phi)", ex_max, 0.5 / l_phi));
  cs.push_back(threshold_condition("eta_x/eta_y <= mu/(4 L1 (L1 + Dz L2))", ratio_max,
                                   k.mu / (4.0 * k.L1 * (k.L1 + dz * k.L2))));
  cs.push_back(threshold_condition("eta_x/eta_y <= mu/(8 L1 (L1 + Dz L2))", ratio_max,
                                   k.mu / (8.0 * k.L1 * (k.L1 + dz * k.L2))));
  cs.push_back(monotone_condition(
      "eta_m non-increasing", [&](int t) { return momentum_clamped(eta_m, t - 1); }, T));
  cs.push_back(monotone_condition(
      "eta_m/eta_x non-increasing",
      [&](int t) { return momentum_clamped(eta_m, t - 1) / eta_x.at(t - 1); }, T));
  cs.push_back(monotone_condition(
      "eta_m/eta_y non-increasing",
      [&](int t) { return momentum_clamped(eta_m, t - 1) / eta_y.at(t - 1); }, T));
  return cs;
}

BoundReport make_bound_report(const Schedule& eta_x, const Schedule& eta_y,
                              const Schedule& eta_m, const ProblemConstants& k,
                              double eta_z, int T, int n, double z0_norm) {
  BoundReport r;
  const StabilityBound sb = stability_bound(eta_x, eta_y, eta_m, k, T, n, z0_norm);
  r.eps_stab = sb.eps;
  r.log_eps_stab = sb.log_eps;
  r.overflowed = sb.overflowed;
  r.d_z = sb.d_z;
  r.c_m = sb.c_m;
  r.c_c = sb.c_c;
  r.l_phi = phi_smoothness_constant(k);

  r.q_exponent = kNaN;
  if (eta_x.kind == ScheduleKind::kDiminishing && eta_m.kind == ScheduleKind::kDiminishing &&
      eta_y.kind == ScheduleKind::kDiminishing && eta_x.a == eta_m.a) {
    r.q_exponent = stability_q_exponent(eta_x.a, eta_y.a, k, n, z0_norm);
  } else {
    r.notes.push_back("q exponent undefined: schedules are not of the matched alpha/t form");
  }
  if (z0_norm != 0.0)
    r.notes.push_back("nonzero z0: the growth-exponent bound uses the contracted inner start, "
                      "which differs from the plain ||z0|| + L0/mu used here");

  r.conditions = stepsize_conditions(eta_x, eta_y, eta_m, k, eta_z, T, z0_norm);
  r.admissible = true;
  for (const auto& c : r.conditions) {
    // the looser printed form of the ratio condition is informational only
    if (c.name.find("(4 L1") != std::string::npos) continue;
    r.admissible = r.admissible && c.satisfied;
  }
  return r;
}

namespace {
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}
}  // namespace

std::string BoundReport::to_text() const {
  std::ostringstream os;
  os << "derived constants: D_z=" << fmt(d_z) << " C_m=" << fmt(c_m) << " C_c=" << fmt(c_c)
     << " L_Phi=" << fmt(l_phi) << '\n';
  os << "stability bound: eps_stab=" << fmt(eps_stab) << " log_eps_stab=" << fmt(log_eps_stab)
     << (overflowed ? " (overflowed: reported as +inf; growth is exponential in T)" : "")
     << '\n';
  os << "growth exponent q: " << fmt(q_exponent) << '\n';
  os << "conditions:\n";
  for (const auto& c : conditions)
    os << "  [" << (c.satisfied ? "PASS" : "FAIL") << "] " << c.name << "  value="
       << fmt(c.value) << " threshold=" << fmt(c.threshold) << " margin=" << fmt(c.margin)
       << '\n';
  os << "admissible: " << (admissible ? "yes" : "no") << '\n';
  for (const auto& n : notes) os << "note: " << n << '\n';
  return os.str();
}

void BoundReport::write_kv(std::ostream& os) const {
  os << "eps_stab=" << fmt(eps_stab) << '\n';
  os << "log_eps_stab=" << fmt(log_eps_stab) << '\n';
  os << "overflowed=" << (overflowed ? 1 : 0) << '\n';
  os << "q_exponent=" << fmt(q_exponent) << '\n';
  os << "L_Phi=" << fmt(l_phi) << '\n';
  os << "D_z=" << fmt(d_z) << '\n';
  os << "C_m=" << fmt(c_m) << '\n';
  os << "C_c=" << fmt(c_c) << '\n';
  os << "admissible=" << (admissible ? 1 : 0) << '\n';
  for (const auto& c : conditions)
    os << "condition." << c.name << "=" << (c.satisfied ? "pass" : "fail") << ':'
       << fmt(c.margin) << '\n';
}

PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& points) {
  PowerLawFit f;
  std::vector<std::pair<double, double>> logs;
  for (const auto& [x, y] : points) {
    if (x > 0.0 && y > 0.0)
      logs.emplace_back(std::log(x), std::log(y));
    else
      ++f.points_dropped;
  }
  f.points_used = static_cast<int>(logs.size());
  double distinct = 0.0;
  for (size_t i = 1; i < logs.size(); ++i)
    if (logs[i].first != logs[0].first) distinct = 1.0;
  if (logs.size() < 2 || distinct == 0.0) return f;  // undefined fit

  double mx = 0.0, my = 0.0;
  for (const auto& [lx, ly] : logs) {
    mx += lx;
    my += ly;
  }
  mx /= logs.size();
  my /= logs.size();
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [lx, ly] : logs) {
    sxx += (lx - mx) * (lx - mx);
    sxy += (lx - mx) * (ly - my);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (const auto& [lx, ly] : logs) {
    const double e = ly - (f.intercept + f.slope * lx);
    rss += e * e;
  }
  if (logs.size() > 2) {
    const double se = std::sqrt(rss / (logs.size() - 2) / sxx);
    f.ci95_half_width = 1.96 * se;
  }
  f.defined = true;
  return f;
}

PowerLawFit convergence_rate_summary(const std::vector<std::pair<int, double>>& min_grad_by_T) {
  std::vector<double> horizons;
  for (const auto& [T, v] : min_grad_by_T) {
    (void)v;
    if (std::find(horizons.begin(), horizons.end(), static_cast<double>(T)) == horizons.end())
      horizons.push_back(static_cast<double>(T));
  }
  if (horizons.size() < 3)
    throw std::invalid_argument("convergence_rate_summary: need at least 3 distinct horizons");
  std::vector<std::pair<double, double>> pts;
  pts.reserve(min_grad_by_T.size());
  for (const auto& [T, v] : min_grad_by_T) pts.emplace_back(static_cast<double>(T), v);
  return fit_power_law(pts);
}

}  // namespace bilevel
