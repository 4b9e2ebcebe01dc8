#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "bilevel/problem.hpp"
#include "bilevel/schedule.hpp"

namespace bilevel {

class SingularHessianError : public std::runtime_error {
 public:
  SingularHessianError(double min_eig)
      : std::runtime_error("pooled lower Hessian is not positive definite (min eigenvalue " +
                           std::to_string(min_eig) + ")"),
        min_eig(min_eig) {}
  double min_eig;
};

/// Lower-level solution to ||pooled grad||_2 <= tol: the problem's closed form
/// when it has one, otherwise damped Newton on the pooled objective.
Vec solve_y_star(const Problem& p, const Vec& x, double tol = 1e-10);

/// Composite upper objective Phi(x) = (1/n) sum_i f(x, y*(x), xi_i).
double phi_value(const Problem& p, const Vec& x);

struct HypergradResult {
  Vec grad;
  Vec y_star;
  double hess_min_eig = 0.0;
  double hess_cond = 0.0;
};

/// Implicit-function-theorem hypergradient at y*(x):
///   grad Phi = mean grad_x f - Cxy (Hyy)^{-1} mean grad_y f,
/// with the pooled second derivatives assembled densely and the solve done by
/// symmetric eigendecomposition. Throws SingularHessianError when the pooled
/// Hessian is not positive definite.
HypergradResult exact_hypergradient(const Problem& p, const Vec& x);

/// Central finite differences of Phi; the independent cross-check for the
/// implicit-function-theorem assembly.
Vec fd_phi_gradient(const Problem& p, const Vec& x, double h = 6e-6);

/// Closed-form expectation of the hypergradient estimate
///   Delta = grad_x f(xi) - cross(zeta') z^K
/// over all sampled indices, using the independence of the per-step draws:
///   E z^K = eta_z sum_{k<K} (I - eta_z Hbar)^k bbar + (I - eta_z Hbar)^K z0.
Vec expected_delta(const Problem& p, const Vec& x, const Vec& y, int K, double eta_z,
                   const Vec& z0);

/// Literal enumeration of the same expectation over every index tuple
/// (zeta^(1..K), xi, zeta'); exponential in K, guarded by max_tuples.
Vec expected_delta_enumerated(const Problem& p, const Vec& x, const Vec& y, int K,
                              double eta_z, const Vec& z0, long max_tuples = 4000000);

/// Upper bound on ||E Delta - grad Phi||^2 given ||y - y*(x)||:
///   2 (L1 + Dz L2)^2 dist^2 + 2 L1^2 (1 - eta_z mu)^(2K) (Dz + L0/mu)^2.
/// Requires eta_z <= 1/L1.
double hypergradient_bias_bound(const ProblemConstants& k, double y_dist, int K,
                                double eta_z, double z0_norm = 0.0);

struct StabilityBound {
  double eps = 0.0;      // +inf when the sum overflows (constant schedules, large T)
  double log_eps = 0.0;  // always finite, accumulated in log space
  bool overflowed = false;
  double c_m = 0.0, c_c = 0.0, d_z = 0.0;
};

/// Closed-form uniform-stability bound of the momentum solver on neighboring
/// validation sets:
///   eps = sum_t (1+eta_x_t) eta_m_t (Cc/n) prod_{k>t} (1 + eta_x_k eta_m_k Cm
///         + eta_m_k Cm + eta_y_k L1),
/// Cm = 2(n-1)L1/n + 2 L2 Dz + (L1/mu)((n-1)L1/n + Dz L2), Cc = 2L0(1 + L1/mu),
/// Dz = ||z0|| + L0/mu. Momentum steps are clamped to 1 exactly as the solver
/// clamps them.
StabilityBound stability_bound(const Schedule& eta_x, const Schedule& eta_y,
                               const Schedule& eta_m, const ProblemConstants& k, int T,
                               int n, double z0_norm = 0.0);

/// Growth exponent of the bound under eta_x = eta_m = alpha/t, eta_y = beta/t:
///   q = (2 Cm alpha + L1 beta) / (2 Cm alpha + L1 beta + 1) < 1.
double stability_q_exponent(double alpha, double beta, const ProblemConstants& k, int n,
                            double z0_norm = 0.0);

/// Smoothness constant of the composite objective:
///   L_Phi = (mu + L1)(L1 mu^2 + L0 L2 mu + L1^2 mu + L2 L0) / mu^3.
double phi_smoothness_constant(const ProblemConstants& k);

struct Condition {
  std::string name;
  bool satisfied = false;
  double value = 0.0;
  double threshold = 0.0;
  double margin = 0.0;  // threshold - value (monotone checks: slack of the worst step)
};

struct BoundReport {
  double eps_stab = 0.0;
  double log_eps_stab = 0.0;
  bool overflowed = false;
  double q_exponent = 0.0;  // NaN when the schedules are not of the alpha/t form
  double l_phi = 0.0;
  double d_z = 0.0, c_m = 0.0, c_c = 0.0;
  std::vector<Condition> conditions;
  bool admissible = false;
  std::vector<std::string> notes;

  std::string to_text() const;
  void write_kv(std::ostream& os) const;
};

/// Step-size admissibility for convergence. The ratio condition is evaluated
/// in both printed forms, mu/(4 L1 (L1 + Dz L2)) and the stricter
/// mu/(8 L1 (L1 + Dz L2)) that the analysis actually uses; admissibility gates
/// on the stricter one. Monotonicity of eta_m, eta_m/eta_x and eta_m/eta_y is
/// checked over the horizon.
std::vector<Condition> stepsize_conditions(const Schedule& eta_x, const Schedule& eta_y,
                                           const Schedule& eta_m, const ProblemConstants& k,
                                           double eta_z, int T, double z0_norm = 0.0);

/// Full report: stability bound, growth exponent where defined, smoothness
/// constant, and the condition list.
BoundReport make_bound_report(const Schedule& eta_x, const Schedule& eta_y,
                              const Schedule& eta_m, const ProblemConstants& k,
                              double eta_z, int T, int n, double z0_norm = 0.0);

struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;       // log-space
  double ci95_half_width = 0.0; // normal-approximation interval on the slope
  int points_used = 0;
  int points_dropped = 0;  // nonpositive values cannot enter a log-log fit
  bool defined = false;
};

/// Least squares of log(y) on log(x).
PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& points);

/// Fit of min_t ||grad Phi(x_t)||^2 against the horizon; needs at least three
/// distinct horizons (throws std::invalid_argument otherwise).
PowerLawFit convergence_rate_summary(const std::vector<std::pair<int, double>>& min_grad_by_T);

}  // namespace bilevel
