#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bilevel/rng.hpp"
#include "bilevel/types.hpp"

namespace bilevel {

/// Region on which a problem's smoothness/convexity constants are quoted:
/// balls around x_center and y_center. Trajectories are expected to stay
/// inside; constants are meaningless outside.
struct Domain {
  Vec x_center;
  double x_radius = 1.0;
  Vec y_center;
  double y_radius = 1.0;
  std::string note;

  bool contains(const Vec& x, const Vec& y) const {
    return (x - x_center).norm() <= x_radius && (y - y_center).norm() <= y_radius;
  }
  double x_sup_norm() const { return x_center.norm() + x_radius; }
  double y_sup_norm() const { return y_center.norm() + y_radius; }
  Vec sample_x(RngStream& rng) const;
  Vec sample_y(RngStream& rng) const;
};

/// Smoothness and strong-convexity constants on a stated domain:
///   L0  Lipschitz constant of the per-sample upper objective (both blocks),
///   L1  gradient Lipschitz constant (upper objective and lower objective),
///   L2  Lipschitz constant of the lower objective's second derivatives,
///   mu  strong-convexity modulus of the lower objective in y,
///   D0, D1  gradient-variance growth constants of the lower objective.
struct ProblemConstants {
  double L0 = 0.0;
  double L1 = 0.0;
  double L2 = 0.0;
  double mu = 0.0;
  double D0 = 0.0;
  double D1 = 0.0;
  std::string domain_note;

  void validate() const;
  /// Norm bound on the inner linear-solve iterates: ||z0|| + L0/mu.
  double d_z(double z0_norm = 0.0) const { return z0_norm + L0 / mu; }
};

/// A finite-sum bi-level problem
///   min_x (1/n) sum_i f(x, y*(x), xi_i)   s.t.  y*(x) = argmin_y (1/q) sum_j g(x, y, zeta_j)
/// exposing per-sample values, first derivatives, and second-derivative
/// products of g, all analytic. g(x, ., zeta) must be strongly convex for
/// every zeta on the problem's domain. Instances are immutable and can be
/// shared across concurrent runs.
class Problem {
 public:
  virtual ~Problem() = default;

  int dx() const { return dx_; }
  int dy() const { return dy_; }
  int n_upper() const { return n_; }
  int n_lower() const { return q_; }
  virtual std::string name() const = 0;

  // Per-sample operations. i indexes upper samples, j lower samples.
  virtual double f_value(const Vec& x, const Vec& y, int i) const = 0;
  virtual Vec grad_x_f(const Vec& x, const Vec& y, int i) const = 0;
  virtual Vec grad_y_f(const Vec& x, const Vec& y, int i) const = 0;
  virtual double g_value(const Vec& x, const Vec& y, int j) const = 0;
  virtual Vec grad_y_g(const Vec& x, const Vec& y, int j) const = 0;
  /// Hessian-vector product (d^2 g / dy dy) v.
  virtual Vec hess_yy_g_vp(const Vec& x, const Vec& y, int j, const Vec& v) const = 0;
  /// Mixed product: the d_x-vector whose a-th entry is sum_c d^2g/dx_a dy_c v_c.
  virtual Vec cross_xy_g_vp(const Vec& x, const Vec& y, int j, const Vec& v) const = 0;

  // Optional closed-form lower-level solution and ground truth.
  virtual bool has_y_star() const { return false; }
  virtual Vec y_star(const Vec& x) const;
  virtual bool has_ground_truth() const { return false; }
  virtual double ground_truth_gap(const Vec& x) const;

  virtual Domain default_domain() const = 0;
  virtual ProblemConstants constants(const Domain& domain) const = 0;
  ProblemConstants constants() const { return constants(default_domain()); }

  /// Solver initialization defaults: zero y and a small Gaussian x unless a
  /// problem overrides them.
  virtual Vec initial_x(RngStream& rng) const;
  virtual Vec initial_y() const { return Vec::Zero(dy_); }

  // Resampling hooks for coupled-run experiments. A problem that supports
  // them can swap one validation sample for a fresh draw and evaluate the
  // upper objective on held-out probe samples from the same distribution.
  virtual bool supports_resample() const { return false; }
  virtual std::shared_ptr<Problem> with_replaced_upper(int index, RngStream& rng) const;
  /// f(x, y, .) on `count` fresh validation draws; the same probe_seed yields
  /// the same probe samples, so two outputs can be compared pointwise.
  virtual std::vector<double> probe_values(const Vec& x, const Vec& y, int count,
                                           uint64_t probe_seed) const;

  // Pool averages over an index batch; an empty batch means the full pool.
  double mean_f(const Vec& x, const Vec& y, std::span<const int> idx = {}) const;
  Vec mean_grad_x_f(const Vec& x, const Vec& y, std::span<const int> idx = {}) const;
  Vec mean_grad_y_f(const Vec& x, const Vec& y, std::span<const int> idx = {}) const;
  double mean_g(const Vec& x, const Vec& y, std::span<const int> idx = {}) const;
  Vec mean_grad_y_g(const Vec& x, const Vec& y, std::span<const int> idx = {}) const;
  Vec mean_hess_yy_g_vp(const Vec& x, const Vec& y, const Vec& v,
                        std::span<const int> idx = {}) const;
  Vec mean_cross_xy_g_vp(const Vec& x, const Vec& y, const Vec& v,
                         std::span<const int> idx = {}) const;

  /// Dense pool-averaged lower Hessian (d_y x d_y), assembled column by column.
  Mat hess_yy_full(const Vec& x, const Vec& y) const;
  /// Dense pool-averaged mixed second derivative as the map v -> (d_x vector),
  /// returned as a d_x x d_y matrix (column c is the image of basis vector c).
  Mat cross_xy_full(const Vec& x, const Vec& y) const;

 protected:
  Problem(int dx, int dy, int n, int q);
  int dx_, dy_, n_, q_;
};

using ProblemPtr = std::shared_ptr<Problem>;

/// Regenerates a problem instance from a seed (sweeps draw fresh datasets).
using ProblemGen = std::function<ProblemPtr(uint64_t seed)>;

}  // namespace bilevel
