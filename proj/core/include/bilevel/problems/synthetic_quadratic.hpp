#pragma once

#include "bilevel/problem.hpp"
#include "bilevel/sample_set.hpp"

namespace bilevel {

/// Separable quadratic with a diagonal lower level:
///   f(x, y, xi_i)   = 0.5 cf ||x||^2 + bx_i . x + by_i . y
///   g(x, y, zeta_j) = 0.5 y' diag(d_j) y - c_j . y
/// g carries no x-coupling, so the mixed second derivative vanishes and the
/// inner linear solve has the closed form of a diagonal geometric recursion.
struct QuadUpperSample {
  Vec bx;
  Vec by;
};
struct QuadLowerSample {
  Vec d;
  Vec c;
};

class SyntheticQuadratic : public Problem {
 public:
  SyntheticQuadratic(SampleSet<QuadUpperSample, QuadLowerSample> data, double cf);

  std::string name() const override { return "quadratic"; }
  double f_value(const Vec& x, const Vec& y, int i) const override;
  Vec grad_x_f(const Vec& x, const Vec& y, int i) const override;
  Vec grad_y_f(const Vec& x, const Vec& y, int i) const override;
  double g_value(const Vec& x, const Vec& y, int j) const override;
  Vec grad_y_g(const Vec& x, const Vec& y, int j) const override;
  Vec hess_yy_g_vp(const Vec& x, const Vec& y, int j, const Vec& v) const override;
  Vec cross_xy_g_vp(const Vec& x, const Vec& y, int j, const Vec& v) const override;

  bool has_y_star() const override { return true; }
  Vec y_star(const Vec& x) const override;

  Domain default_domain() const override;
  using Problem::constants;
  ProblemConstants constants(const Domain& domain) const override;

  const SampleSet<QuadUpperSample, QuadLowerSample>& data() const { return data_; }

 private:
  SampleSet<QuadUpperSample, QuadLowerSample> data_;
  double cf_;
  Vec mean_d_, mean_c_;
};

/// f = x^2/2, g = y^2/2, single sample each; the fully decoupled hand case.
std::shared_ptr<SyntheticQuadratic> make_decoupled_quadratic();

/// Diagonal lower level with constant right-hand side b: f's y-gradient is b
/// for every sample, so the inner solve target is fixed.
std::shared_ptr<SyntheticQuadratic> make_diag_quadratic(const Vec& hessian_diag, const Vec& b);

/// Randomized multi-sample instance for property tests.
std::shared_ptr<SyntheticQuadratic> make_random_quadratic(int dx, int dy, int n, int q,
                                                          uint64_t seed);

}  // namespace bilevel
