#pragma once

#include "bilevel/problem.hpp"
#include "bilevel/sample_set.hpp"

namespace bilevel {

/// Two-source dataset-mixture regression in R^2 with a scalar mixing weight:
///   f(x, y, xi_i)   = || y - target_i ||^2
///   g(x, y, zeta_j) = x || y - a(z_j) ||^2 + (1-x) || B y - c(z_j) ||^2
/// with B = [[1,-1],[1,1]], a(z) = (3+z0, 2+z1), c(z) = (1+z2, 4+z3) and
/// z entries in {-1, +1}. The lower level stays strongly convex for x < 2.
struct MixtureSample {
  Eigen::Vector4d z;
};
struct MixtureTarget {
  Eigen::Vector2d target;
};

class MixtureProblem : public Problem {
 public:
  MixtureProblem(SampleSet<MixtureTarget, MixtureSample> data);

  std::string name() const override { return "mixture"; }
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

 private:
  SampleSet<MixtureTarget, MixtureSample> data_;
  Eigen::Matrix2d B_;
  Eigen::Vector2d mean_a_, mean_Btc_;  // pooled a and B'c
};

/// All 16 sign patterns with equal weight: the population lower objective.
std::shared_ptr<MixtureProblem> make_mixture_population();
/// The single training sample z = (-1, -1, 1, -1) that drives the upper
/// objective to zero at x = 1, y = (2, 1).
std::shared_ptr<MixtureProblem> make_mixture_corrupted();

}  // namespace bilevel
