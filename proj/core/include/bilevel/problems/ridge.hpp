#pragma once

#include "bilevel/problem.hpp"
#include "bilevel/sample_set.hpp"

namespace bilevel {

/// Ridge-regression hyperparameter problem with the regularization weight as
/// the scalar upper variable:
///   f(x, y, xi_i)   = 0.5 (av_i . y - bv_i)^2
///   g(x, y, zeta_j) = 0.5 (at_j . y - bt_j)^2 + 0.5 x ||y||^2,   x > 0
/// The lower problem is quadratic with Hessian At'At + xI, so y*(x) has a
/// closed form and the whole composite objective is nonconvex in x.
struct RidgeSample {
  Vec a;
  double b = 0.0;
};

class RidgeProblem : public Problem {
 public:
  struct GenParams {
    double feature_sigma = 1.0;
    double label_noise = 0.1;
    Vec y_true;  // empty when the instance was written out by hand
  };

  RidgeProblem(SampleSet<RidgeSample, RidgeSample> data, Domain domain, GenParams gen);
  RidgeProblem(SampleSet<RidgeSample, RidgeSample> data, Domain domain)
      : RidgeProblem(std::move(data), std::move(domain), GenParams()) {}

  std::string name() const override { return "ridge"; }
  double f_value(const Vec& x, const Vec& y, int i) const override;
  Vec grad_x_f(const Vec& x, const Vec& y, int i) const override;
  Vec grad_y_f(const Vec& x, const Vec& y, int i) const override;
  double g_value(const Vec& x, const Vec& y, int j) const override;
  Vec grad_y_g(const Vec& x, const Vec& y, int j) const override;
  Vec hess_yy_g_vp(const Vec& x, const Vec& y, int j, const Vec& v) const override;
  Vec cross_xy_g_vp(const Vec& x, const Vec& y, int j, const Vec& v) const override;

  bool has_y_star() const override { return true; }
  Vec y_star(const Vec& x) const override;

  Domain default_domain() const override { return domain_; }
  using Problem::constants;
  ProblemConstants constants(const Domain& domain) const override;

  Vec initial_x(RngStream&) const override;

  bool supports_resample() const override { return gen_.y_true.size() > 0; }
  ProblemPtr with_replaced_upper(int index, RngStream& rng) const override;
  std::vector<double> probe_values(const Vec& x, const Vec& y, int count,
                                   uint64_t probe_seed) const override;

  const SampleSet<RidgeSample, RidgeSample>& data() const { return data_; }

 private:
  RidgeSample draw_upper(RngStream& rng) const;
  SampleSet<RidgeSample, RidgeSample> data_;
  Domain domain_;
  GenParams gen_;
  Mat gram_;  // (1/q) sum at at'
  Vec rhs_;   // (1/q) sum at bt
};

/// The scalar instance At = [1], bt = [1], Av = [1], bv = [0]: y*(x) = 1/(1+x)
/// and the composite objective is 1 / (2 (1+x)^2).
std::shared_ptr<RidgeProblem> make_scalar_ridge_demo();

/// Random Gaussian instance with resampling support.
std::shared_ptr<RidgeProblem> make_ridge(int n, int q, int dy, uint64_t seed,
                                         double label_noise = 0.1);

}  // namespace bilevel
