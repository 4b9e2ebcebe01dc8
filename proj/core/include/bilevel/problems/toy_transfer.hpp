#pragma once

#include <iosfwd>

#include "bilevel/problem.hpp"
#include "bilevel/sample_set.hpp"

namespace bilevel {

/// Linear transfer-learning problem: the upper variable is a d x d transform
/// X (flattened row-major), the lower variable a regression vector y.
///   f(X, y, xi_i)   = (a2_i . y - b2_i)^2 + rho1 ||X'X - I||_F^2
///   g(X, y, zeta_j) = (a1_j' X y - b1_j)^2 + rho2 ||y||^2
/// Data rows are Gaussian; labels come from a unitary ground-truth transform
/// Xhat and a vector yhat: b1 = A1 Xhat yhat + noise, b2 = A2 yhat + noise.
struct ToyUpperSample {
  Vec a2;
  double b2 = 0.0;
};
struct ToyLowerSample {
  Vec a1;
  double b1 = 0.0;
};

class ToyTransferProblem : public Problem {
 public:
  struct GenParams {
    double data_sigma = 0.0;   // feature standard deviation
    double noise_sigma = 0.0;  // label noise standard deviation
  };

  ToyTransferProblem(SampleSet<ToyUpperSample, ToyLowerSample> data, Mat x_hat, Vec y_hat,
                     double rho1, double rho2, GenParams gen);

  std::string name() const override { return "toy_transfer"; }
  double f_value(const Vec& x, const Vec& y, int i) const override;
  Vec grad_x_f(const Vec& x, const Vec& y, int i) const override;
  Vec grad_y_f(const Vec& x, const Vec& y, int i) const override;
  double g_value(const Vec& x, const Vec& y, int j) const override;
  Vec grad_y_g(const Vec& x, const Vec& y, int j) const override;
  Vec hess_yy_g_vp(const Vec& x, const Vec& y, int j, const Vec& v) const override;
  Vec cross_xy_g_vp(const Vec& x, const Vec& y, int j, const Vec& v) const override;

  bool has_y_star() const override { return true; }
  Vec y_star(const Vec& x) const override;
  bool has_ground_truth() const override { return true; }
  /// Frobenius distance of the current transform to the generating one. Raw
  /// distance, no alignment: the metric is reported exactly as computed.
  double ground_truth_gap(const Vec& x) const override;

  Domain default_domain() const override;
  using Problem::constants;
  ProblemConstants constants(const Domain& domain) const override;

  bool supports_resample() const override { return gen_.data_sigma > 0.0; }
  ProblemPtr with_replaced_upper(int index, RngStream& rng) const override;
  std::vector<double> probe_values(const Vec& x, const Vec& y, int count,
                                   uint64_t probe_seed) const override;

  Mat unflatten(const Vec& x) const;
  Vec flatten(const Mat& X) const;
  const Mat& x_hat() const { return x_hat_; }
  const Vec& y_hat() const { return y_hat_; }
  double rho1() const { return rho1_; }
  double rho2() const { return rho2_; }
  const SampleSet<ToyUpperSample, ToyLowerSample>& data() const { return data_; }

  void save(std::ostream& os) const;
  static std::shared_ptr<ToyTransferProblem> load(std::istream& is);

 private:
  ToyUpperSample draw_upper(RngStream& rng) const;
  SampleSet<ToyUpperSample, ToyLowerSample> data_;
  Mat x_hat_;
  Vec y_hat_;
  double rho1_, rho2_;
  GenParams gen_;
  int d_;
  Mat gram1_;  // (1/q) A1'A1
  Vec rhs1_;   // (1/q) A1'b1
};

struct ToyTransferOptions {
  int q = 2000;
  double rho1 = 0.1;
  double rho2 = 0.1;
  double data_variance = 0.05;
  double noise_variance = 0.1;
  int d = 10;
};

std::shared_ptr<ToyTransferProblem> make_toy_transfer(int n, uint64_t seed,
                                                      ToyTransferOptions opts = {});

}  // namespace bilevel
