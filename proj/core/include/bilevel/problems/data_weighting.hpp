#pragma once

#include "bilevel/problem.hpp"
#include "bilevel/sample_set.hpp"

namespace bilevel {

/// Training-sample reweighting with a linear model and squared loss. Each
/// lower sample owns one upper coordinate; the weight is sigmoid(x_j), which
/// keeps the printed algorithm unconstrained while the effective weight stays
/// in (0, 1):
///   f(x, y, xi_i)   = (a_i . y - b_i)^2
///   g(x, y, zeta_j) = sigmoid(x_j) (a_j . y - b_j)^2 + rho2 ||y||^2
/// A fraction of the training labels is randomized; learned weights on those
/// samples should fall below the weights on clean samples.
struct DwSample {
  Vec a;
  double b = 0.0;
  bool corrupted = false;
};

class DataWeightingProblem : public Problem {
 public:
  struct GenParams {
    Vec y_true;
    double feature_sigma = 1.0;
    double label_noise = 0.1;
    double corrupt_label_sigma = 1.0;
  };

  DataWeightingProblem(SampleSet<DwSample, DwSample> data, double rho2, GenParams gen);

  std::string name() const override { return "data_weighting"; }
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

  Vec initial_x(RngStream&) const override { return Vec::Zero(dx_); }  // weights 1/2

  bool supports_resample() const override { return gen_.y_true.size() > 0; }
  ProblemPtr with_replaced_upper(int index, RngStream& rng) const override;
  std::vector<double> probe_values(const Vec& x, const Vec& y, int count,
                                   uint64_t probe_seed) const override;

  bool corrupted(int j) const { return data_.lower[j].corrupted; }
  int corrupted_count() const;
  /// Mean sigmoid weight over corrupted and clean training samples.
  std::pair<double, double> mean_weights(const Vec& x) const;

  const SampleSet<DwSample, DwSample>& data() const { return data_; }
  double rho2() const { return rho2_; }

 private:
  DwSample draw_upper(RngStream& rng) const;
  SampleSet<DwSample, DwSample> data_;
  double rho2_;
  GenParams gen_;
};

std::shared_ptr<DataWeightingProblem> make_data_weighting(int n, int q, double corrupt_frac,
                                                          uint64_t seed, int d = 5,
                                                          double rho2 = 0.1,
                                                          double label_noise = 0.1);

}  // namespace bilevel
