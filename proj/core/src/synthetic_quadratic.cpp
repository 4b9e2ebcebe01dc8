#include "bilevel/problems/synthetic_quadratic.hpp"

#include <cmath>

#include "bilevel/validate.hpp"

namespace bilevel {

SyntheticQuadratic::SyntheticQuadratic(SampleSet<QuadUpperSample, QuadLowerSample> data,
                                       double cf)
    : Problem(static_cast<int>(data.upper[0].bx.size()),
              static_cast<int>(data.lower[0].d.size()), data.n(), data.q()),
      data_(std::move(data)),
      cf_(cf) {
  data_.validate();
  mean_d_ = Vec::Zero(dy_);
  mean_c_ = Vec::Zero(dy_);
  for (const auto& s : data_.lower) {
    mean_d_ += s.d;
    mean_c_ += s.c;
  }
  mean_d_ /= q_;
  mean_c_ /= q_;
}

double SyntheticQuadratic::f_value(const Vec& x, const Vec& y, int i) const {
  const auto& s = data_.upper[i];
  return 0.5 * cf_ * x.squaredNorm() + s.bx.dot(x) + s.by.dot(y);
}

Vec SyntheticQuadratic::grad_x_f(const Vec& x, const Vec&, int i) const {
  return cf_ * x + data_.upper[i].bx;
}

Vec SyntheticQuadratic::grad_y_f(const Vec&, const Vec&, int i) const {
  return data_.upper[i].by;
}

double SyntheticQuadratic::g_value(const Vec&, const Vec& y, int j) const {
  const auto& s = data_.lower[j];
  return 0.5 * y.dot(s.d.asDiagonal() * y) - s.c.dot(y);
}

Vec SyntheticQuadratic::grad_y_g(const Vec&, const Vec& y, int j) const {
  const auto& s = data_.lower[j];
  return s.d.asDiagonal() * y - s.c;
}

Vec SyntheticQuadratic::hess_yy_g_vp(const Vec&, const Vec&, int j, const Vec& v) const {
  return data_.lower[j].d.asDiagonal() * v;
}

Vec SyntheticQuadratic::cross_xy_g_vp(const Vec&, const Vec&, int, const Vec&) const {
  return Vec::Zero(dx_);
}

Vec SyntheticQuadratic::y_star(const Vec&) const {
  return mean_c_.cwiseQuotient(mean_d_);
}

Domain SyntheticQuadratic::default_domain() const {
  Domain d;
  d.x_center = Vec::Zero(dx_);
  d.x_radius = 2.0;
  d.y_center = Vec::Zero(dy_);
  d.y_radius = 2.0;
  d.note = "balls of radius 2 around the origin";
  return d;
}

ProblemConstants SyntheticQuadratic::constants(const Domain& domain) const {
  ProblemConstants k;
  double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
  double bx_max = 0.0, by_max = 0.0;
  for (const auto& s : data_.lower) {
    dmin = std::min(dmin, s.d.minCoeff());
    dmax = std::max(dmax, s.d.maxCoeff());
  }
  for (const auto& s : data_.upper) {
    bx_max = std::max(bx_max, s.bx.norm());
    by_max = std::max(by_max, s.by.norm());
  }
  k.mu = dmin;
  k.L1 = std::max(dmax, cf_);
  k.L2 = 0.0;
  k.L0 = std::max(cf_ * domain.x_sup_norm() + bx_max, by_max);
  if (k.L0 <= 0.0) k.L0 = 1e-12;  // all-zero linear terms; keep constants valid
  auto [d0, d1] = estimate_variance_bounds(*this, domain, /*seed=*/12345);
  k.D0 = d0;
  k.D1 = d1;
  k.domain_note = domain.note;
  k.validate();
  return k;
}

std::shared_ptr<SyntheticQuadratic> make_decoupled_quadratic() {
  SampleSet<QuadUpperSample, QuadLowerSample> data;
  data.upper.push_back({Vec::Zero(1), Vec::Zero(1)});
  data.lower.push_back({Vec::Ones(1), Vec::Zero(1)});
  return std::make_shared<SyntheticQuadratic>(std::move(data), 1.0);
}

std::shared_ptr<SyntheticQuadratic> make_diag_quadratic(const Vec& hessian_diag, const Vec& b) {
  SampleSet<QuadUpperSample, QuadLowerSample> data;
  data.upper.push_back({Vec::Zero(1), b});
  data.lower.push_back({hessian_diag, Vec::Zero(hessian_diag.size())});
  return std::make_shared<SyntheticQuadratic>(std::move(data), 1.0);
}

std::shared_ptr<SyntheticQuadratic> make_random_quadratic(int dx, int dy, int n, int q,
                                                          uint64_t seed) {
  RngStream rng(seed, StreamId::kData);
  SampleSet<QuadUpperSample, QuadLowerSample> data;
  for (int i = 0; i < n; ++i)
    data.upper.push_back({0.5 * rng.normal_vec(dx), 0.5 * rng.normal_vec(dy)});
  for (int j = 0; j < q; ++j) {
    Vec d(dy);
    for (int c = 0; c < dy; ++c) d[c] = 0.5 + rng.uniform() * 2.0;  // eigenvalues in [0.5, 2.5]
    data.lower.push_back({d, 0.5 * rng.normal_vec(dy)});
  }
  return std::make_shared<SyntheticQuadratic>(std::move(data), 1.0);
}

}  // namespace bilevel
