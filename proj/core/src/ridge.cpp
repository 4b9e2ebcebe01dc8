#include "bilevel/problems/ridge.hpp"

#include <cmath>

#include "bilevel/validate.hpp"

namespace bilevel {

RidgeProblem::RidgeProblem(SampleSet<RidgeSample, RidgeSample> data, Domain domain,
                           GenParams gen)
    : Problem(1, static_cast<int>(data.lower[0].a.size()), data.n(), data.q()),
      data_(std::move(data)),
      domain_(std::move(domain)),
      gen_(std::move(gen)) {
  data_.validate();
  gram_ = Mat::Zero(dy_, dy_);
  rhs_ = Vec::Zero(dy_);
  for (const auto& s : data_.lower) {
    gram_ += s.a * s.a.transpose();
    rhs_ += s.a * s.b;
  }
  gram_ /= q_;
  rhs_ /= q_;
}

double RidgeProblem::f_value(const Vec&, const Vec& y, int i) const {
  const auto& s = data_.upper[i];
  const double r = s.a.dot(y) - s.b;
  return 0.5 * r * r;
}

Vec RidgeProblem::grad_x_f(const Vec&, const Vec&, int) const { return Vec::Zero(1); }

Vec RidgeProblem::grad_y_f(const Vec&, const Vec& y, int i) const {
  const auto& s = data_.upper[i];
  return s.a * (s.a.dot(y) - s.b);
}

double RidgeProblem::g_value(const Vec& x, const Vec& y, int j) const {
  const auto& s = data_.lower[j];
  const double r = s.a.dot(y) - s.b;
  return 0.5 * r * r + 0.5 * x[0] * y.squaredNorm();
}

Vec RidgeProblem::grad_y_g(const Vec& x, const Vec& y, int j) const {
  const auto& s = data_.lower[j];
  return s.a * (s.a.dot(y) - s.b) + x[0] * y;
}

Vec RidgeProblem::hess_yy_g_vp(const Vec& x, const Vec&, int j, const Vec& v) const {
  const auto& s = data_.lower[j];
  return s.a * s.a.dot(v) + x[0] * v;
}

Vec RidgeProblem::cross_xy_g_vp(const Vec&, const Vec& y, int, const Vec& v) const {
  Vec out(1);
  out[0] = y.dot(v);
  return out;
}

Vec RidgeProblem::y_star(const Vec& x) const {
  Mat m = gram_;
  m.diagonal().array() += x[0];
  return m.ldlt().solve(rhs_);
}

ProblemConstants RidgeProblem::constants(const Domain& domain) const {
  const double x_lo = domain.x_center[0] - domain.x_radius;
  const double x_hi = domain.x_center[0] + domain.x_radius;
  if (!(x_lo > 0.0))
    throw std::invalid_argument("ridge: constants need a domain with x bounded away from 0");
  const double ry = domain.y_sup_norm();

  double at_min_sq = std::numeric_limits<double>::infinity();
  double at_max_sq = 0.0, av_max_sq = 0.0, L0 = 0.0;
  for (const auto& s : data_.lower) {
    at_min_sq = std::min(at_min_sq, s.a.squaredNorm());
    at_max_sq = std::max(at_max_sq, s.a.squaredNorm());
  }
  for (const auto& s : data_.upper) {
    av_max_sq = std::max(av_max_sq, s.a.squaredNorm());
    L0 = std::max(L0, s.a.norm() * (s.a.norm() * ry + std::abs(s.b)));
  }

  ProblemConstants k;
  // lower Hessian at at' + xI: rank one plus identity
  k.mu = (dy_ == 1 ? at_min_sq : 0.0) + x_lo;
  k.L1 = std::max({at_max_sq + x_hi, av_max_sq, ry});
  k.L2 = 1.0;  // d(hess)/dx = I and d(cross)/dy = I
  k.L0 = std::max(L0, 1e-12);
  auto [d0, d1] = estimate_variance_bounds(*this, domain, /*seed=*/54321);
  k.D0 = d0;
  k.D1 = d1;
  k.domain_note = domain.note;
  k.validate();
  return k;
}

Vec RidgeProblem::initial_x(RngStream&) const {
  // start at the domain center; the objective only makes sense for x > 0
  Vec x(1);
  x[0] = domain_.x_center[0];
  return x;
}

RidgeSample RidgeProblem::draw_upper(RngStream& rng) const {
  RidgeSample s;
  s.a = gen_.feature_sigma * rng.normal_vec(dy_);
  s.b = s.a.dot(gen_.y_true) + gen_.label_noise * rng.normal();
  return s;
}

ProblemPtr RidgeProblem::with_replaced_upper(int index, RngStream& rng) const {
  if (index < 0 || index >= n_) throw std::out_of_range("ridge: upper sample index out of range");
  if (!supports_resample()) throw std::logic_error("ridge: instance has no generating distribution");
  auto copy = std::make_shared<RidgeProblem>(*this);
  copy->data_.upper[index] = draw_upper(rng);
  return copy;
}

std::vector<double> RidgeProblem::probe_values(const Vec&, const Vec& y, int count,
                                               uint64_t probe_seed) const {
  if (!supports_resample()) throw std::logic_error("ridge: instance has no generating distribution");
  RngStream rng(probe_seed, StreamId::kData);
  std::vector<double> out(count);
  for (int k = 0; k < count; ++k) {
    const RidgeSample s = draw_upper(rng);
    const double r = s.a.dot(y) - s.b;
    out[k] = 0.5 * r * r;
  }
  return out;
}

std::shared_ptr<RidgeProblem> make_scalar_ridge_demo() {
  SampleSet<RidgeSample, RidgeSample> data;
  data.upper.push_back({Vec::Ones(1), 0.0});
  data.lower.push_back({Vec::Ones(1), 1.0});
  Domain d;
  d.x_center = Vec::Constant(1, 1.25);
  d.x_radius = 0.75;  // x in [0.5, 2]
  d.y_center = Vec::Zero(1);
  d.y_radius = 2.0;
  d.note = "x in [0.5, 2], |y| <= 2";
  auto p = std::make_shared<RidgeProblem>(std::move(data), std::move(d));
  validate_problem(*p, p->default_domain(), 1, 3);
  return p;
}

std::shared_ptr<RidgeProblem> make_ridge(int n, int q, int dy, uint64_t seed,
                                         double label_noise) {
  RngStream rng(seed, StreamId::kData);
  RidgeProblem::GenParams gen;
  gen.feature_sigma = 1.0 / std::sqrt(static_cast<double>(dy));
  gen.label_noise = label_noise;
  gen.y_true = rng.normal_vec(dy);

  SampleSet<RidgeSample, RidgeSample> data;
  for (int j = 0; j < q; ++j) {
    RidgeSample s;
    s.a = gen.feature_sigma * rng.normal_vec(dy);
    s.b = s.a.dot(gen.y_true) + label_noise * rng.normal();
    data.lower.push_back(std::move(s));
  }
  for (int i = 0; i < n; ++i) {
    RidgeSample s;
    s.a = gen.feature_sigma * rng.normal_vec(dy);
    s.b = s.a.dot(gen.y_true) + label_noise * rng.normal();
    data.upper.push_back(std::move(s));
  }

  Domain d;
  d.x_center = Vec::Constant(1, 1.0);
  d.x_radius = 0.9;  // x in [0.1, 1.9]
  d.y_center = Vec::Zero(dy);
  d.y_radius = 2.0 * gen.y_true.norm() + 1.0;
  d.note = "x in [0.1, 1.9], y ball sized to twice the generating parameter";
  auto p = std::make_shared<RidgeProblem>(std::move(data), std::move(d), std::move(gen));
  validate_problem(*p, p->default_domain(), seed ^ 0xA5A5u, 3);
  return p;
}

}  // namespace bilevel
