#include "bilevel/problems/mixture.hpp"

#include "bilevel/validate.hpp"

namespace bilevel {

namespace {
Eigen::Vector2d a_of(const Eigen::Vector4d& z) { return {3.0 + z[0], 2.0 + z[1]}; }
Eigen::Vector2d c_of(const Eigen::Vector4d& z) { return {1.0 + z[2], 4.0 + z[3]}; }
}  // namespace

MixtureProblem::MixtureProblem(SampleSet<MixtureTarget, MixtureSample> data)
    : Problem(1, 2, data.n(), data.q()), data_(std::move(data)) {
  data_.validate();
  B_ << 1.0, -1.0, 1.0, 1.0;
  mean_a_.setZero();
  mean_Btc_.setZero();
  for (const auto& s : data_.lower) {
    mean_a_ += a_of(s.z);
    mean_Btc_ += B_.transpose() * c_of(s.z);
  }
  mean_a_ /= q_;
  mean_Btc_ /= q_;
}

double MixtureProblem::f_value(const Vec&, const Vec& y, int i) const {
  return (Eigen::Vector2d(y) - data_.upper[i].target).squaredNorm();
}

Vec MixtureProblem::grad_x_f(const Vec&, const Vec&, int) const { return Vec::Zero(1); }

Vec MixtureProblem::grad_y_f(const Vec&, const Vec& y, int i) const {
  return 2.0 * (Eigen::Vector2d(y) - data_.upper[i].target);
}

double MixtureProblem::g_value(const Vec& x, const Vec& y, int j) const {
  const auto& z = data_.lower[j].z;
  const Eigen::Vector2d yy(y);
  return x[0] * (yy - a_of(z)).squaredNorm() + (1.0 - x[0]) * (B_ * yy - c_of(z)).squaredNorm();
}

Vec MixtureProblem::grad_y_g(const Vec& x, const Vec& y, int j) const {
  const auto& z = data_.lower[j].z;
  const Eigen::Vector2d yy(y);
  return 2.0 * x[0] * (yy - a_of(z)) +
         2.0 * (1.0 - x[0]) * B_.transpose() * (B_ * yy - c_of(z));
}

Vec MixtureProblem::hess_yy_g_vp(const Vec& x, const Vec&, int, const Vec& v) const {
  const Eigen::Vector2d vv(v);
  return 2.0 * x[0] * vv + 2.0 * (1.0 - x[0]) * B_.transpose() * (B_ * vv);
}

Vec MixtureProblem::cross_xy_g_vp(const Vec&, const Vec& y, int j, const Vec& v) const {
  const auto& z = data_.lower[j].z;
  const Eigen::Vector2d yy(y);
  const Eigen::Vector2d dgdx = 2.0 * (yy - a_of(z)) - 2.0 * B_.transpose() * (B_ * yy - c_of(z));
  Vec out(1);
  out[0] = dgdx.dot(Eigen::Vector2d(v));
  return out;
}

Vec MixtureProblem::y_star(const Vec& x) const {
  // pooled gradient: 2x (y - mean a) + 2(1-x) (B'B y - B'mean c) = 0, B'B = 2I
  const double h = 2.0 * x[0] + 4.0 * (1.0 - x[0]);
  if (!(h > 0.0)) throw std::runtime_error("mixture: lower level not convex at this x");
  return (2.0 * x[0] * mean_a_ + 2.0 * (1.0 - x[0]) * mean_Btc_) / h;
}

Domain MixtureProblem::default_domain() const {
  Domain d;
  d.x_center = Vec::Constant(1, 0.5);
  d.x_radius = 0.45;  // x in [0.05, 0.95]
  d.y_center = Vec::Zero(2);
  d.y_center << 2.0, 1.5;
  d.y_radius = 2.0;
  d.note = "mixing weight in [0.05, 0.95], y near the population solution";
  return d;
}

ProblemConstants MixtureProblem::constants(const Domain& domain) const {
  const double x_lo = domain.x_center[0] - domain.x_radius;
  const double x_hi = domain.x_center[0] + domain.x_radius;
  if (!(x_hi < 2.0))
    throw std::invalid_argument("mixture: lower level is only strongly convex for x < 2");
  const double ry = domain.y_sup_norm();

  double a_max = 0.0, c_max = 0.0, t_max = 0.0;
  for (const auto& s : data_.lower) {
    a_max = std::max(a_max, a_of(s.z).norm());
    c_max = std::max(c_max, c_of(s.z).norm());
  }
  for (const auto& s : data_.upper) t_max = std::max(t_max, s.target.norm());
  const double bnorm = std::sqrt(2.0);  // ||B||

  ProblemConstants k;
  k.mu = std::min(4.0 - 2.0 * x_hi, 4.0 - 2.0 * x_lo);
  const double hess_max = std::max(4.0 - 2.0 * x_hi, 4.0 - 2.0 * x_lo);
  const double cross_norm =
      2.0 * (ry + a_max) + 2.0 * bnorm * (bnorm * ry + c_max);
  k.L1 = std::max({hess_max, 2.0, cross_norm});
  k.L2 = 2.0;  // || d hess / dx || = || 2I - 2B'B || = 2, same for the mixed block
  k.L0 = 2.0 * (ry + t_max);
  auto [d0, d1] = estimate_variance_bounds(*this, domain, /*seed=*/777);
  k.D0 = d0;
  k.D1 = d1;
  k.domain_note = domain.note;
  k.validate();
  return k;
}

std::shared_ptr<MixtureProblem> make_mixture_population() {
  SampleSet<MixtureTarget, MixtureSample> data;
  data.upper.push_back({Eigen::Vector2d(2.0, 1.0)});
  for (int m = 0; m < 16; ++m) {
    MixtureSample s;
    for (int b = 0; b < 4; ++b) s.z[b] = (m >> b) & 1 ? 1.0 : -1.0;
    data.lower.push_back(s);
  }
  auto p = std::make_shared<MixtureProblem>(std::move(data));
  validate_problem(*p, p->default_domain(), 1, 3);
  return p;
}

std::shared_ptr<MixtureProblem> make_mixture_corrupted() {
  SampleSet<MixtureTarget, MixtureSample> data;
  data.upper.push_back({Eigen::Vector2d(2.0, 1.0)});
  MixtureSample s;
  s.z << -1.0, -1.0, 1.0, -1.0;
  data.lower.push_back(s);
  auto p = std::make_shared<MixtureProblem>(std::move(data));
  validate_problem(*p, p->default_domain(), 1, 3);
  return p;
}

}  // namespace bilevel
