#include "bilevel/problems/data_weighting.hpp"

#include <cmath>

#include "bilevel/validate.hpp"

namespace bilevel {

namespace {
double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }
double sigmoid_prime(double t) {
  const double s = sigmoid(t);
  return s * (1.0 - s);
}
}  // namespace

DataWeightingProblem::DataWeightingProblem(SampleSet<DwSample, DwSample> data, double rho2,
                                           GenParams gen)
    : Problem(data.q(), static_cast<int>(data.lower[0].a.size()), data.n(), data.q()),
      data_(std::move(data)),
      rho2_(rho2),
      gen_(std::move(gen)) {
  data_.validate();
  if (rho2_ <= 0.0)
    throw std::invalid_argument("data_weighting: rho2 must be positive for strong convexity");
}

double DataWeightingProblem::f_value(const Vec&, const Vec& y, int i) const {
  const auto& s = data_.upper[i];
  const double r = s.a.dot(y) - s.b;
  return r * r;
}

Vec DataWeightingProblem::grad_x_f(const Vec&, const Vec&, int) const {
  return Vec::Zero(dx_);
}

Vec DataWeightingProblem::grad_y_f(const Vec&, const Vec& y, int i) const {
  const auto& s = data_.upper[i];
  return 2.0 * s.a * (s.a.dot(y) - s.b);
}

double DataWeightingProblem::g_value(const Vec& x, const Vec& y, int j) const {
  const auto& s = data_.lower[j];
  const double r = s.a.dot(y) - s.b;
  return sigmoid(x[j]) * r * r + rho2_ * y.squaredNorm();
}

Vec DataWeightingProblem::grad_y_g(const Vec& x, const Vec& y, int j) const {
  const auto& s = data_.lower[j];
  return 2.0 * sigmoid(x[j]) * s.a * (s.a.dot(y) - s.b) + 2.0 * rho2_ * y;
}

Vec DataWeightingProblem::hess_yy_g_vp(const Vec& x, const Vec&, int j, const Vec& v) const {
  const auto& s = data_.lower[j];
  return 2.0 * sigmoid(x[j]) * s.a * s.a.dot(v) + 2.0 * rho2_ * v;
}

Vec DataWeightingProblem::cross_xy_g_vp(const Vec& x, const Vec& y, int j, const Vec& v) const {
  const auto& s = data_.lower[j];
  Vec out = Vec::Zero(dx_);
  out[j] = 2.0 * sigmoid_prime(x[j]) * (s.a.dot(y) - s.b) * s.a.dot(v);
  return out;
}

Vec DataWeightingProblem::y_star(const Vec& x) const {
  Mat m = Mat::Zero(dy_, dy_);
  Vec r = Vec::Zero(dy_);
  for (int j = 0; j < q_; ++j) {
    const auto& s = data_.lower[j];
    const double w = sigmoid(x[j]);
    m += w * s.a * s.a.transpose();
    r += w * s.a * s.b;
  }
  m /= q_;
  r /= q_;
  m.diagonal().array() += rho2_;
  return m.ldlt().solve(r);
}

Domain DataWeightingProblem::default_domain() const {
  Domain d;
  d.x_center = Vec::Zero(dx_);
  d.x_radius = 4.0 * std::sqrt(static_cast<double>(dx_));
  d.y_center = Vec::Zero(dy_);
  d.y_radius = gen_.y_true.size() > 0 ? 2.0 * gen_.y_true.norm() + 1.0 : 3.0;
  d.note = "logits within +-4 per coordinate on average, y ball sized to the generating vector";
  return d;
}

ProblemConstants DataWeightingProblem::constants(const Domain& domain) const {
  const double ry = domain.y_sup_norm();
  double a_max = 0.0, res_max = 0.0, av_max = 0.0, L0y = 0.0;
  for (const auto& s : data_.lower) {
    a_max = std::max(a_max, s.a.norm());
    res_max = std::max(res_max, s.a.norm() * ry + std::abs(s.b));
  }
  for (const auto& s : data_.upper) {
    av_max = std::max(av_max, s.a.norm());
    L0y = std::max(L0y, 2.0 * s.a.norm() * (s.a.norm() * ry + std::abs(s.b)));
  }

  ProblemConstants k;
  k.mu = 2.0 * rho2_;
  const double hess_g = 2.0 * a_max * a_max + 2.0 * rho2_;  // sigmoid <= 1
  const double hess_f = 2.0 * av_max * av_max;
  const double cross = 0.5 * a_max * res_max;  // sigmoid' <= 1/4
  k.L1 = std::max({hess_g, hess_f, cross});
  const double sig2_max = 1.0 / (6.0 * std::sqrt(3.0));  // max |sigmoid''|
  k.L2 = std::max({0.5 * a_max * a_max,                      // d hess / dx
                   2.0 * sig2_max * res_max * a_max,         // d cross / dx
                   0.5 * a_max * a_max});                    // d cross / dy
  k.L0 = std::max(L0y, 1e-12);
  auto [d0, d1] = estimate_variance_bounds(*this, domain, /*seed=*/4242, /*probes=*/80);
  k.D0 = d0;
  k.D1 = d1;
  k.domain_note = domain.note;
  k.validate();
  return k;
}

int DataWeightingProblem::corrupted_count() const {
  int c = 0;
  for (const auto& s : data_.lower) c += s.corrupted ? 1 : 0;
  return c;
}

std::pair<double, double> DataWeightingProblem::mean_weights(const Vec& x) const {
  double wc = 0.0, wk = 0.0;
  int nc = 0, nk = 0;
  for (int j = 0; j < q_; ++j) {
    if (data_.lower[j].corrupted) {
      wc += sigmoid(x[j]);
      ++nc;
    } else {
      wk += sigmoid(x[j]);
      ++nk;
    }
  }
  return {nc ? wc / nc : 0.0, nk ? wk / nk : 0.0};
}

DwSample DataWeightingProblem::draw_upper(RngStream& rng) const {
  DwSample s;
  s.a = gen_.feature_sigma * rng.normal_vec(dy_);
  s.b = s.a.dot(gen_.y_true) + gen_.label_noise * rng.normal();
  return s;
}

ProblemPtr DataWeightingProblem::with_replaced_upper(int index, RngStream& rng) const {
  if (index < 0 || index >= n_)
    throw std::out_of_range("data_weighting: upper sample index out of range");
  if (!supports_resample())
    throw std::logic_error("data_weighting: instance has no generating distribution");
  auto copy = std::make_shared<DataWeightingProblem>(*this);
  copy->data_.upper[index] = draw_upper(rng);
  return copy;
}

std::vector<double> DataWeightingProblem::probe_values(const Vec&, const Vec& y, int count,
                                                       uint64_t probe_seed) const {
  if (!supports_resample())
    throw std::logic_error("data_weighting: instance has no generating distribution");
  RngStream rng(probe_seed, StreamId::kData);
  std::vector<double> out(count);
  for (int k = 0; k < count; ++k) {
    const DwSample s = draw_upper(rng);
    const double r = s.a.dot(y) - s.b;
    out[k] = r * r;
  }
  return out;
}

std::shared_ptr<DataWeightingProblem> make_data_weighting(int n, int q, double corrupt_frac,
                                                          uint64_t seed, int d, double rho2,
                                                          double label_noise) {
  if (corrupt_frac < 0.0 || corrupt_frac > 1.0)
    throw std::invalid_argument("data_weighting: corrupt_frac must be in [0, 1]");
  RngStream rng(seed, StreamId::kData);
  DataWeightingProblem::GenParams gen;
  gen.feature_sigma = 1.0 / std::sqrt(static_cast<double>(d));
  gen.label_noise = label_noise;
  gen.y_true = rng.normal_vec(d);
  gen.corrupt_label_sigma =
      std::sqrt(gen.y_true.squaredNorm() / d + label_noise * label_noise);

  SampleSet<DwSample, DwSample> data;
  for (int j = 0; j < q; ++j) {
    DwSample s;
    s.a = gen.feature_sigma * rng.normal_vec(d);
    s.b = s.a.dot(gen.y_true) + label_noise * rng.normal();
    data.lower.push_back(std::move(s));
  }
  for (int i = 0; i < n; ++i) {
    DwSample s;
    s.a = gen.feature_sigma * rng.normal_vec(d);
    s.b = s.a.dot(gen.y_true) + label_noise * rng.normal();
    data.upper.push_back(std::move(s));
  }

  // corrupt a random subset of training labels: replace by marginal draws
  const int n_corrupt = static_cast<int>(std::lround(corrupt_frac * q));
  std::vector<int> order(q);
  for (int j = 0; j < q; ++j) order[j] = j;
  for (int j = q - 1; j > 0; --j) std::swap(order[j], order[rng.draw_index(j + 1)]);
  for (int k = 0; k < n_corrupt; ++k) {
    auto& s = data.lower[order[k]];
    s.b = gen.corrupt_label_sigma * rng.normal();
    s.corrupted = true;
  }

  auto p = std::make_shared<DataWeightingProblem>(std::move(data), rho2, std::move(gen));
  validate_problem(*p, p->default_domain(), seed ^ 0xA5A5u, 3);
  return p;
}

}  // namespace bilevel
