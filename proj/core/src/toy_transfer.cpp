#include "bilevel/problems/toy_transfer.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "bilevel/validate.hpp"

namespace bilevel {

ToyTransferProblem::ToyTransferProblem(SampleSet<ToyUpperSample, ToyLowerSample> data,
                                       Mat x_hat, Vec y_hat, double rho1, double rho2,
                                       GenParams gen)
    : Problem(static_cast<int>(x_hat.rows() * x_hat.cols()),
              static_cast<int>(x_hat.cols()), data.n(), data.q()),
      data_(std::move(data)),
      x_hat_(std::move(x_hat)),
      y_hat_(std::move(y_hat)),
      rho1_(rho1),
      rho2_(rho2),
      gen_(gen),
      d_(static_cast<int>(x_hat_.rows())) {
  data_.validate();
  if (rho2_ <= 0.0)
    throw std::invalid_argument("toy_transfer: rho2 must be positive for a strongly convex lower level");
  gram1_ = Mat::Zero(d_, d_);
  rhs1_ = Vec::Zero(d_);
  for (const auto& s : data_.lower) {
    gram1_ += s.a1 * s.a1.transpose();
    rhs1_ += s.a1 * s.b1;
  }
  gram1_ /= q_;
  rhs1_ /= q_;
}

Mat ToyTransferProblem::unflatten(const Vec& x) const {
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                        Eigen::RowMajor>>(x.data(), d_, d_);
}

Vec ToyTransferProblem::flatten(const Mat& X) const {
  Vec out(d_ * d_);
  for (int r = 0; r < d_; ++r)
    for (int c = 0; c < d_; ++c) out[r * d_ + c] = X(r, c);
  return out;
}

double ToyTransferProblem::f_value(const Vec& x, const Vec& y, int i) const {
  const auto& s = data_.upper[i];
  const double r = s.a2.dot(y) - s.b2;
  const Mat X = unflatten(x);
  const Mat e = X.transpose() * X - Mat::Identity(d_, d_);
  return r * r + rho1_ * e.squaredNorm();
}

Vec ToyTransferProblem::grad_x_f(const Vec& x, const Vec&, int) const {
  const Mat X = unflatten(x);
  const Mat e = X.transpose() * X - Mat::Identity(d_, d_);
  return flatten(4.0 * rho1_ * X * e);
}

Vec ToyTransferProblem::grad_y_f(const Vec&, const Vec& y, int i) const {
  const auto& s = data_.upper[i];
  return 2.0 * s.a2 * (s.a2.dot(y) - s.b2);
}

double ToyTransferProblem::g_value(const Vec& x, const Vec& y, int j) const {
  const auto& s = data_.lower[j];
  const Vec sx = unflatten(x).transpose() * s.a1;
  const double r = sx.dot(y) - s.b1;
  return r * r + rho2_ * y.squaredNorm();
}

Vec ToyTransferProblem::grad_y_g(const Vec& x, const Vec& y, int j) const {
  const auto& s = data_.lower[j];
  const Vec sx = unflatten(x).transpose() * s.a1;
  return 2.0 * sx * (sx.dot(y) - s.b1) + 2.0 * rho2_ * y;
}

Vec ToyTransferProblem::hess_yy_g_vp(const Vec& x, const Vec&, int j, const Vec& v) const {
  const auto& s = data_.lower[j];
  const Vec sx = unflatten(x).transpose() * s.a1;
  return 2.0 * sx * sx.dot(v) + 2.0 * rho2_ * v;
}

Vec ToyTransferProblem::cross_xy_g_vp(const Vec& x, const Vec& y, int j, const Vec& v) const {
  const auto& s = data_.lower[j];
  const Vec sx = unflatten(x).transpose() * s.a1;
  const double r = sx.dot(y) - s.b1;
  const Vec w = r * v + sx.dot(v) * y;  // d/dX of grad_y g, contracted with v
  Vec out(dx_);
  for (int u = 0; u < d_; ++u)
    for (int c = 0; c < d_; ++c) out[u * d_ + c] = 2.0 * s.a1[u] * w[c];
  return out;
}

Vec ToyTransferProblem::y_star(const Vec& x) const {
  const Mat X = unflatten(x);
  Mat m = X.transpose() * gram1_ * X;
  m.diagonal().array() += rho2_;
  return m.ldlt().solve(X.transpose() * rhs1_);
}

double ToyTransferProblem::ground_truth_gap(const Vec& x) const {
  return (unflatten(x) - x_hat_).norm();
}

Domain ToyTransferProblem::default_domain() const {
  Domain d;
  d.x_center = Vec::Zero(dx_);
  d.x_radius = 2.0 * std::sqrt(static_cast<double>(d_)) + 1.0;
  d.y_center = Vec::Zero(dy_);
  d.y_radius = 3.0 * y_hat_.norm() + 1.0;
  d.note = "transform ball covering the unitary ground truth, y ball sized to the generating vector";
  return d;
}

ProblemConstants ToyTransferProblem::constants(const Domain& domain) const {
  const double rx = domain.x_sup_norm();
  const double ry = domain.y_sup_norm();
  double a1_max = 0.0, b1_max = 0.0, a2_max = 0.0, L0y = 0.0;
  for (const auto& s : data_.lower) {
    a1_max = std::max(a1_max, s.a1.norm());
    b1_max = std::max(b1_max, std::abs(s.b1));
  }
  for (const auto& s : data_.upper) {
    a2_max = std::max(a2_max, s.a2.norm());
    L0y = std::max(L0y, 2.0 * s.a2.norm() * (s.a2.norm() * ry + std::abs(s.b2)));
  }
  const double sqd = std::sqrt(static_cast<double>(d_));

  ProblemConstants k;
  k.mu = 2.0 * rho2_;
  const double hess_g = 2.0 * a1_max * a1_max * rx * rx + 2.0 * rho2_;
  const double hess_fy = 2.0 * a2_max * a2_max;
  const double hess_fx = 4.0 * rho1_ * (3.0 * rx * rx + 1.0);
  const double cross = 2.0 * a1_max * (2.0 * a1_max * rx * ry + b1_max);
  k.L1 = std::max({hess_g, hess_fy, hess_fx, cross});
  k.L2 = 4.0 * a1_max * a1_max * std::max(rx, ry);
  k.L0 = std::max(L0y, 4.0 * rho1_ * rx * (rx * rx + sqd));
  auto [d0, d1] = estimate_variance_bounds(*this, domain, /*seed=*/99, /*probes=*/60);
  k.D0 = d0;
  k.D1 = d1;
  k.domain_note = domain.note;
  k.validate();
  return k;
}

ToyUpperSample ToyTransferProblem::draw_upper(RngStream& rng) const {
  ToyUpperSample s;
  s.a2 = gen_.data_sigma * rng.normal_vec(d_);
  s.b2 = s.a2.dot(y_hat_) + gen_.noise_sigma * rng.normal();
  return s;
}

ProblemPtr ToyTransferProblem::with_replaced_upper(int index, RngStream& rng) const {
  if (index < 0 || index >= n_)
    throw std::out_of_range("toy_transfer: upper sample index out of range");
  if (!supports_resample())
    throw std::logic_error("toy_transfer: instance has no generating distribution");
  auto copy = std::make_shared<ToyTransferProblem>(*this);
  copy->data_.upper[index] = draw_upper(rng);
  return copy;
}

std::vector<double> ToyTransferProblem::probe_values(const Vec& x, const Vec& y, int count,
                                                     uint64_t probe_seed) const {
  if (!supports_resample())
    throw std::logic_error("toy_transfer: instance has no generating distribution");
  RngStream rng(probe_seed, StreamId::kData);
  const Mat X = unflatten(x);
  const double reg = rho1_ * (X.transpose() * X - Mat::Identity(d_, d_)).squaredNorm();
  std::vector<double> out(count);
  for (int k = 0; k < count; ++k) {
    const ToyUpperSample s = draw_upper(rng);
    const double r = s.a2.dot(y) - s.b2;
    out[k] = r * r + reg;
  }
  return out;
}

std::shared_ptr<ToyTransferProblem> make_toy_transfer(int n, uint64_t seed,
                                                      ToyTransferOptions opts) {
  if (n < 10) throw std::invalid_argument("toy_transfer: need n >= 10");
  RngStream rng(seed, StreamId::kData);
  const int d = opts.d;
  const double data_sigma = std::sqrt(opts.data_variance);
  const double noise_sigma = std::sqrt(opts.noise_variance);

  Mat a1 = data_sigma * rng.normal_mat(opts.q, d);
  Mat a2 = data_sigma * rng.normal_mat(n, d);

  // unitary ground truth: QR of a Gaussian matrix, signs fixed for determinism
  Mat gauss = rng.normal_mat(d, d);
  Eigen::HouseholderQR<Mat> qr(gauss);
  Mat x_hat = qr.householderQ() * Mat::Identity(d, d);
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int c = 0; c < d; ++c)
    if (r(c, c) < 0.0) x_hat.col(c) *= -1.0;

  Vec y_hat = rng.normal_vec(d);

  SampleSet<ToyUpperSample, ToyLowerSample> data;
  const Vec lower_clean = a1 * (x_hat * y_hat);
  for (int j = 0; j < opts.q; ++j)
    data.lower.push_back({a1.row(j).transpose(), lower_clean[j] + noise_sigma * rng.normal()});
  const Vec upper_clean = a2 * y_hat;
  for (int i = 0; i < n; ++i)
    data.upper.push_back({a2.row(i).transpose(), upper_clean[i] + noise_sigma * rng.normal()});

  ToyTransferProblem::GenParams gen{data_sigma, noise_sigma};
  auto p = std::make_shared<ToyTransferProblem>(std::move(data), std::move(x_hat),
                                                std::move(y_hat), opts.rho1, opts.rho2, gen);
  validate_problem(*p, p->default_domain(), seed ^ 0xA5A5u, 3);
  return p;
}

namespace {
void write_vec(std::ostream& os, const Vec& v) {
  os << v.size();
  os.precision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << v[i];
  os << '\n';
}
Vec read_vec(std::istream& is) {
  Eigen::Index sz = 0;
  is >> sz;
  Vec v(sz);
  for (Eigen::Index i = 0; i < sz; ++i) is >> v[i];
  return v;
}
}  // namespace

void ToyTransferProblem::save(std::ostream& os) const {
  os << "toy_transfer v1\n";
  os.precision(17);
  os << d_ << ' ' << n_ << ' ' << q_ << ' ' << rho1_ << ' ' << rho2_ << ' '
     << gen_.data_sigma << ' ' << gen_.noise_sigma << '\n';
  write_vec(os, flatten(x_hat_));
  write_vec(os, y_hat_);
  for (const auto& s : data_.upper) {
    write_vec(os, s.a2);
    os.precision(17);
    os << s.b2 << '\n';
  }
  for (const auto& s : data_.lower) {
    write_vec(os, s.a1);
    os.precision(17);
    os << s.b1 << '\n';
  }
}

std::shared_ptr<ToyTransferProblem> ToyTransferProblem::load(std::istream& is) {
  std::string tag, ver;
  is >> tag >> ver;
  if (tag != "toy_transfer" || ver != "v1")
    throw std::runtime_error("toy_transfer: unrecognized instance file header");
  int d = 0, n = 0, q = 0;
  double rho1 = 0.0, rho2 = 0.0;
  GenParams gen;
  is >> d >> n >> q >> rho1 >> rho2 >> gen.data_sigma >> gen.noise_sigma;
  const Vec xh = read_vec(is);
  Mat x_hat = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                             Eigen::RowMajor>>(xh.data(), d, d);
  Vec y_hat = read_vec(is);
  SampleSet<ToyUpperSample, ToyLowerSample> data;
  for (int i = 0; i < n; ++i) {
    ToyUpperSample s;
    s.a2 = read_vec(is);
    is >> s.b2;
    data.upper.push_back(std::move(s));
  }
  for (int j = 0; j < q; ++j) {
    ToyLowerSample s;
    s.a1 = read_vec(is);
    is >> s.b1;
    data.lower.push_back(std::move(s));
  }
  if (!is) throw std::runtime_error("toy_transfer: truncated instance file");
  return std::make_shared<ToyTransferProblem>(std::move(data), std::move(x_hat),
                                              std::move(y_hat), rho1, rho2, gen);
}

}  // namespace bilevel
