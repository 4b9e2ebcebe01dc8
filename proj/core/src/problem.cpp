#include "bilevel/problem.hpp"

#include <cmath>
#include <stdexcept>

namespace bilevel {

Vec Domain::sample_x(RngStream& rng) const {
  // Uniform direction, radius scaled by u^(1/d); enough for probe coverage.
  Vec dir = rng.normal_vec(static_cast<int>(x_center.size()));
  double nrm = dir.norm();
  if (nrm == 0.0) nrm = 1.0;
  const double r = x_radius * std::pow(rng.uniform(), 1.0 / std::max<double>(1.0, x_center.size()));
  return x_center + dir * (r / nrm);
}

Vec Domain::sample_y(RngStream& rng) const {
  Vec dir = rng.normal_vec(static_cast<int>(y_center.size()));
  double nrm = dir.norm();
  if (nrm == 0.0) nrm = 1.0;
  const double r = y_radius * std::pow(rng.uniform(), 1.0 / std::max<double>(1.0, y_center.size()));
  return y_center + dir * (r / nrm);
}

void ProblemConstants::validate() const {
  auto pos = [](double v, const char* w) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string("ProblemConstants: ") + w + " must be positive");
  };
  pos(L0, "L0");
  pos(L1, "L1");
  pos(mu, "mu");
  if (L2 < 0.0 || !std::isfinite(L2))
    throw std::invalid_argument("ProblemConstants: L2 must be nonnegative");
  if (D0 < 0.0 || D1 < 0.0 || !std::isfinite(D0) || !std::isfinite(D1))
    throw std::invalid_argument("ProblemConstants: D0, D1 must be nonnegative");
  if (mu > L1 * (1.0 + 1e-12))
    throw std::invalid_argument("ProblemConstants: mu must not exceed L1");
}

Problem::Problem(int dx, int dy, int n, int q) : dx_(dx), dy_(dy), n_(n), q_(q) {
  if (dx < 1 || dy < 1) throw std::invalid_argument("Problem: dimensions must be >= 1");
  if (n < 1 || q < 1) throw std::invalid_argument("Problem: need n >= 1 and q >= 1 samples");
}

Vec Problem::y_star(const Vec&) const {
  throw std::logic_error(name() + ": no closed-form lower-level solution");
}

double Problem::ground_truth_gap(const Vec&) const {
  throw std::logic_error(name() + ": no ground truth");
}

Vec Problem::initial_x(RngStream& rng) const { return 0.1 * rng.normal_vec(dx_); }

ProblemPtr Problem::with_replaced_upper(int, RngStream&) const {
  throw std::logic_error(name() + ": resampling not supported");
}

std::vector<double> Problem::probe_values(const Vec&, const Vec&, int, uint64_t) const {
  throw std::logic_error(name() + ": resampling not supported");
}

namespace {
template <class PerSample>
auto pool_mean(std::span<const int> idx, int pool, PerSample&& per) {
  using R = decltype(per(0));
  if (idx.empty()) {
    R acc = per(0);
    for (int i = 1; i < pool; ++i) acc += per(i);
    return R(acc / static_cast<double>(pool));
  }
  R acc = per(idx[0]);
  for (size_t k = 1; k < idx.size(); ++k) acc += per(idx[k]);
  return R(acc / static_cast<double>(idx.size()));
}
}  // namespace

double Problem::mean_f(const Vec& x, const Vec& y, std::span<const int> idx) const {
  return pool_mean(idx, n_, [&](int i) { return f_value(x, y, i); });
}

Vec Problem::mean_grad_x_f(const Vec& x, const Vec& y, std::span<const int> idx) const {
  return pool_mean(idx, n_, [&](int i) { return grad_x_f(x, y, i); });
}

Vec Problem::mean_grad_y_f(const Vec& x, const Vec& y, std::span<const int> idx) const {
  return pool_mean(idx, n_, [&](int i) { return grad_y_f(x, y, i); });
}

double Problem::mean_g(const Vec& x, const Vec& y, std::span<const int> idx) const {
  return pool_mean(idx, q_, [&](int j) { return g_value(x, y, j); });
}

Vec Problem::mean_grad_y_g(const Vec& x, const Vec& y, std::span<const int> idx) const {
  return pool_mean(idx, q_, [&](int j) { return grad_y_g(x, y, j); });
}

Vec Problem::mean_hess_yy_g_vp(const Vec& x, const Vec& y, const Vec& v,
                               std::span<const int> idx) const {
  return pool_mean(idx, q_, [&](int j) { return hess_yy_g_vp(x, y, j, v); });
}

Vec Problem::mean_cross_xy_g_vp(const Vec& x, const Vec& y, const Vec& v,
                                std::span<const int> idx) const {
  return pool_mean(idx, q_, [&](int j) { return cross_xy_g_vp(x, y, j, v); });
}

Mat Problem::hess_yy_full(const Vec& x, const Vec& y) const {
  Mat h(dy_, dy_);
  Vec e = Vec::Zero(dy_);
  for (int c = 0; c < dy_; ++c) {
    e[c] = 1.0;
    h.col(c) = mean_hess_yy_g_vp(x, y, e);
    e[c] = 0.0;
  }
  // enforce exact symmetry against round-off
  return 0.5 * (h + h.transpose());
}

Mat Problem::cross_xy_full(const Vec& x, const Vec& y) const {
  Mat m(dx_, dy_);
  Vec e = Vec::Zero(dy_);
  for (int c = 0; c < dy_; ++c) {
    e[c] = 1.0;
    m.col(c) = mean_cross_xy_g_vp(x, y, e);
    e[c] = 0.0;
  }
  return m;
}

}  // namespace bilevel
