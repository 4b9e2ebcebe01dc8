#include <doctest.h>

#include "bilevel/analysis.hpp"
#include "bilevel/problems/ridge.hpp"
#include "bilevel/problems/synthetic_quadratic.hpp"
#include "bilevel/problems/toy_transfer.hpp"

using namespace bilevel;

namespace {
ProblemConstants unit_constants() {
  ProblemConstants k;
  k.L0 = k.L1 = k.mu = 1.0;
  k.L2 = 0.0;
  return k;
}
}  // namespace

TEST_CASE("scalar ridge hypergradient matches the closed form at x = 1") {
  // Phi(x) = 1 / (2 (1+x)^2), so Phi'(1) = -1/8
  auto p = make_scalar_ridge_demo();
  const HypergradResult r = exact_hypergradient(*p, Vec::Constant(1, 1.0));
  CHECK(r.grad[0] == doctest::Approx(-0.125).epsilon(1e-12));
  CHECK(r.y_star[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.hess_cond >= 1.0);
}

TEST_CASE("decoupled problems reduce the hypergradient to the plain upper gradient") {
  SampleSet<QuadUpperSample, QuadLowerSample> data;
  data.upper.push_back({Vec::Constant(2, 0.4), Vec::Zero(3)});
  data.upper.push_back({Vec::Constant(2, -0.2), Vec::Zero(3)});
  data.lower.push_back({Vec::Ones(3), Vec::Ones(3)});
  auto p = std::make_shared<SyntheticQuadratic>(std::move(data), 1.0);
  const Vec x = Vec::Constant(2, 0.7);
  const Vec want = p->mean_grad_x_f(x, p->y_star(x));
  CHECK((exact_hypergradient(*p, x).grad - want).norm() < 1e-14);
}

TEST_CASE("hypergradient matches finite differences on the transfer problem") {
  ToyTransferOptions opts;
  opts.q = 50;
  auto p = make_toy_transfer(15, 2, opts);
  RngStream rng(3, StreamId::kData);
  for (int probe = 0; probe < 3; ++probe) {
    const Vec x = p->flatten(p->x_hat()) + 0.3 * rng.normal_vec(p->dx());
    const Vec exact = exact_hypergradient(*p, x).grad;
    const Vec fd = fd_phi_gradient(*p, x);
    CHECK((exact - fd).norm() / exact.norm() < 1e-5);
  }
}

TEST_CASE("an indefinite pooled Hessian raises the singular-Hessian error") {
  SampleSet<QuadUpperSample, QuadLowerSample> data;
  data.upper.push_back({Vec::Zero(1), Vec::Ones(2)});
  Vec d(2);
  d << 1.0, -0.1;
  data.lower.push_back({d, Vec::Zero(2)});
  SyntheticQuadratic bad(std::move(data), 1.0);
  CHECK_THROWS_AS(exact_hypergradient(bad, Vec::Zero(1)), SingularHessianError);
}

TEST_CASE("bias bound: vanishing terms and the pure-contraction form") {
  ProblemConstants k = unit_constants();
  // y at the solution, huge K: both terms vanish
  CHECK(hypergradient_bias_bound(k, 0.0, 100000, 1.0) == doctest::Approx(0.0));
  // with L2 = 0 and y at the solution only the contraction term survives
  const double dz = 1.0;  // L0/mu
  for (int K : {1, 5, 20}) {
    const double want = 2.0 * std::pow(1.0 - 0.5, 2 * K) * std::pow(dz + 1.0, 2.0);
    CHECK(hypergradient_bias_bound(k, 0.0, K, 0.5) == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK_THROWS_AS(hypergradient_bias_bound(k, 0.0, 3, 1.5), std::invalid_argument);
}

TEST_CASE("bias bound is monotone: down in K, up in the lower-level distance") {
  auto p = make_scalar_ridge_demo();
  const ProblemConstants k = p->constants();
  double prev = 1e300;
  for (int K = 1; K <= 256; K *= 2) {
    const double b = hypergradient_bias_bound(k, 0.3, K, 1.0 / k.L1);
    CHECK(b <= prev + 1e-15);
    prev = b;
  }
  prev = -1.0;
  for (double dist : {0.0, 0.1, 0.5, 1.0, 2.0}) {
    const double b = hypergradient_bias_bound(k, dist, 5, 1.0 / k.L1);
    CHECK(b > prev);
    prev = b;
  }
}

TEST_CASE("closed-form expected estimate equals exhaustive enumeration on small pools") {
  auto p = make_ridge(2, 3, 2, 8);
  RngStream rng(31, StreamId::kData);
  const Domain dom = p->default_domain();
  for (int probe = 0; probe < 3; ++probe) {
    const Vec x = dom.sample_x(rng);
    const Vec y = dom.sample_y(rng);
    for (int K : {1, 2, 4}) {
      const Vec closed = expected_delta(*p, x, y, K, 0.1, Vec::Zero(2));
      const Vec enumerated = expected_delta_enumerated(*p, x, y, K, 0.1, Vec::Zero(2));
      CHECK((closed - enumerated).norm() < 1e-12);
    }
  }
  CHECK_THROWS_AS(expected_delta_enumerated(*p, dom.sample_x(rng), dom.sample_y(rng), 30, 0.1,
                                            Vec::Zero(2)),
                  std::invalid_argument);
}

TEST_CASE("measured estimate bias stays under the bound on the scalar ridge problem") {
  auto p = make_scalar_ridge_demo();
  const ProblemConstants k = p->constants();
  const Vec x = Vec::Constant(1, 1.0);
  const Vec ystar = p->y_star(x);
  const Vec exact = exact_hypergradient(*p, x).grad;
  const double eta_z = 1.0 / k.L1;
  for (int K : {1, 5, 20}) {
    for (double dist : {0.0, 0.1, 1.0}) {
      const Vec y = ystar + Vec::Constant(1, dist);
      const Vec e_delta = expected_delta_enumerated(*p, x, y, K, eta_z, Vec::Zero(1));
      const double measured = (e_delta - exact).squaredNorm();
      CHECK(measured <= hypergradient_bias_bound(k, dist, K, eta_z) + 1e-15);
    }
  }
}

TEST_CASE("stability bound at T = 1 evaluates the bare additive term") {
  // (1 + 0.1) * 0.1 * Cc / n with Cc = 4 and n = 100
  const StabilityBound sb =
      stability_bound(Schedule::constant(0.1), Schedule::constant(0.1),
                      Schedule::constant(0.1), unit_constants(), 1, 100);
  CHECK(sb.eps == doctest::Approx(0.0044).epsilon(1e-12));
  CHECK(sb.c_c == doctest::Approx(4.0));
  CHECK(!sb.overflowed);
  CHECK(std::exp(sb.log_eps) == doctest::Approx(sb.eps).epsilon(1e-12));
}

TEST_CASE("stability bound vanishes as the validation set grows") {
  const auto s = Schedule::constant(0.1);
  const double tiny =
      stability_bound(s, s, s, unit_constants(), 1, 1000000000).eps;
  CHECK(tiny < 1e-8);
}

TEST_CASE("stability bound grows in T and shrinks in n on a moderate grid") {
  const Schedule d = Schedule::diminishing(0.5, 1.0);
  double prev = 0.0;
  for (int T : {1, 10, 100, 1000}) {
    const double b = stability_bound(d, d, d, unit_constants(), T, 50).eps;
    CHECK(b > prev);
    prev = b;
  }
  prev = 1e300;
  for (int n : {10, 20, 50, 100, 400}) {
    const double b = stability_bound(d, d, d, unit_constants(), 200, n).eps;
    CHECK(b < prev);
    prev = b;
  }
}

TEST_CASE("diminishing-schedule bound growth tracks the predicted exponent") {
  // alpha/t steps with alpha = 0.04, beta = 0.005 on unit constants, n = 100;
  // reference values computed independently from the closed-form sum
  const Schedule sx = Schedule::diminishing(0.04, 1.0);
  const Schedule sy = Schedule::diminishing(0.005, 1.0);
  const ProblemConstants k = unit_constants();
  const double e3 = stability_bound(sx, sy, sx, k, 1000, 100).eps;
  const double e4 = stability_bound(sx, sy, sx, k, 10000, 100).eps;
  CHECK(e3 == doctest::Approx(0.019579154834009117).epsilon(1e-9));
  CHECK(e4 == doctest::Approx(0.030297561531786227).epsilon(1e-9));
  const double q = stability_q_exponent(0.04, 0.005, k, 100);
  CHECK(q == doctest::Approx(0.19523579591179785).epsilon(1e-12));
  CHECK(q < 1.0);
  const double ratio = e4 / e3;
  CHECK(std::abs(ratio - std::pow(10.0, q)) / std::pow(10.0, q) < 0.15);
}

TEST_CASE("constant schedules overflow the bound at large T and flag it") {
  const auto s = Schedule::constant(0.5);
  const StabilityBound sb = stability_bound(s, s, s, unit_constants(), 200000, 10);
  CHECK(sb.overflowed);
  CHECK(std::isinf(sb.eps));
  CHECK(std::isfinite(sb.log_eps));
  CHECK(sb.log_eps > 500.0);
}

TEST_CASE("smoothness constant of the composite objective, by hand") {
  // L0 = L1 = mu = 1, L2 = 0: (1+1)(1 + 0 + 1 + 0)/1 = 4
  CHECK(phi_smoothness_constant(unit_constants()) == doctest::Approx(4.0));
}

TEST_CASE("step-size conditions pass for small constants and report margins") {
  const ProblemConstants k = unit_constants();
  // eta_x cap is 1/(2*4) = 0.125; ratio cap (strict form) is 1/8
  const Schedule ex = Schedule::constant(0.01);
  const Schedule ey = Schedule::constant(0.10);
  const Schedule em = Schedule::constant(0.05);
  const BoundReport r = make_bound_report(ex, ey, em, k, 0.9, 100, 50);
  CHECK(r.l_phi == doctest::Approx(4.0));
  for (const auto& c : r.conditions) {
    CAPTURE(c.name);
    CHECK(c.satisfied);
    CHECK(c.margin >= 0.0);
  }
  CHECK(r.admissible);
}

TEST_CASE("an increasing momentum schedule fails the monotonicity condition") {
  const ProblemConstants k = unit_constants();
  const Schedule ex = Schedule::constant(0.01);
  const Schedule ey = Schedule::constant(0.10);
  // eta_m / eta_x increases when eta_m is constant and eta_x diminishes
  const auto cs = stepsize_conditions(Schedule::diminishing(0.01, 1.0), ey,
                                      Schedule::constant(0.05), k, 0.9, 100);
  bool found = false;
  for (const auto& c : cs)
    if (c.name == "eta_m/eta_x non-increasing") {
      found = true;
      CHECK(!c.satisfied);
    }
  CHECK(found);
  (void)ex;
}

TEST_CASE("an oversized inner step fails the named condition") {
  const auto cs = stepsize_conditions(Schedule::constant(0.01), Schedule::constant(0.1),
                                      Schedule::constant(0.05), unit_constants(), 1.5, 10);
  bool found = false;
  for (const auto& c : cs)
    if (c.name == "eta_z <= 1/L1") {
      found = true;
      CHECK(!c.satisfied);
      CHECK(c.margin < 0.0);
    }
  CHECK(found);
}

TEST_CASE("power-law fit recovers synthetic exponents to machine precision") {
  std::vector<std::pair<double, double>> half, flat;
  for (double T : {1000.0, 2000.0, 4000.0, 8000.0, 16000.0}) {
    half.emplace_back(T, std::pow(T, -0.5));
    flat.emplace_back(T, 3.7);
  }
  const PowerLawFit fh = fit_power_law(half);
  CHECK(fh.defined);
  CHECK(fh.slope == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(fit_power_law(flat).slope == doctest::Approx(0.0));
}

TEST_CASE("convergence summary needs at least three horizons") {
  std::vector<std::pair<int, double>> two = {{1000, 0.1}, {1000, 0.2}, {4000, 0.05}};
  CHECK_THROWS_AS(convergence_rate_summary(two), std::invalid_argument);
  std::vector<std::pair<int, double>> three = {{1000, 0.1}, {4000, 0.05}, {16000, 0.025}};
  CHECK(convergence_rate_summary(three).defined);
}

TEST_CASE("lower-level solutions are Lipschitz in x with constant L1/mu") {
  for (const ProblemPtr& p :
       {ProblemPtr(make_scalar_ridge_demo()), ProblemPtr(make_ridge(5, 8, 2, 44))}) {
    const ProblemConstants k = p->constants();
    RngStream rng(13, StreamId::kData);
    const Domain dom = p->default_domain();
    for (int probe = 0; probe < 25; ++probe) {
      const Vec x1 = dom.sample_x(rng), x2 = dom.sample_x(rng);
      if ((x1 - x2).norm() < 1e-9) continue;
      const double ratio = (p->y_star(x1) - p->y_star(x2)).norm() / (x1 - x2).norm();
      CHECK(ratio <= k.L1 / k.mu + 1e-6);
    }
  }
}

TEST_CASE("hypergradients are Lipschitz with constant at most L_Phi on the domain") {
  auto p = make_scalar_ridge_demo();
  const ProblemConstants k = p->constants();
  const double l_phi = phi_smoothness_constant(k);
  RngStream rng(14, StreamId::kData);
  const Domain dom = p->default_domain();
  for (int probe = 0; probe < 25; ++probe) {
    const Vec x1 = dom.sample_x(rng), x2 = dom.sample_x(rng);
    if ((x1 - x2).norm() < 1e-9) continue;
    const double ratio = (exact_hypergradient(*p, x1).grad - exact_hypergradient(*p, x2).grad)
                             .norm() /
                         (x1 - x2).norm();
    CHECK(ratio <= l_phi + 1e-6);
  }
}

TEST_CASE("bound report serializes both human and machine forms") {
  const BoundReport r =
      make_bound_report(Schedule::constant(0.01), Schedule::constant(0.1),
                        Schedule::constant(0.05), unit_constants(), 0.9, 50, 25);
  const std::string text = r.to_text();
  CHECK(text.find("eps_stab=") != std::string::npos);
  CHECK(text.find("admissible: yes") != std::string::npos);
  std::ostringstream kv;
  r.write_kv(kv);
  CHECK(kv.str().find("L_Phi=4") != std::string::npos);
  CHECK(kv.str().find("condition.eta_z <= 1/L1=pass") != std::string::npos);
}
