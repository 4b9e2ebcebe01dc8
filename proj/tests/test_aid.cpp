#include <doctest.h>

#include <sstream>

#include "bilevel/aid.hpp"
#include "bilevel/analysis.hpp"
#include "bilevel/problems/ridge.hpp"
#include "bilevel/problems/synthetic_quadratic.hpp"

using namespace bilevel;

namespace {
std::vector<std::vector<int>> repeat_full(int pool, int K) {
  return std::vector<std::vector<int>>(static_cast<size_t>(K), all_indices(pool));
}
}  // namespace

TEST_CASE("inner solve follows the geometric recursion by hand") {
  // H = I, b = 1, z0 = 0, eta = 0.5: z1 = 0.5, z2 = 0.75
  auto p = make_diag_quadratic(Vec::Ones(1), Vec::Ones(1));
  const Vec x = Vec::Zero(1), y = Vec::Zero(1);
  const auto xi = all_indices(1);
  const Vec z = z_inner_loop(*p, x, y, xi, repeat_full(1, 2), Vec::Zero(1), 0.5, 2);
  CHECK(z[0] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("zero target keeps the inner iterate at the origin") {
  auto p = make_diag_quadratic(Vec::Ones(3), Vec::Zero(3));
  const Vec z =
      z_inner_loop(*p, Vec::Zero(1), Vec::Zero(3), all_indices(1), repeat_full(1, 17),
                   Vec::Zero(3), 0.3, 17);
  CHECK(z.norm() == 0.0);
}

TEST_CASE("deterministic diagonal inner solve matches the closed form to 1e-10") {
  Vec diag(4);
  diag << 0.5, 1.0, 2.0, 3.0;
  Vec b(4);
  b << 1.0, -0.5, 2.0, 0.25;
  auto p = make_diag_quadratic(diag, b);
  const double eta = 0.2;
  Vec z0(4);
  z0 << 0.1, -0.2, 0.3, 0.0;
  for (int K : {1, 5, 50}) {
    const Vec z = z_inner_loop(*p, Vec::Zero(1), Vec::Zero(4), all_indices(1),
                               repeat_full(1, K), z0, eta, K);
    for (int c = 0; c < 4; ++c) {
      const double r = std::pow(1.0 - eta * diag[c], K);
      const double want = r * z0[c] + (1.0 - r) * b[c] / diag[c];
      CHECK(std::abs(z[c] - want) <= 1e-10);
    }
  }
}

TEST_CASE("one step on the decoupled quadratic reproduces the hand trace") {
  auto p = make_decoupled_quadratic();  // f = x^2/2, g = y^2/2
  SolverConfig cfg;
  cfg.T = 1;
  cfg.K = 3;
  cfg.eta_z = 0.5;
  cfg.eta_y = Schedule::constant(0.5);
  cfg.eta_m = Schedule::constant(1.0);
  cfg.eta_x = Schedule::constant(0.1);
  SolverRng rng(0);
  AidState s;
  s.x = Vec::Ones(1);
  s.y = Vec::Ones(1);
  s.m = Vec::Zero(1);

  Vec g_seen;
  AidObserver obs = [&](const AidStepInfo& info) { g_seen = *info.g_t; };
  const AidState next = aid_step(*p, s, cfg, rng, &obs);
  CHECK(next.y[0] == doctest::Approx(0.5).epsilon(1e-15));  // y1 = 1 - 0.5*1
  CHECK(g_seen[0] == doctest::Approx(1.0).epsilon(1e-15));  // g1 = grad_x f = x0
  CHECK(next.m[0] == doctest::Approx(1.0).epsilon(1e-15));  // m1 = g1 at eta_m = 1
  CHECK(next.x[0] == doctest::Approx(0.9).epsilon(1e-15));  // x1 = 1 - 0.1*1
}

TEST_CASE("vanishing momentum step freezes m and x moves by -eta_x m0") {
  auto p = make_ridge(4, 6, 2, 19);
  SolverConfig cfg;
  cfg.T = 1;
  cfg.K = 2;
  cfg.eta_z = 0.05;
  cfg.eta_y = Schedule::constant(0.05);
  cfg.eta_x = Schedule::constant(0.1);
  // a denormal step underflows against m0, which realizes eta_m -> 0 exactly
  cfg.eta_m = Schedule::constant(1e-300);
  SolverRng rng(3);
  AidState s;
  s.x = Vec::Constant(1, 1.0);
  s.y = Vec::Zero(2);
  s.m = Vec::Constant(1, 2.0);
  const AidState next = aid_step(*p, s, cfg, rng);
  CHECK(next.m[0] == 2.0);
  CHECK(next.x[0] == doctest::Approx(1.0 - 0.1 * 2.0).epsilon(1e-15));
}

TEST_CASE("full-batch estimate at y* approaches the exact hypergradient") {
  auto p = make_scalar_ridge_demo();
  const Vec x0 = Vec::Constant(1, 1.0);
  const Vec ystar = p->y_star(x0);
  SolverConfig cfg;
  cfg.T = 1;
  cfg.K = 200;
  cfg.eta_z = 1.0 / 3.0;
  cfg.eta_x = cfg.eta_y = cfg.eta_m = Schedule::constant(0.01);
  cfg.full_batch = true;
  SolverRng rng(0);
  AidState s;
  s.x = x0;
  s.y = ystar;
  s.m = Vec::Zero(1);
  Vec g_seen;
  AidObserver obs = [&](const AidStepInfo& info) { g_seen = *info.g_t; };
  aid_step(*p, s, cfg, rng, &obs);
  const Vec exact = exact_hypergradient(*p, x0).grad;
  CHECK(exact[0] == doctest::Approx(-0.125).epsilon(1e-12));
  CHECK(std::abs(g_seen[0] - exact[0]) < 1e-3);
}

TEST_CASE("T = 0 leaves only the initialization in the trace") {
  auto p = make_decoupled_quadratic();
  SolverConfig cfg;
  cfg.T = 0;
  const RunTrace tr = aid_run(*p, cfg);
  REQUIRE(tr.points.size() == 1);
  CHECK(tr.points[0].t == 0);
}

TEST_CASE("identical seeds give bit-identical trajectories") {
  auto p = make_ridge(10, 15, 3, 5);
  SolverConfig cfg;
  cfg.T = 40;
  cfg.K = 4;
  cfg.eta_z = 0.05;
  cfg.eta_x = Schedule::constant(0.02);
  cfg.eta_y = Schedule::constant(0.05);
  cfg.eta_m = Schedule::diminishing(1.0, 10.0);
  cfg.seed = 99;
  const RunTrace a = aid_run(*p, cfg);
  const RunTrace b = aid_run(*p, cfg);
  REQUIRE(a.points.size() == b.points.size());
  for (size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].x == b.points[i].x);
    CHECK(a.points[i].y == b.points[i].y);
    CHECK(a.points[i].m == b.points[i].m);
  }
}

TEST_CASE("momentum stays a convex combination of its inputs") {
  auto p = make_ridge(6, 8, 2, 23);
  SolverConfig cfg;
  cfg.T = 60;
  cfg.K = 3;
  cfg.eta_z = 0.05;
  cfg.eta_x = Schedule::constant(0.02);
  cfg.eta_y = Schedule::constant(0.05);
  cfg.eta_m = Schedule::diminishing(2.0, 4.0);  // clamped to 1 at the first steps
  cfg.seed = 7;
  double prev_m_norm = 0.0;
  const AidObserver obs = [&](const AidStepInfo& info) {
    CHECK(info.eta_m <= 1.0);
    CHECK(info.eta_m > 0.0);
    const double bound = std::max(prev_m_norm, info.g_t->norm());
    CHECK(info.m_t->norm() <= bound + 1e-12);
    prev_m_norm = info.m_t->norm();
  };
  aid_run(*p, cfg, &obs);
}

TEST_CASE("unit momentum step reduces to plain stochastic gradient descent on x") {
  auto p = make_ridge(9, 12, 2, 31);
  SolverConfig cfg;
  cfg.T = 100;
  cfg.K = 5;
  cfg.eta_z = 0.05;
  cfg.eta_x = Schedule::constant(0.03);
  cfg.eta_y = Schedule::constant(0.04);
  cfg.eta_m = Schedule::constant(1.0);
  cfg.seed = 12;
  cfg.record_every = 1;
  const RunTrace tr = aid_run(*p, cfg);

  // reference loop: same streams, same sampling order, x-update uses g directly
  SolverRng rng(cfg.seed);
  Vec x = tr.points[0].x, y = tr.points[0].y;
  for (int t = 1; t <= cfg.T; ++t) {
    std::vector<std::vector<int>> zeta(static_cast<size_t>(cfg.K));
    for (auto& v : zeta) v = rng.inner.draw_indices(p->n_lower(), 1);
    const auto xi = rng.inner.draw_indices(p->n_upper(), 1);
    const Vec b = p->mean_grad_y_f(x, y, xi);
    Vec z = Vec::Zero(p->dy());
    for (int k = 0; k < cfg.K; ++k)
      z -= cfg.eta_z * (p->mean_hess_yy_g_vp(x, y, z, zeta[static_cast<size_t>(k)]) - b);
    const auto zy = rng.y_step.draw_indices(p->n_lower(), 1);
    const auto zx = rng.x_step.draw_indices(p->n_lower(), 1);
    const Vec y_next = y - 0.04 * p->mean_grad_y_g(x, y, zy);
    const Vec g = p->mean_grad_x_f(x, y, xi) - p->mean_cross_xy_g_vp(x, y, z, zx);
    x -= 0.03 * g;
    y = y_next;
  }
  CHECK((tr.points.back().x - x).norm() <= 1e-13 * std::max(1.0, x.norm()));
  CHECK((tr.points.back().y - y).norm() <= 1e-13);
}

TEST_CASE("frozen-x lower step contracts distances at rate 1 - mu eta / 2") {
  auto p = make_scalar_ridge_demo();
  const ProblemConstants k = p->constants();
  const double eta = 0.9 * k.mu / (k.L1 * k.L1);  // contraction regime
  RngStream rng(44, StreamId::kData);
  const Domain dom = p->default_domain();
  for (int probe = 0; probe < 50; ++probe) {
    const Vec x = dom.sample_x(rng);
    const Vec y1 = dom.sample_y(rng);
    const Vec y2 = dom.sample_y(rng);
    const int j = rng.draw_index(p->n_lower());
    const Vec y1n = y1 - eta * p->grad_y_g(x, y1, j);
    const Vec y2n = y2 - eta * p->grad_y_g(x, y2, j);
    CHECK((y1n - y2n).norm() <= (1.0 - k.mu * eta / 2.0) * (y1 - y2).norm() + 1e-12);
  }
}

TEST_CASE("divergent steps abort with a diagnostic naming the iterate") {
  auto p = make_scalar_ridge_demo();
  SolverConfig cfg;
  cfg.T = 2000;
  cfg.K = 1;
  cfg.eta_z = 0.01;
  cfg.eta_x = Schedule::constant(1e-3);
  cfg.eta_y = Schedule::constant(1e6);  // wildly unstable lower step
  cfg.eta_m = Schedule::constant(0.5);
  const RunTrace tr = aid_run(*p, cfg);
  CHECK(tr.aborted);
  CHECK(tr.abort_reason.find("y_t") != std::string::npos);
}

TEST_CASE("trace CSV prints the documented header and 17-digit values") {
  auto p = make_decoupled_quadratic();
  SolverConfig cfg;
  cfg.T = 2;
  cfg.K = 1;
  cfg.eta_z = 0.1;
  cfg.eta_x = cfg.eta_y = cfg.eta_m = Schedule::constant(1.0 / 3.0);
  const RunTrace tr = aid_run(*p, cfg);
  std::ostringstream os;
  tr.write_csv(os);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header == std::string(RunTrace::csv_header()));
  std::string row;
  std::getline(is, row);
  // phi column round-trips exactly through its printed form
  const auto first_comma = row.find(',');
  const auto second_comma = row.find(',', first_comma + 1);
  const double phi = std::stod(row.substr(first_comma + 1, second_comma - first_comma - 1));
  CHECK(phi == tr.points[0].phi);
}
