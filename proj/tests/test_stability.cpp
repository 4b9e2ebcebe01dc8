#include <doctest.h>

#include <sstream>

#include "bilevel/problems/ridge.hpp"
#include "bilevel/problems/synthetic_quadratic.hpp"
#include "bilevel/stability.hpp"

using namespace bilevel;

namespace {

SolverConfig small_cfg(int T, uint64_t seed = 0) {
  SolverConfig cfg;
  cfg.T = T;
  cfg.K = 2;
  cfg.eta_z = 0.05;
  cfg.eta_x = Schedule::constant(0.02);
  cfg.eta_y = Schedule::constant(0.05);
  cfg.eta_m = Schedule::constant(0.3);
  cfg.seed = seed;
  cfg.record_every = 0;
  return cfg;
}

// upper objective that never reads its validation samples
class DataFreeProblem : public SyntheticQuadratic {
 public:
  using SyntheticQuadratic::SyntheticQuadratic;
  bool supports_resample() const override { return true; }
  ProblemPtr with_replaced_upper(int, RngStream& rng) const override {
    auto copy = std::make_shared<DataFreeProblem>(*this);
    copy->marker_ = rng.normal();  // dataset "changes", dynamics cannot
    return copy;
  }
  std::vector<double> probe_values(const Vec& x, const Vec&, int count, uint64_t) const override {
    return std::vector<double>(static_cast<size_t>(count), 0.5 * x.squaredNorm());
  }

 private:
  double marker_ = 0.0;
};

ProblemGen data_free_gen() {
  return [](uint64_t) {
    SampleSet<QuadUpperSample, QuadLowerSample> data;
    for (int i = 0; i < 5; ++i) data.upper.push_back({Vec::Zero(1), Vec::Zero(2)});
    data.lower.push_back({Vec::Ones(2), Vec::Ones(2)});
    return std::make_shared<DataFreeProblem>(std::move(data), 1.0);
  };
}

ProblemGen ridge_gen(int n, int q) {
  return [n, q](uint64_t seed) { return make_ridge(n, q, 2, seed); };
}

}  // namespace

TEST_CASE("forced-identical replacement keeps both trajectories bit-identical") {
  const CoupledPair pair = make_coupled_pair(ridge_gen(8, 10), 0, 42, /*force_identical=*/true);
  CoupledRunOptions opts;
  opts.record_series = true;
  const CoupledRunResult r = run_coupled(pair, small_cfg(60), opts);
  REQUIRE(r.valid);
  CHECK(r.div_total == 0.0);
  CHECK(r.fval_gap_max == 0.0);
  for (double d : r.div_series) CHECK(d == 0.0);
}

TEST_CASE("divergence is exactly zero before the swapped index is first drawn") {
  const CoupledPair pair = make_coupled_pair(ridge_gen(6, 9), 2, 7);
  CoupledRunOptions opts;
  opts.record_series = true;
  const CoupledRunResult r = run_coupled(pair, small_cfg(80, 5), opts);
  REQUIRE(r.valid);
  REQUIRE(r.first_hit_t > 0);
  for (int t = 1; t < r.first_hit_t; ++t)
    CHECK(r.div_series[static_cast<size_t>(t - 1)] == 0.0);
  CHECK(r.div_series[static_cast<size_t>(r.first_hit_t - 1)] > 0.0);
}

TEST_CASE("pairs regenerate deterministically from their seed") {
  const auto gen = ridge_gen(5, 6);
  const CoupledPair a = make_coupled_pair(gen, 1, 77);
  const CoupledPair b = make_coupled_pair(gen, 1, 77);
  auto ra = std::static_pointer_cast<RidgeProblem>(a.perturbed);
  auto rb = std::static_pointer_cast<RidgeProblem>(b.perturbed);
  CHECK(ra->data().upper[1].a == rb->data().upper[1].a);
  CHECK(ra->data().upper[1].b == rb->data().upper[1].b);
  // the swapped sample actually differs from the original
  auto base = std::static_pointer_cast<RidgeProblem>(a.base);
  CHECK(ra->data().upper[1].a != base->data().upper[1].a);
  // all other indices untouched
  CHECK(ra->data().upper[0].a == base->data().upper[0].a);
}

TEST_CASE("single-sample validation sets become disjoint after the swap") {
  const CoupledPair pair = make_coupled_pair(ridge_gen(1, 4), 0, 3);
  auto base = std::static_pointer_cast<RidgeProblem>(pair.base);
  auto pert = std::static_pointer_cast<RidgeProblem>(pair.perturbed);
  CHECK(base->data().upper[0].a != pert->data().upper[0].a);
}

TEST_CASE("out-of-range swap index is rejected") {
  CHECK_THROWS_AS(make_coupled_pair(ridge_gen(4, 4), 4, 1), std::out_of_range);
  CHECK_THROWS_AS(make_coupled_pair(ridge_gen(4, 4), -1, 1), std::out_of_range);
}

TEST_CASE("zero-horizon coupled run reports zero divergence") {
  const CoupledPair pair = make_coupled_pair(ridge_gen(5, 5), 0, 11);
  const CoupledRunResult r = run_coupled(pair, small_cfg(0));
  REQUIRE(r.valid);
  CHECK(r.div_total == 0.0);
}

TEST_CASE("data-independent dynamics never diverge, whatever the swap") {
  const CoupledPair pair = make_coupled_pair(data_free_gen(), 3, 15);
  CoupledRunOptions opts;
  opts.record_series = true;
  const CoupledRunResult r = run_coupled(pair, small_cfg(100, 2), opts);
  REQUIRE(r.valid);
  CHECK(r.div_total == 0.0);
  CHECK(r.fval_gap_max == 0.0);
}

TEST_CASE("per-step growth respects the recursion bound in expectation") {
  const int n = 10, q = 12, T = 30, pairs = 100;
  const auto gen = ridge_gen(n, q);
  const ProblemPtr sample = gen(999);
  const ProblemConstants k = sample->constants();
  const SolverConfig cfg = small_cfg(T);

  std::vector<double> mean_d(static_cast<size_t>(T) + 1, 0.0);
  for (int pi = 0; pi < pairs; ++pi) {
    const CoupledPair pair = make_coupled_pair(gen, 0, 1000 + pi);
    SolverConfig c = cfg;
    c.seed = 5000 + pi;
    CoupledRunOptions opts;
    opts.record_series = true;
    opts.probe_count = 0;
    const CoupledRunResult r = run_coupled(pair, c, opts);
    REQUIRE(r.valid);
    for (int t = 1; t <= T; ++t) mean_d[static_cast<size_t>(t)] += r.div_series[t - 1] / pairs;
  }

  const double dz = k.d_z();
  const double cm = 2.0 * (n - 1) * k.L1 / n + 2.0 * k.L2 * dz +
                    (k.L1 / k.mu) * ((n - 1) * k.L1 / n + dz * k.L2);
  const double cc = 2.0 * k.L0 + 2.0 * k.L1 * k.L0 / k.mu;
  for (int t = 1; t <= T; ++t) {
    const double ex = cfg.eta_x.at(t - 1), ey = cfg.eta_y.at(t - 1), em = cfg.eta_m.at(t - 1);
    const double factor = 1.0 + ex * em * cm + em * cm + ey * k.L1;
    const double add = (1.0 + ex) * em * cc / n;
    // empirical means over 100 pairs: allow modest sampling slack
    CHECK(mean_d[static_cast<size_t>(t)] <=
          1.2 * (factor * mean_d[static_cast<size_t>(t - 1)] + add) + 1e-12);
  }
}

TEST_CASE("sweep exponent fit recovers injected power laws exactly") {
  std::vector<CellRow> cells;
  for (int n : {100, 200, 400})
    for (int T : {500, 1000, 2000}) {
      CellRow c;
      c.n = n;
      c.T = T;
      c.schedule = "synthetic";
      c.pairs = c.valid_pairs = 1;
      c.mean_div = std::sqrt(static_cast<double>(T)) / n;
      cells.push_back(c);
    }
  const auto [n_fit, t_fit] = fit_sweep_exponents(cells);
  REQUIRE(n_fit.defined);
  REQUIRE(t_fit.defined);
  CHECK(n_fit.slope == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(t_fit.slope == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("degenerate axes leave the exponent undefined") {
  std::vector<CellRow> cells;
  for (int T : {500, 1000}) {
    CellRow c;
    c.n = 100;
    c.T = T;
    c.valid_pairs = 1;
    c.mean_div = 1.0 / T;
    cells.push_back(c);
  }
  const auto [n_fit, t_fit] = fit_sweep_exponents(cells);
  CHECK(!n_fit.defined);
  CHECK(t_fit.defined);
}

TEST_CASE("stability sweep fills the grid and serializes its three reports") {
  auto gen_for_n = [](int n) { return ridge_gen(n, 8); };
  std::vector<ScheduleTriple> schedules = {
      {"const", Schedule::constant(0.02), Schedule::constant(0.05), Schedule::constant(0.3)}};
  SweepOptions opts;
  opts.pairs_per_cell = 4;
  opts.probe_count = 20;
  SolverConfig base = small_cfg(25);
  const StabilityReport rep = stability_sweep(gen_for_n, {6, 12}, schedules, {25}, base, opts);
  REQUIRE(rep.cells.size() == 2);
  REQUIRE(rep.pairs.size() == 8);
  for (const auto& c : rep.cells) {
    CHECK(c.valid_pairs == 4);
    CHECK(c.mean_div >= 0.0);
    CHECK(std::isfinite(c.bound_log_eps));
  }
  std::ostringstream pairs, cells, fits;
  write_pairs_csv(pairs, rep);
  write_cells_csv(cells, rep);
  write_fits_csv(fits, rep);
  CHECK(pairs.str().find("divergence") != std::string::npos);
  CHECK(cells.str().find("bound_eps") != std::string::npos);
  CHECK(fits.str().rfind("axis,slope", 0) == 0);
}
