#include <doctest.h>

#include <set>

#include "bilevel/rng.hpp"
#include "bilevel/schedule.hpp"

using namespace bilevel;

TEST_CASE("constant schedule returns its value at any iteration") {
  const Schedule s = Schedule::constant(0.01);
  CHECK(s.at(7) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(s.at(0) == 0.01);
}

TEST_CASE("diminishing schedule evaluates a/(iter + c)") {
  // first step of a run (iteration 0) uses a/c
  const Schedule s1 = Schedule::diminishing(2.0, 1000.0);
  CHECK(s1.at(0) == doctest::Approx(0.002).epsilon(1e-15));
  const Schedule s2 = Schedule::diminishing(1.0, 1.0);
  CHECK(s2.at(1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("horizon-scaled schedule is b/sqrt(T) independent of t") {
  const Schedule s = Schedule::horizon_scaled(2.0, 400);
  CHECK(s.at(0) == doctest::Approx(0.1));
  CHECK(s.at(399) == doctest::Approx(0.1));
}

TEST_CASE("constant and diminishing schedules are non-increasing") {
  const Schedule c = Schedule::constant(0.5);
  const Schedule d = Schedule::diminishing(3.0, 17.0);
  double pc = c.at(0), pd = d.at(0);
  for (int t = 1; t <= 1000000; t = t < 1000 ? t + 1 : t * 2) {
    CHECK(c.at(t) <= pc);
    CHECK(d.at(t) <= pd + 1e-18);
    pc = c.at(t);
    pd = d.at(t);
  }
}

TEST_CASE("schedule text form round-trips") {
  for (const auto& text : {"constant:0.01", "diminishing:2:1000", "horizon:0.5:400"}) {
    const Schedule s = parse_schedule(text);
    CHECK(parse_schedule(s.str()) == s);
  }
  CHECK_THROWS_AS(parse_schedule("bogus:1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_schedule("constant:-1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_schedule("horizon:0.5"), std::invalid_argument);  // no horizon to bind
  CHECK(parse_schedule("horizon:0.5", 400).horizon == 400);
}

TEST_CASE("single-element pool always draws index 0") {
  RngStream r(42, StreamId::kInner);
  CHECK(r.draw_indices(1, 3) == std::vector<int>{0, 0, 0});
}

TEST_CASE("identical seeds replay identical index sequences") {
  RngStream a(123, StreamId::kInner), b(123, StreamId::kInner);
  CHECK(a.draw_indices(1000, 500) == b.draw_indices(1000, 500));
  CHECK(a.counter() == 500);
}

TEST_CASE("sub-streams with different offsets produce different sequences") {
  RngStream a(123, StreamId::kInner), b(123, StreamId::kYStep), c(123, StreamId::kXStep);
  const auto ia = a.draw_indices(1000, 50);
  CHECK(ia != b.draw_indices(1000, 50));
  CHECK(ia != c.draw_indices(1000, 50));
}

TEST_CASE("index draws are close to uniform") {
  // chi-square against the uniform law: 999 dof,945 draws per bucket on
  // average; the 1e-3 quantile of chi2(999) is ~1143(upper), ~866(lower)
  RngStream r(7, StreamId::kData);
  const int pool = 1000, draws = 100000;
  std::vector<int> counts(pool, 0);
  for (int i = 0; i < draws; ++i) ++counts[static_cast<size_t>(r.draw_index(pool))];
  const double expect = static_cast<double>(draws) / pool;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
  CHECK(chi2 > 866.0);
  CHECK(chi2 < 1143.0);
  // every per-bucket frequency within +-5 sigma of uniform
  for (int c : counts) CHECK(std::abs(c - expect) < 5.0 * std::sqrt(expect));
}

TEST_CASE("normal draws have sane moments") {
  RngStream r(5, StreamId::kData);
  double sum = 0.0, sum2 = 0.0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    const double v = r.normal();
    sum += v;
    sum2 += v * v;
  }
  CHECK(sum / N == doctest::Approx(0.0).epsilon(1).scale(0.01));
  CHECK(sum2 / N == doctest::Approx(1.0).epsilon(0.02));
}
