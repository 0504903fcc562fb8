#include <algorithm>

#include <catch_amalgamated.hpp>

#include <mooqp/recovery.hpp>
#include <mooqp/util.hpp>

using namespace mooqp;

namespace {

UserScores make_scores(std::initializer_list<double> c, double gamma = 1.0) {
  UserScores s;
  s.user = 0;
  s.c = Vector(static_cast<Index>(c.size()));
  Index k = 0;
  for (double v : c) s.c[k++] = v;
  s.gamma = gamma;
  return s;
}

UserScores random_scores(std::uint64_t seed, int max_m = 20) {
  auto rng = rep_rng(seed);
  int m = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_m));
  UserScores s;
  s.user = 0;
  s.gamma = runif(rng, 0.4, 2.5);
  s.c = Vector::NullaryExpr(m, [&](Index) { return runif(rng, -1.5, 3.0); });
  return s;
}

}  // namespace

TEST_CASE("capped recovery: frozen three-item example") {
  auto plan = recover_capped(make_scores({2.0, 1.0, 0.2}), 1.5);
  REQUIRE(plan.x.size() == 3);
  CHECK(plan.x[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(plan.x[1] == Catch::Approx(0.5).margin(1e-12));
  CHECK(plan.x[2] == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(plan.nu.has_value());
  CHECK(*plan.nu == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(plan.active_pattern.has_value());
  CHECK(plan.active_pattern->first == 1);
  CHECK(plan.active_pattern->second == 2);
}

TEST_CASE("capped recovery: slack cap clips and reports zero multiplier") {
  auto plan = recover_capped(make_scores({0.3, 0.2}), 2.0);
  CHECK(plan.x[0] == Catch::Approx(0.3));
  CHECK(plan.x[1] == Catch::Approx(0.2));
  REQUIRE(plan.nu.has_value());
  CHECK(*plan.nu == 0.0);
}

TEST_CASE("capped recovery: saturated items exactly fill an integer cap") {
  auto plan = recover_capped(make_scores({5.0, 5.0, 5.0}), 3.0);
  CHECK(plan.x.sum() == Catch::Approx(3.0).margin(1e-12));
  CHECK(plan.x.minCoeff() == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(plan.nu.has_value());
  CHECK(*plan.nu == 0.0);
}

TEST_CASE("capped recovery rejects bad parameters") {
  CHECK_THROWS_AS(recover_capped(make_scores({1.0}), 0.0), BadParams);
  auto bad = make_scores({1.0});
  bad.gamma = -1.0;
  CHECK_THROWS_AS(recover_capped(bad, 1.0), BadParams);
}

TEST_CASE("capped recovery satisfies the sorted support structure") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    UserScores s = random_scores(seed);
    auto rng = rep_rng(seed, 77);
    double cap = runif(rng, 0.2, 0.9 * s.c.size());
    auto plan = recover_capped(s, cap);
    const Vector& x = plan.x;

    // Feasibility.
    CHECK(x.minCoeff() >= -1e-12);
    CHECK(x.maxCoeff() <= 1 + 1e-12);
    CHECK(x.sum() <= cap + 1e-9);

    // Order preservation: a strictly better item is never served less.
    for (Index i = 0; i < x.size(); ++i)
      for (Index j = 0; j < x.size(); ++j)
        if (s.c[i] > s.c[j] + 1e-9) CHECK(x[i] >= x[j] - 1e-9);

    // Ones, fractional band, zeros in score order.
    auto order = detail::sort_by_score(s.c);
    int phase = 0;  // 0 = ones, 1 = fractional, 2 = zeros
    for (int idx : order) {
      double v = x[idx];
      if (phase == 0 && v < 1 - 1e-9) phase = 1;
      if (phase == 1 && v < 1e-9) phase = 2;
      if (phase == 0) CHECK(v >= 1 - 1e-9);
      if (phase == 2) CHECK(v <= 1e-9);
    }

    // The reported multiplier reproduces the fractional band.
    if (plan.nu && plan.active_pattern) {
      auto [t1, t2] = *plan.active_pattern;
      for (int s2 = t1; s2 < t2; ++s2) {
        double expect = (s.c[order[static_cast<std::size_t>(s2)]] - *plan.nu) / s.gamma;
        CHECK(x[order[static_cast<std::size_t>(s2)]] ==
              Catch::Approx(std::min(1.0, std::max(0.0, expect))).margin(1e-8));
      }
    }
  }
}

TEST_CASE("breakpoint scan equals literal enumeration") {
  int nu_compared = 0;
  for (std::uint64_t seed = 1000; seed < 1400; ++seed) {
    UserScores s = random_scores(seed, 12);
    auto rng = rep_rng(seed, 78);
    double cap = runif(rng, 0.2, 0.9 * s.c.size());
    auto fast = recover_capped(s, cap);
    auto slow = recover_capped_enumerated(s, cap);
    CHECK((fast.x - slow.x).cwiseAbs().maxCoeff() <= 1e-9);
    if (fast.active_pattern && slow.active_pattern &&
        *fast.active_pattern == *slow.active_pattern &&
        fast.active_pattern->second > fast.active_pattern->first) {
      REQUIRE(fast.nu.has_value());
      REQUIRE(slow.nu.has_value());
      CHECK(*fast.nu == Catch::Approx(*slow.nu).margin(1e-9));
      ++nu_compared;
    }
  }
  CHECK(nu_compared > 100);
}

TEST_CASE("general recovery dispatches by local kind") {
  SECTION("floor on a named item") {
    LocalConstraint lc;
    lc.kind = LocalConstraint::Kind::SumFloor;
    lc.items = {0};
    lc.floor_bound = 0.8;
    auto plan = recover_general(make_scores({0.5, 0.5}), lc);
    CHECK(plan.x[0] == Catch::Approx(0.8).margin(1e-9));
    CHECK(plan.x[1] == Catch::Approx(0.5).margin(1e-9));
    REQUIRE(plan.nu.has_value());
    CHECK(*plan.nu <= 1e-12);  // floor multipliers are reported non-positive
  }
  SECTION("cap over a subset leaves other items at the clip") {
    LocalConstraint lc;
    lc.kind = LocalConstraint::Kind::SumCap;
    lc.items = {0, 1};
    lc.cap = 0.6;
    auto plan = recover_general(make_scores({2.0, 2.0, 0.4}), lc);
    CHECK(plan.x[0] + plan.x[1] == Catch::Approx(0.6).margin(1e-9));
    CHECK(plan.x[2] == Catch::Approx(0.4).margin(1e-9));
  }
  SECTION("full allocation equality") {
    LocalConstraint lc;
    lc.kind = LocalConstraint::Kind::SimplexEq;
    auto plan = recover_general(make_scores({0.2, 0.1, -0.4}), lc);
    CHECK(plan.x.sum() == Catch::Approx(1.0).margin(1e-9));
    CHECK(plan.x.minCoeff() >= -1e-12);
  }
  SECTION("general linear region") {
    LocalConstraint lc;
    lc.kind = LocalConstraint::Kind::GeneralLinear;
    lc.A = Matrix(1, 2);
    lc.A << 1.0, 1.0;
    lc.b = Vector::Constant(1, 1.0);
    auto plan = recover_general(make_scores({2.0, 2.0}), lc);
    CHECK(plan.x[0] == Catch::Approx(0.5).margin(1e-6));
    CHECK(plan.x[1] == Catch::Approx(0.5).margin(1e-6));
    CHECK_FALSE(plan.nu.has_value());
  }
  SECTION("bad subsets are rejected") {
    LocalConstraint lc;
    lc.kind = LocalConstraint::Kind::SumCap;
    lc.items = {5};
    lc.cap = 1.0;
    CHECK_THROWS_AS(recover_general(make_scores({1.0, 1.0}), lc), DimensionMismatch);
  }
}
