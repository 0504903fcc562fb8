#include <catch_amalgamated.hpp>

#include <mooqp/moment_matching.hpp>
#include <mooqp/util.hpp>

using namespace mooqp;

namespace {

Matrix random_rows(std::uint64_t seed, Index n, Index f, double lo = 0.05, double hi = 0.95) {
  auto rng = rep_rng(seed);
  return Matrix::NullaryExpr(n, f, [&](Index, Index) { return runif(rng, lo, hi); });
}

PopulationMoments planted_pop(Index f) {
  PopulationMoments pop;
  pop.theta = Vector::LinSpaced(f, 0.3, 0.6);
  pop.sigma_full = Matrix::Identity(f, f) * 0.04;
  for (Index i = 0; i + 1 < f; ++i) {
    pop.sigma_full(i, i + 1) = 0.01;
    pop.sigma_full(i + 1, i) = 0.01;
  }
  pop.N = 1000;
  return pop;
}

}  // namespace

TEST_CASE("additive transform pins the mean exactly") {
  Matrix sample = random_rows(1, 40, 3);
  PopulationMoments pop = planted_pop(3);
  auto out = mm_additive(sample, pop);
  Vector got = out.rows.colwise().mean().transpose();
  CHECK((got - pop.theta).cwiseAbs().maxCoeff() <= 1e-12);
  // Deviations are untouched: the sample covariance is preserved.
  CHECK((sample_cov(out.rows) - sample_cov(sample)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_FALSE(out.fell_back);
  CHECK(out.warnings.empty());
}

TEST_CASE("additive transform on an already-matched sample is the identity") {
  Matrix sample = random_rows(2, 25, 2);
  PopulationMoments pop;
  pop.theta = sample.colwise().mean().transpose();
  pop.sigma_full = sample_cov(sample);
  pop.N = 25;
  auto out = mm_additive(sample, pop);
  CHECK((out.rows - sample).cwiseAbs().maxCoeff() <= 1e-12);
  auto full = mm_full(sample, pop);
  CHECK((full.rows - sample).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("full transform pins mean and covariance") {
  Matrix sample = random_rows(3, 60, 4);
  PopulationMoments pop = planted_pop(4);
  auto out = mm_full(sample, pop);
  Vector got_mean = out.rows.colwise().mean().transpose();
  CHECK((got_mean - pop.theta).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((sample_cov(out.rows) - pop.sigma_full).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK_FALSE(out.fell_back);
}

TEST_CASE("full transform in one dimension is a scale about the mean") {
  auto rng = rep_rng(17);
  Matrix sample(4, 1);
  sample << 0.1, 0.3, 0.5, 0.7;  // mean 0.4, population-style var 0.05
  (void)rng;
  PopulationMoments pop;
  pop.theta = Vector::Constant(1, 0.4);
  pop.sigma_full = Matrix::Constant(1, 1, 0.2);  // var scales 4x => deviations 2x
  pop.N = 100;
  auto out = mm_full(sample, pop);
  Matrix expect(4, 1);
  expect << -0.2, 0.2, 0.6, 1.0;
  CHECK((out.rows - expect).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(out.oob_fraction == Catch::Approx(0.25));  // the -0.2 entry
}

TEST_CASE("singular sample covariance falls back to the shift") {
  Matrix sample(3, 2);
  sample << 0.2, 0.4, 0.2, 0.4, 0.2, 0.4;  // zero variance
  PopulationMoments pop = planted_pop(2);
  auto out = mm_full(sample, pop);
  CHECK(out.fell_back);
  REQUIRE_FALSE(out.warnings.empty());
  CHECK(out.warnings.front().find("singular") != std::string::npos);
  Vector got = out.rows.colwise().mean().transpose();
  CHECK((got - pop.theta).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("product transform rescales coordinates to the target mean") {
  Matrix sample(2, 2);
  sample << 2.0, 1.0, 4.0, 3.0;  // column means 3, 2
  PopulationMoments pop;
  pop.theta = Vector(2);
  pop.theta << 1.5, 2.0;
  pop.sigma_full = Matrix::Identity(2, 2);
  pop.N = 10;
  auto out = mm_product(sample, pop);
  CHECK(out.rows(0, 0) == Catch::Approx(1.0));
  CHECK(out.rows(1, 0) == Catch::Approx(2.0));
  CHECK(out.rows(0, 1) == Catch::Approx(1.0));
  CHECK(out.rows(1, 1) == Catch::Approx(3.0));
  Vector got = out.rows.colwise().mean().transpose();
  CHECK((got - pop.theta).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("product transform passes zero-mean coordinates through") {
  Matrix sample(2, 2);
  sample << 0.0, 0.5, 0.0, 0.7;
  PopulationMoments pop;
  pop.theta = Vector::Constant(2, 0.3);
  pop.sigma_full = Matrix::Identity(2, 2);
  pop.N = 10;
  auto out = mm_product(sample, pop);
  CHECK(out.rows(0, 0) == 0.0);
  CHECK(out.rows(1, 0) == 0.0);
  REQUIRE(out.warnings.size() == 1);
  CHECK(out.warnings.front().find("coordinate 0") != std::string::npos);
  CHECK(out.rows.col(1).mean() == Catch::Approx(0.3));
}

TEST_CASE("out-of-range fraction counts entries outside the unit box") {
  Matrix sample(2, 2);
  sample << 0.9, 0.5, 0.8, 0.5;
  PopulationMoments pop;
  pop.theta = Vector(2);
  pop.theta << 1.1, 0.5;  // pushes the first column above 1
  pop.sigma_full = Matrix::Identity(2, 2);
  pop.N = 10;
  auto out = mm_additive(sample, pop);
  CHECK(out.oob_fraction == Catch::Approx(0.5));
}

TEST_CASE("transforms validate their inputs") {
  PopulationMoments pop = planted_pop(3);
  Matrix one_row = random_rows(4, 1, 3);
  CHECK_THROWS_AS(mm_additive(one_row, pop), BadParams);
  CHECK_THROWS_AS(mm_full(one_row, pop), BadParams);
  CHECK_THROWS_AS(mm_product(one_row, pop), BadParams);
  Matrix wrong = random_rows(5, 10, 2);
  CHECK_THROWS_AS(mm_additive(wrong, pop), DimensionMismatch);
  PopulationMoments bad_cov = planted_pop(3);
  bad_cov.sigma_full = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(mm_full(random_rows(6, 10, 3), bad_cov), DimensionMismatch);
  CHECK_THROWS_AS(sample_cov(Matrix(0, 3)), BadParams);
}

TEST_CASE("population moments round-trip through the transforms") {
  Matrix rows = random_rows(7, 200, 3);
  PopulationMoments pop = population_moments(rows);
  CHECK(pop.N == 200);
  // Subsample, transform, and check the pinned moments.
  auto rng = rep_rng(8);
  auto pick = sample_without_replacement(200, 30, rng);
  Matrix sub(30, 3);
  for (int i = 0; i < 30; ++i) sub.row(i) = rows.row(pick[static_cast<std::size_t>(i)]);
  auto full = mm_full(sub, pop);
  CHECK((sample_cov(full.rows) - pop.sigma_full).cwiseAbs().maxCoeff() <= 1e-10);
  Vector got = full.rows.colwise().mean().transpose();
  CHECK((got - pop.theta).cwiseAbs().maxCoeff() <= 1e-10);
}
