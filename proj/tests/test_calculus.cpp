#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "mixsur/derivatives.hpp"
#include "mixsur/fdcheck.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace mixsur;
using testutil::make_spec;

TEST_CASE("duplication matrix basics") {
  SUBCASE("D = 1 is the 1x1 identity") {
    Matrix<double> g = duplication_matrix(1);
    REQUIRE(g.rows() == 1);
    REQUIRE(g.cols() == 1);
    CHECK(g(0, 0) == 1.0);
  }
  SUBCASE("columns carry one unit for diagonal cells, two otherwise") {
    for (Index dim : {2, 3, 4, 5}) {
      Matrix<double> g = duplication_matrix(dim);
      REQUIRE(g.rows() == dim * dim);
      REQUIRE(g.cols() == vech_size(dim));
      for (Index j = 0; j < dim; ++j)
        for (Index i = j; i < dim; ++i) {
          const double sum = g.col(vech_index(i, j, dim)).sum();
          CHECK(sum == (i == j ? 1.0 : 2.0));
        }
      CHECK(g.sum() == double(dim * dim));
    }
  }
}

TEST_CASE("G vech(A) reproduces vec(A) for symmetric A") {
  std::mt19937_64 rng(201);
  for (int rep = 0; rep < 100; ++rep) {
    std::uniform_int_distribution<Index> dims(1, 5);
    const Index dim = dims(rng);
    Matrix<double> a = testutil::random_matrix(rng, dim, dim);
    a = ((a + a.transpose()) / 2.0).eval();
    Matrix<double> g = duplication_matrix(dim);
    CHECK((g * vech(a) - oracle::vec(a)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("vech_fold equals G' vec(B) for general B") {
  std::mt19937_64 rng(202);
  for (Index dim : {1, 2, 3, 4}) {
    Matrix<double> b = testutil::random_matrix(rng, dim, dim);
    Matrix<double> g = duplication_matrix(dim);
    Vector<double> direct = g.transpose() * oracle::vec(b);
    CHECK((vech_fold(b) - direct).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("indexed Kronecker blocks match their dense definitions") {
  std::mt19937_64 rng(203);
  for (Index dim : {1, 2, 3, 4}) {
    for (int rep = 0; rep < 5; ++rep) {
      Vector<double> b = testutil::random_vector(rng, dim);
      Matrix<double> a = testutil::random_matrix(rng, dim, dim);
      Matrix<double> m = testutil::random_matrix(rng, dim, dim);
      Matrix<double> g = duplication_matrix(dim);

      Matrix<double> row_dense =
          oracle::kron(b.transpose(), a) * g;  // (b' (x) A) G
      CHECK((kron_rowvec_dup(b, a) - row_dense).cwiseAbs().maxCoeff() <
            1e-13);

      Matrix<double> col_dense =
          g.transpose() * oracle::kron(b, a);  // G' (b (x) A)
      CHECK((dup_kron_colvec(b, a) - col_dense).cwiseAbs().maxCoeff() <
            1e-13);

      Matrix<double> sandwich_dense =
          g.transpose() * oracle::kron(m, a) * g;  // G' (M (x) A) G
      CHECK((dup_sandwich(m, a) - sandwich_dense).cwiseAbs().maxCoeff() <
            1e-12);
    }
  }
}

TEST_CASE("analytic score matches central differences") {
  std::mt19937_64 rng(204);
  for (int rep = 0; rep < 8; ++rep) {
    ModelSpec spec = testutil::random_spec(rng);
    Dataset<double> data = testutil::random_dataset(rng, spec, 20);
    Parameters<double> p = testutil::random_parameters(rng, spec);
    Vector<double> analytic = score(p, data, spec).packed(spec);
    Vector<double> numeric = fd_score(p, data, spec);
    CHECK(max_rel_error(analytic, numeric) < 1e-6);
  }
}

TEST_CASE("analytic Hessian matches differenced analytic score") {
  std::mt19937_64 rng(205);
  for (int rep = 0; rep < 5; ++rep) {
    ModelSpec spec = testutil::random_spec(rng);
    Dataset<double> data = testutil::random_dataset(rng, spec, 15);
    Parameters<double> p = testutil::random_parameters(rng, spec);
    Matrix<double> analytic = hessian(p, data, spec);
    Matrix<double> numeric = fd_hessian(p, data, spec);
    CHECK(max_rel_error(analytic, numeric) < 1e-5);
    CHECK((analytic - analytic.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("score and Hessian survive equations with no regressors") {
  std::mt19937_64 rng(206);
  ModelSpec spec = make_spec(3, 2, {2, 0, 1});
  Dataset<double> data = testutil::random_dataset(rng, spec, 25);
  Parameters<double> p = testutil::random_parameters(rng, spec);
  GradientCheck<double> check = gradient_check(p, data, spec);
  CHECK(check.score_error < 1e-6);
  CHECK(check.hessian_error < 1e-5);
}

TEST_CASE("scalar mixture-regression oracle agrees with the block formulas") {
  std::mt19937_64 rng(207);
  for (int rep = 0; rep < 20; ++rep) {
    std::uniform_int_distribution<Index> comps(1, 3), regs(0, 3);
    ModelSpec spec = make_spec(1, comps(rng), {regs(rng)});
    Dataset<double> data = testutil::random_dataset(rng, spec, 15);
    Parameters<double> p = testutil::random_parameters(rng, spec);

    Vector<double> oracle_score;
    Matrix<double> oracle_h =
        oracle::scalar_mixture_hessian(p, data, spec, &oracle_score);
    CHECK((score(p, data, spec).packed(spec) - oracle_score)
              .cwiseAbs()
              .maxCoeff() < 1e-9);
    CHECK((hessian(p, data, spec) - oracle_h).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("score vanishes at the closed-form K = 1 optimum") {
  std::mt19937_64 rng(208);
  ModelSpec spec = make_spec(1, 1, {1});
  Dataset<double> data = testutil::random_dataset(rng, spec, 60);
  // Generate y from a real line so the optimum is interior and clean.
  data.responses.col(0) =
      1.5 + 0.8 * data.pool.col(0).array() +
      0.3 * testutil::random_vector(rng, 60).array();

  oracle::SimpleOls ols =
      oracle::simple_ols(data.pool.col(0), data.responses.col(0));
  Parameters<double> p;
  p.weights = Vector<double>::Ones(1);
  p.coefficients.resize(1);
  p.coefficients << ols.slope;
  Vector<double> l(1);
  l << ols.intercept;
  p.intercepts.push_back(l);
  p.covariances.push_back(ols.ml_variance *
                          Matrix<double>::Identity(1, 1));

  Vector<double> g = score(p, data, spec).packed(spec);
  CHECK(g.cwiseAbs().maxCoeff() < 1e-8 * data.observation_count());
}

TEST_CASE("K = 1 coefficient block is the classical GLS curvature") {
  std::mt19937_64 rng(209);
  ModelSpec spec = make_spec(2, 1, {2, 1});
  Dataset<double> data = testutil::random_dataset(rng, spec, 30);
  Parameters<double> p = testutil::random_parameters(rng, spec);
  Matrix<double> h = hessian(p, data, spec);
  const PackedLayout l = packed_layout(spec);

  Matrix<double> inv = p.covariances[0].inverse();
  Matrix<double> expected =
      Matrix<double>::Zero(l.coefficient_size, l.coefficient_size);
  for (Index i = 0; i < data.observation_count(); ++i) {
    Matrix<double> x = build_design_matrix(data, spec, i);
    expected -= x * inv * x.transpose();
  }
  CHECK((h.block(l.coefficient_offset, l.coefficient_offset,
                 l.coefficient_size, l.coefficient_size) -
         expected)
            .cwiseAbs()
            .maxCoeff() < 1e-9);
}

TEST_CASE("derivatives transform correctly under relabeling") {
  std::mt19937_64 rng(210);
  ModelSpec spec = make_spec(2, 2, {1, 1});
  Dataset<double> data = testutil::random_dataset(rng, spec, 12);
  Parameters<double> p = testutil::random_parameters(rng, spec);

  Parameters<double> swapped = p;
  std::swap(swapped.weights[0], swapped.weights[1]);
  std::swap(swapped.intercepts[0], swapped.intercepts[1]);
  std::swap(swapped.covariances[0], swapped.covariances[1]);

  // Finite differences under both labelings: the analytic formulas must
  // hold in whichever coordinate system the parameters are expressed.
  GradientCheck<double> original = gradient_check(p, data, spec);
  GradientCheck<double> relabeled = gradient_check(swapped, data, spec);
  CHECK(original.score_error < 1e-6);
  CHECK(relabeled.score_error < 1e-6);
  CHECK(original.hessian_error < 1e-5);
  CHECK(relabeled.hessian_error < 1e-5);

  // For K = 2 the free-weight direction flips sign and component blocks
  // swap wholesale.
  Score<double> s = score(p, data, spec);
  Score<double> t = score(swapped, data, spec);
  CHECK(t.weight[0] == doctest::Approx(-s.weight[0]).epsilon(1e-10));
  CHECK((t.coefficient - s.coefficient).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((t.component[0] - s.component[1]).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((t.component[1] - s.component[0]).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("observed information and covariance at a clean optimum") {
  std::mt19937_64 rng(211);
  const Index n = 500;
  ModelSpec spec = make_spec(1, 1, {1});
  Dataset<double> data;
  data.pool = testutil::random_matrix(rng, n, 1);
  data.responses.resize(n, 1);
  data.responses.col(0) =
      2.0 - 1.3 * data.pool.col(0).array() +
      0.7 * testutil::random_vector(rng, n).array();
  data.active = spec;

  oracle::SimpleOls ols =
      oracle::simple_ols(data.pool.col(0), data.responses.col(0));
  Parameters<double> p;
  p.weights = Vector<double>::Ones(1);
  p.coefficients.resize(1);
  p.coefficients << ols.slope;
  Vector<double> l(1);
  l << ols.intercept;
  p.intercepts.push_back(l);
  p.covariances.push_back(ols.ml_variance * Matrix<double>::Identity(1, 1));

  Matrix<double> h = hessian(p, data, spec);
  Matrix<double> info = observed_information(h);
  Matrix<double> cov = covariance_of_estimates(h);
  CHECK((info * cov - Matrix<double>::Identity(3, 3)).cwiseAbs().maxCoeff() <
        1e-8);

  // With K = 1 the packed layout is (beta, lambda, var); the slope's
  // asymptotic standard error should sit within a hair of the classical
  // one at n = 500 (the two differ only in the n vs n-2 denominator).
  const double se = std::sqrt(cov(0, 0));
  CHECK(se == doctest::Approx(ols.slope_se).epsilon(0.05));
}

TEST_CASE("information must be positive definite to invert") {
  Matrix<double> h = Matrix<double>::Identity(3, 3);  // -H negative definite
  CHECK_THROWS_AS(observed_information(h), NotPositiveDefinite);
  CHECK_THROWS_AS(covariance_of_estimates(h), NotPositiveDefinite);
}

TEST_CASE("weight coordinates near the simplex edge still difference cleanly") {
  std::mt19937_64 rng(212);
  ModelSpec spec = make_spec(1, 2, {1});
  Dataset<double> data = testutil::random_dataset(rng, spec, 25);
  Parameters<double> p = testutil::random_parameters(rng, spec);
  p.weights << 0.998, 0.002;  // default step would cross the boundary
  Vector<double> analytic = score(p, data, spec).packed(spec);
  Vector<double> numeric = fd_score(p, data, spec);
  CHECK(max_rel_error(analytic, numeric) < 1e-5);
}
