#pragma once

// Shared generators for randomized tests.  Everything is driven by an
// explicit engine so failures reproduce from the seed printed by the test.

#include <Eigen/Dense>

#include <random>
#include <vector>

#include "mixsur/types.hpp"

namespace testutil {

using mixsur::Dataset;
using mixsur::Index;
using mixsur::Matrix;
using mixsur::ModelSpec;
using mixsur::Parameters;
using mixsur::Vector;

inline ModelSpec make_spec(Index dim, Index components,
                           const std::vector<Index>& per_equation) {
  ModelSpec spec;
  spec.response_count = dim;
  spec.component_count = components;
  Index next = 0;
  for (Index d = 0; d < dim; ++d) {
    std::vector<Index> cols;
    for (Index j = 0; j < per_equation[static_cast<size_t>(d)]; ++j)
      cols.push_back(next++);
    spec.equation_regressors.push_back(cols);
  }
  return spec;
}

inline ModelSpec random_spec(std::mt19937_64& rng, Index dim_max = 3,
                             Index comp_max = 3, Index reg_max = 2) {
  std::uniform_int_distribution<Index> dim_draw(1, dim_max);
  std::uniform_int_distribution<Index> comp_draw(1, comp_max);
  std::uniform_int_distribution<Index> reg_draw(0, reg_max);
  const Index dim = dim_draw(rng);
  std::vector<Index> per_eq;
  for (Index d = 0; d < dim; ++d) per_eq.push_back(reg_draw(rng));
  return make_spec(dim, comp_draw(rng), per_eq);
}

inline Matrix<double> random_matrix(std::mt19937_64& rng, Index rows,
                                    Index cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix<double> m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

inline Vector<double> random_vector(std::mt19937_64& rng, Index len,
                                    double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector<double> v(len);
  for (Index i = 0; i < len; ++i) v[i] = normal(rng);
  return v;
}

// Well-conditioned random SPD matrix: A A' plus a comfortable diagonal.
inline Matrix<double> random_spd(std::mt19937_64& rng, Index dim,
                                 double scale = 1.0) {
  std::uniform_real_distribution<double> lift(0.5, 1.5);
  Matrix<double> a = random_matrix(rng, dim, dim, scale);
  Matrix<double> s = a * a.transpose();
  s.diagonal().array() += lift(rng) * scale * scale;
  return s;
}

inline Parameters<double> random_parameters(std::mt19937_64& rng,
                                            const ModelSpec& spec,
                                            double intercept_scale = 2.0) {
  std::uniform_real_distribution<double> weight_draw(0.2, 1.0);
  Parameters<double> p;
  p.weights.resize(spec.component_count);
  for (Index k = 0; k < spec.component_count; ++k)
    p.weights[k] = weight_draw(rng);
  p.weights /= p.weights.sum();
  p.coefficients = random_vector(rng, spec.coefficient_count());
  for (Index k = 0; k < spec.component_count; ++k) {
    p.intercepts.push_back(random_vector(rng, spec.response_count,
                                         intercept_scale));
    p.covariances.push_back(random_spd(rng, spec.response_count));
  }
  return p;
}

// Draws a dataset from the model itself, with its own inline sampling code
// (cumulative-weight component draw, then a Cholesky push of iid normals).
// Used where tests need data that actually follows the model; label output
// is optional.
inline Dataset<double> simulate_mixture(std::mt19937_64& rng,
                                        const ModelSpec& spec,
                                        const Parameters<double>& p, Index n,
                                        std::vector<Index>* labels = nullptr) {
  Index max_col = -1;
  for (const auto& eq : spec.equation_regressors)
    for (Index c : eq) max_col = std::max(max_col, c);
  Dataset<double> data;
  data.pool = random_matrix(rng, n, max_col + 1);
  data.responses.resize(n, spec.response_count);
  data.active = spec;

  std::vector<Matrix<double>> chol;
  for (Index k = 0; k < spec.component_count; ++k)
    chol.push_back(Eigen::LLT<Matrix<double>>(p.covariances[k]).matrixL());

  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  if (labels) labels->clear();
  for (Index i = 0; i < n; ++i) {
    const double u = uniform(rng);
    Index k = 0;
    double cum = p.weights[0];
    while (u > cum && k + 1 < spec.component_count) cum += p.weights[++k];
    if (labels) labels->push_back(k);
    Vector<double> shock(spec.response_count);
    for (Index d = 0; d < spec.response_count; ++d) shock[d] = normal(rng);
    Vector<double> y = p.intercepts[k] + chol[k] * shock;
    for (Index d = 0; d < spec.response_count; ++d) {
      const auto& cols = spec.equation_regressors[d];
      Index j = spec.coefficient_offset(d);
      for (Index c : cols) y[d] += p.coefficients[j++] * data.pool(i, c);
    }
    data.responses.row(i) = y.transpose();
  }
  return data;
}

// Dataset with Gaussian pool and Gaussian responses; the responses are not
// drawn from any particular model, which is exactly what identity-style
// checks (densities, derivatives) want.
inline Dataset<double> random_dataset(std::mt19937_64& rng,
                                      const ModelSpec& spec, Index n,
                                      Index extra_pool_columns = 0) {
  Index max_col = -1;
  for (const auto& eq : spec.equation_regressors)
    for (Index c : eq) max_col = std::max(max_col, c);
  Dataset<double> data;
  data.responses = random_matrix(rng, n, spec.response_count, 1.5);
  data.pool = random_matrix(rng, n, max_col + 1 + extra_pool_columns);
  data.active = spec;
  return data;
}

}  // namespace testutil
