#pragma once

// Design-matrix construction.
//
// Writing the D equations jointly, observation i carries a P x D block
// matrix X_i whose column d holds equation d's regressor values in that
// equation's run of the shared coefficient vector and zeros elsewhere, so
// that X_i' beta stacks the D linear predictors.  The augmented form
// prepends a component-selector block: for component k,
// A_ki = [O_k; X_i] with O_k the k-th D-column slice of I_{DK}, giving
// A_ki' gamma = intercept_k + X_i' beta for the stacked
// gamma = (intercept_1, ..., intercept_K, beta).  The EM generalized least
// squares step solves in gamma space; everything else consumes X_i.

#include <Eigen/Dense>

#include <sstream>
#include <string>
#include <vector>

#include "mixsur/types.hpp"

namespace mixsur {

template <class Scalar>
Matrix<Scalar> build_design_matrix(const Dataset<Scalar>& data,
                                   const ModelSpec& spec, Index i) {
  const Index p = spec.coefficient_count();
  Matrix<Scalar> x = Matrix<Scalar>::Zero(p, spec.response_count);
  for (Index d = 0; d < spec.response_count; ++d) {
    const auto& cols = spec.equation_regressors[d];
    Index row = spec.coefficient_offset(d);
    for (Index c : cols) x(row++, d) = data.pool(i, c);
  }
  return x;
}

// Component-augmented design [O_k; X_i], (D*K + P) x D, 0-based k.
template <class Scalar>
Matrix<Scalar> build_augmented_design(Index k, const Matrix<Scalar>& x_i,
                                      const ModelSpec& spec) {
  const Index dim = spec.response_count;
  if (k < 0 || k >= spec.component_count)
    throw InvalidArgument("build_augmented_design: component out of range");
  if (x_i.rows() != spec.coefficient_count() || x_i.cols() != dim)
    throw InvalidArgument("build_augmented_design: design shape mismatch");
  Matrix<Scalar> a =
      Matrix<Scalar>::Zero(dim * spec.component_count + x_i.rows(), dim);
  a.block(k * dim, 0, dim, dim) = Matrix<Scalar>::Identity(dim, dim);
  a.bottomRows(x_i.rows()) = x_i;
  return a;
}

// All I linear predictors X_i' beta as rows of an I x D matrix.  Built
// column-wise from the pool, which is what the E step and simulator want.
template <class Scalar>
Matrix<Scalar> fitted_values(const Dataset<Scalar>& data,
                             const ModelSpec& spec,
                             const Vector<Scalar>& beta) {
  if (beta.size() != spec.coefficient_count())
    throw InvalidArgument("fitted_values: coefficient length mismatch");
  Matrix<Scalar> fit =
      Matrix<Scalar>::Zero(data.observation_count(), spec.response_count);
  for (Index d = 0; d < spec.response_count; ++d) {
    const auto& cols = spec.equation_regressors[d];
    Index j = spec.coefficient_offset(d);
    for (Index c : cols) fit.col(d) += beta[j++] * data.pool.col(c);
  }
  return fit;
}

// --- identifiability ----------------------------------------------------------

struct IdentifiabilityReport {
  struct Violation {
    Index equation;
    Index rank;
    Index required;
  };
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }

  std::string to_string(const ModelSpec& spec) const {
    if (ok()) return "all equations identified";
    std::ostringstream out;
    for (const auto& v : violations) {
      out << "equation " << spec.response_name(v.equation)
          << ": intercept-augmented regressor block has rank " << v.rank
          << ", needs " << v.required << "\n";
    }
    return out.str();
  }
};

// Checks, per equation, that the regressor block augmented with the
// implicit intercept column has full column rank.  Rank is decided from
// singular values with the usual max(rows, cols) * eps * sigma_max cutoff,
// so a duplicated or constant column is flagged rather than surfacing later
// as a singular normal matrix deep inside EM.
template <class Scalar>
IdentifiabilityReport check_identifiability(const Dataset<Scalar>& data,
                                            const ModelSpec& spec) {
  IdentifiabilityReport report;
  const Index n = data.observation_count();
  for (Index d = 0; d < spec.response_count; ++d) {
    const auto& cols = spec.equation_regressors[d];
    const Index width = static_cast<Index>(cols.size()) + 1;
    Matrix<Scalar> block(n, width);
    block.col(0).setOnes();
    for (Index j = 0; j < static_cast<Index>(cols.size()); ++j)
      block.col(j + 1) = data.pool.col(cols[j]);
    Eigen::JacobiSVD<Matrix<Scalar>> svd(block);
    const auto& sv = svd.singularValues();
    const Scalar cutoff = std::max(n, width) *
                          std::numeric_limits<Scalar>::epsilon() *
                          (sv.size() ? sv[0] : Scalar(0));
    Index rank = 0;
    for (Index j = 0; j < sv.size(); ++j)
      if (sv[j] > cutoff) ++rank;
    if (rank < width) report.violations.push_back({d, rank, width});
  }
  return report;
}

}  // namespace mixsur
