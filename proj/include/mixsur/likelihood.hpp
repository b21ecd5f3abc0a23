#pragma once

// Mixture likelihood evaluation.
//
// The observation density is sum_k pi_k N_D(y_i; intercept_k + X_i' beta,
// Sigma_k).  All component work is done once per parameter value in a
// workspace: residuals against each component mean, a Cholesky factor per
// covariance (failure throws SingularCovariance with the component index),
// and the resulting log weighted densities.  Mixing over components always
// goes through log-sum-exp; with weights as small as 1e-300 and quadratic
// forms in the hundreds, the naive sum underflows long before the
// log-likelihood itself is out of range.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "mixsur/design.hpp"
#include "mixsur/types.hpp"

namespace mixsur {

template <class Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf stays -inf
  return m + std::log((v.array() - m).exp().sum());
}

template <class Scalar>
class MixtureWorkspace {
 public:
  // Shapes and weight positivity are checked here; full parameter
  // validation (symmetry, finiteness) belongs to the entry points that
  // accept user input.  Positive definiteness is not pre-checked at all:
  // the Cholesky factorization below is the check, and its failure is the
  // SingularCovariance error the EM failure policy is built on.
  MixtureWorkspace(const Parameters<Scalar>& p, const Dataset<Scalar>& data,
                   const ModelSpec& spec)
      : dim_(spec.response_count), components_(spec.component_count) {
    if (p.component_count() != components_ ||
        static_cast<Index>(p.covariances.size()) != components_ ||
        static_cast<Index>(p.intercepts.size()) != components_ ||
        p.coefficients.size() != spec.coefficient_count())
      throw InvalidArgument("MixtureWorkspace: parameter shape mismatch");
    for (Index k = 0; k < components_; ++k)
      if (!(p.weights[k] > Scalar(0)))
        throw InvalidArgument("MixtureWorkspace: weights must be positive");
    const Index n = data.observation_count();
    const Matrix<Scalar> shared = fitted_values(data, spec, p.coefficients);
    log_density_.resize(n, components_);
    residuals_.reserve(components_);
    precisions_.reserve(components_);
    scaled_residuals_.reserve(components_);
    const Scalar log_two_pi = std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
    for (Index k = 0; k < components_; ++k) {
      Matrix<Scalar> resid = data.responses - shared;
      resid.rowwise() -= p.intercepts[k].transpose();
      Eigen::LLT<Matrix<Scalar>> llt(p.covariances[k]);
      if (llt.info() != Eigen::Success)
        throw SingularCovariance(static_cast<int>(k),
                                 "component " + std::to_string(k + 1) +
                                     ": covariance Cholesky failed");
      Scalar log_det = 0;
      for (Index d = 0; d < dim_; ++d)
        log_det += Scalar(2) * std::log(llt.matrixL()(d, d));
      log_dets_.push_back(log_det);
      // b_ki = Sigma_k^{-1} r_ki for every observation at once, kept for the
      // E step's quadratic forms and reused by the derivative code.
      Matrix<Scalar> scaled = llt.solve(resid.transpose());  // D x I
      const Scalar log_weight = std::log(p.weights[k]);
      for (Index i = 0; i < n; ++i) {
        const Scalar quad = resid.row(i).dot(scaled.col(i));
        log_density_(i, k) = log_weight - Scalar(0.5) * (dim_ * log_two_pi +
                                                         log_det + quad);
      }
      precisions_.push_back(llt.solve(Matrix<Scalar>::Identity(dim_, dim_)));
      residuals_.push_back(std::move(resid));
      scaled_residuals_.push_back(std::move(scaled));
    }
  }

  Index component_count() const { return components_; }

  // ln(pi_k phi_k(y_i)), the log weighted component density.
  Scalar log_density(Index i, Index k) const { return log_density_(i, k); }
  const Matrix<Scalar>& log_density_matrix() const { return log_density_; }

  // r_ki as rows of an I x D matrix.
  const Matrix<Scalar>& residuals(Index k) const { return residuals_[k]; }

  // Sigma_k^{-1} r_ki as columns of a D x I matrix.
  const Matrix<Scalar>& scaled_residuals(Index k) const {
    return scaled_residuals_[k];
  }

  const Matrix<Scalar>& precision(Index k) const { return precisions_[k]; }
  Scalar log_det(Index k) const { return log_dets_[k]; }

  Scalar log_likelihood() const {
    Scalar total = 0;
    for (Index i = 0; i < log_density_.rows(); ++i)
      total += log_sum_exp(log_density_.row(i));
    return total;
  }

  Matrix<Scalar> responsibilities() const {
    Matrix<Scalar> alpha(log_density_.rows(), components_);
    for (Index i = 0; i < log_density_.rows(); ++i) {
      const Scalar lse = log_sum_exp(log_density_.row(i));
      alpha.row(i) = (log_density_.row(i).array() - lse).exp();
    }
    return alpha;
  }

 private:
  Index dim_;
  Index components_;
  Matrix<Scalar> log_density_;
  std::vector<Matrix<Scalar>> residuals_;
  std::vector<Matrix<Scalar>> scaled_residuals_;
  std::vector<Matrix<Scalar>> precisions_;
  std::vector<Scalar> log_dets_;
};

template <class Scalar>
Scalar log_component_weight_density(const Parameters<Scalar>& p,
                                    const Dataset<Scalar>& data,
                                    const ModelSpec& spec, Index i, Index k) {
  return MixtureWorkspace<Scalar>(p, data, spec).log_density(i, k);
}

template <class Scalar>
Scalar log_likelihood(const Parameters<Scalar>& p, const Dataset<Scalar>& data,
                      const ModelSpec& spec) {
  return MixtureWorkspace<Scalar>(p, data, spec).log_likelihood();
}

template <class Scalar>
Scalar log_likelihood(const Parameters<Scalar>& p,
                      const Dataset<Scalar>& data) {
  return log_likelihood(p, data, data.active);
}

// Posterior component probabilities, one row per observation.
template <class Scalar>
Matrix<Scalar> responsibilities(const Parameters<Scalar>& p,
                                const Dataset<Scalar>& data,
                                const ModelSpec& spec) {
  return MixtureWorkspace<Scalar>(p, data, spec).responsibilities();
}

template <class Scalar>
Matrix<Scalar> responsibilities(const Parameters<Scalar>& p,
                                const Dataset<Scalar>& data) {
  return responsibilities(p, data, data.active);
}

// Complete-data log-likelihood under hard labels (0-based component per
// observation).
template <class Scalar>
Scalar complete_data_log_likelihood(const Parameters<Scalar>& p,
                                    const Dataset<Scalar>& data,
                                    const ModelSpec& spec,
                                    const std::vector<Index>& labels) {
  if (static_cast<Index>(labels.size()) != data.observation_count())
    throw InvalidArgument("complete_data_log_likelihood: label count mismatch");
  MixtureWorkspace<Scalar> work(p, data, spec);
  Scalar total = 0;
  for (Index i = 0; i < data.observation_count(); ++i) {
    const Index k = labels[static_cast<size_t>(i)];
    if (k < 0 || k >= spec.component_count)
      throw InvalidArgument("complete_data_log_likelihood: label out of range");
    total += work.log_density(i, k);
  }
  return total;
}

// Soft-label version: sum_ik q_ik ln(pi_k phi_ki).  With q equal to the
// responsibilities this is the EM minorizer's data term; tests lean on the
// Jensen relation between this and the observed log-likelihood.
template <class Scalar>
Scalar expected_complete_log_likelihood(const Parameters<Scalar>& p,
                                        const Dataset<Scalar>& data,
                                        const ModelSpec& spec,
                                        const Matrix<Scalar>& soft_labels) {
  if (soft_labels.rows() != data.observation_count() ||
      soft_labels.cols() != spec.component_count)
    throw InvalidArgument("expected_complete_log_likelihood: shape mismatch");
  MixtureWorkspace<Scalar> work(p, data, spec);
  return (soft_labels.array() * work.log_density_matrix().array()).sum();
}

}  // namespace mixsur
