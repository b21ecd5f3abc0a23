#pragma once

// Analytic score and Hessian of the mixture log-likelihood in packed
// coordinates (pi_1..pi_{K-1}, beta, block_1..block_K) with
// block_k = (intercept_k, vech(Sigma_k)).
//
// Everything is built from a handful of per-observation quantities:
//
//   alpha_ki  posterior weight of component k at observation i
//   b_ki      Sigma_k^{-1} r_ki, the precision-scaled residual
//   B_ki      Sigma_k^{-1} - b_ki b_ki'
//   c_ki      (b_ki, -1/2 G' vec B_ki), the component block's own gradient
//   a_k       gradient of ln pi_k in the free weights: e_k / pi_k for
//             k < K, -(1/pi_K) 1 for the last component
//
// The score sums alpha-weighted versions of these; the Hessian adds the
// outer-product corrections that come from differentiating alpha itself.
// Kronecker expressions such as (b' (x) Sigma^{-1}) G are evaluated by the
// index routines in duplication.hpp, so nothing D^2 x D^2 is ever formed.
// The two off-diagonal Kronecker blocks of each component's curvature
// matrix are computed by independent routines and the assembled Hessian is
// then required to be symmetric to 1e-10 relative before averaging; a
// derivation or indexing slip shows up here instead of propagating into
// standard errors.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "mixsur/duplication.hpp"
#include "mixsur/likelihood.hpp"
#include "mixsur/types.hpp"

namespace mixsur {

template <class Scalar>
struct Score {
  Vector<Scalar> weight;                   // K - 1
  Vector<Scalar> coefficient;              // P
  std::vector<Vector<Scalar>> component;   // K blocks of D + D(D+1)/2

  Vector<Scalar> packed(const ModelSpec& spec) const {
    const PackedLayout l = packed_layout(spec);
    Vector<Scalar> v(l.total);
    v.segment(l.weight_offset, l.weight_size) = weight;
    v.segment(l.coefficient_offset, l.coefficient_size) = coefficient;
    for (Index k = 0; k < spec.component_count; ++k)
      v.segment(l.component_offset(k), l.block_size) = component[k];
    return v;
  }
};

namespace detail {

// Free-weight gradient vector a_k of length K-1.
template <class Scalar>
Vector<Scalar> weight_gradient(const Vector<Scalar>& weights, Index k) {
  const Index free = weights.size() - 1;
  Vector<Scalar> a = Vector<Scalar>::Zero(free);
  if (k < free)
    a[k] = Scalar(1) / weights[k];
  else
    a.setConstant(Scalar(-1) / weights[free]);
  return a;
}

}  // namespace detail

template <class Scalar>
Score<Scalar> score(const Parameters<Scalar>& p, const Dataset<Scalar>& data,
                    const ModelSpec& spec) {
  MixtureWorkspace<Scalar> work(p, data, spec);
  const Matrix<Scalar> alpha = work.responsibilities();
  const Index n = data.observation_count();
  const Index dim = spec.response_count;
  const Index k_count = spec.component_count;

  Score<Scalar> s;
  s.weight = Vector<Scalar>::Zero(k_count - 1);
  for (Index j = 0; j + 1 < k_count; ++j)
    s.weight[j] = alpha.col(j).sum() / p.weights[j] -
                  alpha.col(k_count - 1).sum() / p.weights[k_count - 1];

  // bbar(i, .) = sum_k alpha_ki b_ki; its equation-d column against the
  // pool gives the coefficient score without touching any X_i explicitly.
  Matrix<Scalar> bbar = Matrix<Scalar>::Zero(n, dim);
  for (Index k = 0; k < k_count; ++k)
    bbar += (work.scaled_residuals(k).transpose().array().colwise() *
             alpha.col(k).array())
                .matrix();
  s.coefficient = Vector<Scalar>(spec.coefficient_count());
  for (Index d = 0; d < dim; ++d) {
    Index j = spec.coefficient_offset(d);
    for (Index c : spec.equation_regressors[d])
      s.coefficient[j++] = data.pool.col(c).dot(bbar.col(d));
  }

  for (Index k = 0; k < k_count; ++k) {
    const Matrix<Scalar>& scaled = work.scaled_residuals(k);  // D x I
    const Scalar soft_count = alpha.col(k).sum();
    Vector<Scalar> block(spec.component_block_size());
    block.head(dim) = scaled * alpha.col(k);
    // sum_i alpha_ki B_ki = soft_count * Sigma^{-1} - W_k with
    // W_k = sum_i alpha_ki b_ki b_ki'.
    const Matrix<Scalar> w =
        scaled * alpha.col(k).asDiagonal() * scaled.transpose();
    block.tail(spec.covariance_vech_size()) =
        Scalar(-0.5) * vech_fold(soft_count * work.precision(k) - w);
    s.component.push_back(std::move(block));
  }
  return s;
}

template <class Scalar>
Score<Scalar> score(const Parameters<Scalar>& p, const Dataset<Scalar>& data) {
  return score(p, data, data.active);
}

template <class Scalar>
Matrix<Scalar> hessian(const Parameters<Scalar>& p,
                       const Dataset<Scalar>& data, const ModelSpec& spec) {
  MixtureWorkspace<Scalar> work(p, data, spec);
  const Matrix<Scalar> alpha = work.responsibilities();
  const Index n = data.observation_count();
  const Index dim = spec.response_count;
  const Index k_count = spec.component_count;
  const Index free = k_count - 1;
  const Index block = spec.component_block_size();
  const PackedLayout l = packed_layout(spec);

  std::vector<Vector<Scalar>> a_k;
  for (Index k = 0; k < k_count; ++k)
    a_k.push_back(detail::weight_gradient(p.weights, k));

  Matrix<Scalar> h = Matrix<Scalar>::Zero(l.total, l.total);

  std::vector<Vector<Scalar>> b(k_count), c(k_count);
  std::vector<Matrix<Scalar>> big_b(k_count), curv(k_count), cross(k_count);
  for (Index i = 0; i < n; ++i) {
    const Matrix<Scalar> x = build_design_matrix(data, spec, i);

    Vector<Scalar> abar = Vector<Scalar>::Zero(free);
    Vector<Scalar> bbar = Vector<Scalar>::Zero(dim);
    for (Index k = 0; k < k_count; ++k) {
      b[k] = work.scaled_residuals(k).col(i);
      const Matrix<Scalar>& prec = work.precision(k);
      big_b[k] = prec - b[k] * b[k].transpose();
      Vector<Scalar> ck(block);
      ck.head(dim) = b[k];
      ck.tail(block - dim) = Scalar(-0.5) * vech_fold(big_b[k]);
      c[k] = std::move(ck);
      abar += alpha(i, k) * a_k[k];
      bbar += alpha(i, k) * b[k];

      // Component curvature C_ki.  The two off-diagonal Kronecker blocks
      // are computed independently (see header comment).
      Matrix<Scalar> ci(block, block);
      ci.topLeftCorner(dim, dim) = prec;
      ci.topRightCorner(dim, block - dim) = kron_rowvec_dup(b[k], prec);
      ci.bottomLeftCorner(block - dim, dim) = dup_kron_colvec(b[k], prec);
      ci.bottomRightCorner(block - dim, block - dim) =
          Scalar(0.5) *
          dup_sandwich(Matrix<Scalar>(prec - Scalar(2) * big_b[k]), prec);
      // F_ki is C_ki's top D rows; keep it before ci moves.
      cross[k] = ci.topRows(dim);
      curv[k] = std::move(ci);
    }

    // weights x weights
    if (free > 0) {
      h.block(0, 0, free, free) -= abar * abar.transpose();

      // weights x coefficients
      Matrix<Scalar> mix = Matrix<Scalar>::Zero(free, dim);
      for (Index k = 0; k < k_count; ++k)
        mix += alpha(i, k) * a_k[k] * b[k].transpose();
      mix -= abar * bbar.transpose();
      h.block(0, l.coefficient_offset, free, l.coefficient_size) +=
          mix * x.transpose();

      // weights x component blocks
      for (Index k = 0; k < k_count; ++k)
        h.block(0, l.component_offset(k), free, block) +=
            alpha(i, k) * (a_k[k] - abar) * c[k].transpose();
    }

    // coefficients x coefficients
    Matrix<Scalar> mid = bbar * bbar.transpose();
    for (Index k = 0; k < k_count; ++k) mid += alpha(i, k) * big_b[k];
    h.block(l.coefficient_offset, l.coefficient_offset, l.coefficient_size,
            l.coefficient_size) -= x * mid * x.transpose();

    // coefficients x component blocks
    for (Index k = 0; k < k_count; ++k) {
      Matrix<Scalar> inner =
          cross[k] - (b[k] - bbar) * c[k].transpose();
      h.block(l.coefficient_offset, l.component_offset(k),
              l.coefficient_size, block) -= alpha(i, k) * x * inner;
    }

    // component x component
    for (Index k = 0; k < k_count; ++k) {
      h.block(l.component_offset(k), l.component_offset(k), block, block) -=
          alpha(i, k) *
          (curv[k] - (Scalar(1) - alpha(i, k)) * c[k] * c[k].transpose());
      for (Index m = 0; m < k_count; ++m)
        if (m != k)
          h.block(l.component_offset(k), l.component_offset(m), block,
                  block) -= alpha(i, k) * alpha(i, m) * c[k] * c[m].transpose();
    }
  }

  // Mirror the blocks that were only filled above the diagonal.
  if (free > 0) {
    h.block(l.coefficient_offset, 0, l.coefficient_size, free) =
        h.block(0, l.coefficient_offset, free, l.coefficient_size)
            .transpose();
    for (Index k = 0; k < k_count; ++k)
      h.block(l.component_offset(k), 0, block, free) =
          h.block(0, l.component_offset(k), free, block).transpose();
  }
  for (Index k = 0; k < k_count; ++k)
    h.block(l.component_offset(k), l.coefficient_offset, block,
            l.coefficient_size) =
        h.block(l.coefficient_offset, l.component_offset(k),
                l.coefficient_size, block)
            .transpose();

  // The blocks assembled from independent routines must agree across the
  // diagonal; anything worse than roundoff means a real bug upstream.
  const Scalar scale = std::max(Scalar(1), h.cwiseAbs().maxCoeff());
  const Scalar asym = (h - h.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= Scalar(1e-10) * scale))
    throw Error("hessian: assembled matrix is not symmetric");
  h = ((h + h.transpose()) / Scalar(2)).eval();
  return h;
}

template <class Scalar>
Matrix<Scalar> hessian(const Parameters<Scalar>& p,
                       const Dataset<Scalar>& data) {
  return hessian(p, data, data.active);
}

// Observed information is the negated Hessian; at a proper interior
// maximum it must be positive definite, and that is checked rather than
// assumed because boundary or saddle solutions do reach this code.
template <class Scalar>
Matrix<Scalar> observed_information(const Matrix<Scalar>& h) {
  Matrix<Scalar> info = -h;
  Eigen::LLT<Matrix<Scalar>> llt(info);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite(
        "observed information is not positive definite at this point");
  return info;
}

// Asymptotic covariance of the packed estimate: (-H)^{-1}.  H itself is
// negative definite at the optimum, so the sign flip happens before, not
// after, inversion.
template <class Scalar>
Matrix<Scalar> covariance_of_estimates(const Matrix<Scalar>& h) {
  Matrix<Scalar> info = -h;
  Eigen::LLT<Matrix<Scalar>> llt(info);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite(
        "observed information is not positive definite at this point");
  return llt.solve(Matrix<Scalar>::Identity(h.rows(), h.cols()));
}

}  // namespace mixsur
