#pragma once

// Core model vocabulary.
//
// The model: D response equations share one coefficient vector while the
// error term follows a K-component Gaussian mixture,
//
//   y_i = intercept_k + X_i' beta + e_ik,   e_ik ~ N_D(0, Sigma_k)
//
// with mixing weights pi_k.  Only the combined per-component intercept is
// identified (a global intercept and a component shift would trade off
// freely), so the parameterization carries intercepts per component and no
// constant column in the regressor pool.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "mixsur/duplication.hpp"
#include "mixsur/errors.hpp"

namespace mixsur {

// Which pool columns enter which equation.  Equation d of the model uses
// pool columns equation_regressors[d] in that order; the shared coefficient
// vector concatenates the per-equation runs, so its length is
// sum_d equation_regressors[d].size().
struct ModelSpec {
  Index response_count = 0;   // D
  Index component_count = 1;  // K
  std::vector<std::vector<Index>> equation_regressors;

  // Optional column names, used by reports; empty means unnamed.
  std::vector<std::string> response_names;
  std::vector<std::string> pool_names;

  Index regressor_count(Index equation) const {
    return static_cast<Index>(equation_regressors.at(equation).size());
  }

  // Total coefficient count P across equations.
  Index coefficient_count() const {
    Index p = 0;
    for (const auto& r : equation_regressors) p += static_cast<Index>(r.size());
    return p;
  }

  // Offset of equation d's run inside the coefficient vector.
  Index coefficient_offset(Index equation) const {
    Index off = 0;
    for (Index d = 0; d < equation; ++d) off += regressor_count(d);
    return off;
  }

  Index covariance_vech_size() const { return vech_size(response_count); }

  // Free parameters per component block: intercept plus vech of covariance.
  Index component_block_size() const {
    return response_count + covariance_vech_size();
  }

  void validate() const {
    if (response_count < 1) throw InvalidArgument("ModelSpec: need D >= 1");
    if (component_count < 1) throw InvalidArgument("ModelSpec: need K >= 1");
    if (static_cast<Index>(equation_regressors.size()) != response_count)
      throw InvalidArgument("ModelSpec: one regressor list per equation");
    for (const auto& eq : equation_regressors)
      for (Index c : eq)
        if (c < 0) throw InvalidArgument("ModelSpec: negative pool index");
    if (!response_names.empty() &&
        static_cast<Index>(response_names.size()) != response_count)
      throw InvalidArgument("ModelSpec: response name count mismatch");
  }

  std::string response_name(Index d) const {
    if (d < static_cast<Index>(response_names.size())) return response_names[d];
    return "y" + std::to_string(d + 1);
  }

  std::string pool_name(Index c) const {
    if (c < static_cast<Index>(pool_names.size())) return pool_names[c];
    return "x" + std::to_string(c + 1);
  }

  // Human label for packed coefficient j, e.g. "BMI~RCC".
  std::string coefficient_name(Index j) const {
    for (Index d = 0; d < response_count; ++d) {
      const Index off = coefficient_offset(d);
      if (j < off + regressor_count(d))
        return response_name(d) + "~" + pool_name(equation_regressors[d][j - off]);
    }
    return "b" + std::to_string(j + 1);
  }
};

// Free-parameter count: K-1 mixing weights, P coefficients, and per
// component D intercepts plus D(D+1)/2 covariance entries.
inline Index count_parameters(const ModelSpec& spec) {
  return (spec.component_count - 1) + spec.coefficient_count() +
         spec.component_count * spec.component_block_size();
}

// Model parameters in natural (structured) form.
template <class Scalar>
struct Parameters {
  Vector<Scalar> weights;                    // K, positive, sums to one
  Vector<Scalar> coefficients;               // P, shared across components
  std::vector<Vector<Scalar>> intercepts;    // K of length D
  std::vector<Matrix<Scalar>> covariances;   // K of D x D, symmetric PD

  Index component_count() const {
    return static_cast<Index>(weights.size());
  }

  void validate(const ModelSpec& spec) const {
    const Index k_count = spec.component_count;
    const Index dim = spec.response_count;
    if (component_count() != k_count ||
        static_cast<Index>(intercepts.size()) != k_count ||
        static_cast<Index>(covariances.size()) != k_count)
      throw InvalidArgument("Parameters: component count mismatch");
    if (coefficients.size() != spec.coefficient_count())
      throw InvalidArgument("Parameters: coefficient length mismatch");
    if (!coefficients.allFinite())
      throw InvalidArgument("Parameters: non-finite coefficient");
    Scalar total = 0;
    for (Index k = 0; k < k_count; ++k) {
      if (!(weights[k] > Scalar(0)))
        throw InvalidArgument("Parameters: weights must be positive");
      total += weights[k];
      if (intercepts[k].size() != dim)
        throw InvalidArgument("Parameters: intercept length mismatch");
      if (!intercepts[k].allFinite())
        throw InvalidArgument("Parameters: non-finite intercept");
      const auto& s = covariances[k];
      if (s.rows() != dim || s.cols() != dim)
        throw InvalidArgument("Parameters: covariance shape mismatch");
      if (!s.allFinite())
        throw InvalidArgument("Parameters: non-finite covariance");
      if ((s - s.transpose()).cwiseAbs().maxCoeff() >
          Scalar(1e-12) * std::max<Scalar>(Scalar(1), s.cwiseAbs().maxCoeff()))
        throw InvalidArgument("Parameters: covariance not symmetric");
      Eigen::LLT<Matrix<Scalar>> llt(s);
      if (llt.info() != Eigen::Success)
        throw InvalidArgument("Parameters: covariance not positive definite");
    }
    if (std::abs(total - Scalar(1)) > Scalar(1e-12))
      throw InvalidArgument("Parameters: weights must sum to one");
  }
};

// Observations plus the regressor pool.  `active` names the model the
// dataset is currently bound to; operations that search over models build
// their own spec per candidate and leave `active` as the caller's default.
template <class Scalar>
struct Dataset {
  Matrix<Scalar> responses;  // I x D
  Matrix<Scalar> pool;       // I x R, all candidate regressor columns
  ModelSpec active;

  Index observation_count() const { return responses.rows(); }

  void validate() const {
    if (responses.rows() < 1) throw EmptyData("Dataset: no observations");
    if (pool.rows() != 0 && pool.rows() != responses.rows())
      throw InvalidArgument("Dataset: pool row count mismatch");
    if (!responses.allFinite()) throw InvalidArgument("Dataset: non-finite response");
    if (pool.size() != 0 && !pool.allFinite())
      throw InvalidArgument("Dataset: non-finite regressor");
    active.validate();
    if (active.response_count != responses.cols())
      throw InvalidArgument("Dataset: response count does not match spec");
    for (const auto& eq : active.equation_regressors)
      for (Index c : eq)
        if (c >= pool.cols())
          throw InvalidArgument("Dataset: regressor index exceeds pool");
  }
};

// --- packed parameter vector ------------------------------------------------
//
// Layout: (pi_1..pi_{K-1}, beta, block_1, ..., block_K) with
// block_k = (intercept_k, vech(Sigma_k)).  K = 1 has no weight entries.
// The packed form is the coordinate system for derivatives, finite
// differences, and standard errors; the blocks below give its offsets.

struct PackedLayout {
  Index weight_offset = 0;
  Index weight_size = 0;      // K - 1
  Index coefficient_offset = 0;
  Index coefficient_size = 0; // P
  Index block_offset = 0;     // start of component blocks
  Index block_size = 0;       // D + D(D+1)/2
  Index total = 0;

  Index component_offset(Index k) const { return block_offset + k * block_size; }
};

inline PackedLayout packed_layout(const ModelSpec& spec) {
  PackedLayout l;
  l.weight_size = spec.component_count - 1;
  l.coefficient_offset = l.weight_size;
  l.coefficient_size = spec.coefficient_count();
  l.block_offset = l.coefficient_offset + l.coefficient_size;
  l.block_size = spec.component_block_size();
  l.total = l.block_offset + spec.component_count * l.block_size;
  return l;
}

template <class Scalar>
Vector<Scalar> pack(const Parameters<Scalar>& p, const ModelSpec& spec) {
  p.validate(spec);
  const PackedLayout l = packed_layout(spec);
  Vector<Scalar> v(l.total);
  for (Index k = 0; k + 1 < spec.component_count; ++k) v[k] = p.weights[k];
  v.segment(l.coefficient_offset, l.coefficient_size) = p.coefficients;
  for (Index k = 0; k < spec.component_count; ++k) {
    const Index off = l.component_offset(k);
    v.segment(off, spec.response_count) = p.intercepts[k];
    v.segment(off + spec.response_count, spec.covariance_vech_size()) =
        vech(p.covariances[k]);
  }
  return v;
}

template <class Scalar>
Parameters<Scalar> unpack(const Vector<Scalar>& v, const ModelSpec& spec) {
  const PackedLayout l = packed_layout(spec);
  if (v.size() != l.total)
    throw InvalidArgument("unpack: packed length does not match spec");
  Parameters<Scalar> p;
  p.weights.resize(spec.component_count);
  Scalar tail = Scalar(1);
  for (Index k = 0; k + 1 < spec.component_count; ++k) {
    p.weights[k] = v[k];
    tail -= v[k];
  }
  p.weights[spec.component_count - 1] = tail;
  p.coefficients = v.segment(l.coefficient_offset, l.coefficient_size);
  p.intercepts.resize(spec.component_count);
  p.covariances.resize(spec.component_count);
  for (Index k = 0; k < spec.component_count; ++k) {
    const Index off = l.component_offset(k);
    p.intercepts[k] = v.segment(off, spec.response_count);
    p.covariances[k] = unvech(
        v.segment(off + spec.response_count, spec.covariance_vech_size()),
        spec.response_count);
  }
  p.validate(spec);
  return p;
}

// --- canonical component order ----------------------------------------------
//
// Mixture labels are arbitrary; fits are reported with components sorted by
// descending weight, ties broken by lexicographically ascending intercept.
// Returns the permutation (new position -> old index).

template <class Scalar>
std::vector<Index> canonical_order(const Parameters<Scalar>& p) {
  std::vector<Index> order(p.component_count());
  std::iota(order.begin(), order.end(), Index(0));
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (p.weights[a] != p.weights[b]) return p.weights[a] > p.weights[b];
    const auto& la = p.intercepts[a];
    const auto& lb = p.intercepts[b];
    for (Index d = 0; d < la.size(); ++d)
      if (la[d] != lb[d]) return la[d] < lb[d];
    return a < b;
  });
  return order;
}

// Reorders components in place (and posterior columns, when given) into
// canonical order.  Returns the permutation that was applied.
template <class Scalar>
std::vector<Index> canonicalize(Parameters<Scalar>& p,
                                Matrix<Scalar>* posteriors = nullptr) {
  const std::vector<Index> order = canonical_order(p);
  Parameters<Scalar> q = p;
  Matrix<Scalar> cols;
  if (posteriors) cols = *posteriors;
  for (Index k = 0; k < p.component_count(); ++k) {
    const Index src = order[k];
    q.weights[k] = p.weights[src];
    q.intercepts[k] = p.intercepts[src];
    q.covariances[k] = p.covariances[src];
    if (posteriors) cols.col(k) = posteriors->col(src);
  }
  p = std::move(q);
  if (posteriors) *posteriors = std::move(cols);
  return order;
}

}  // namespace mixsur
