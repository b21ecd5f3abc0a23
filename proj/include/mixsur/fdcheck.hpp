#pragma once

// Finite-difference verification of the analytic derivatives, in packed
// coordinates.  This lives in the library rather than the tests because
// the command-line tool exposes it: being able to check the calculus on
// the user's own data is part of the product, not just of the test suite.
//
// Central differences with per-coordinate steps h_j = s * max(1, |t_j|).
// Weight coordinates get their steps clamped to 0.4 * min(pi_j, pi_K) so
// both probe points keep every mixing weight strictly positive; without
// the clamp, a fit that pushed a weight near the simplex boundary would
// make unpack() reject the probe.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "mixsur/derivatives.hpp"
#include "mixsur/likelihood.hpp"
#include "mixsur/types.hpp"

namespace mixsur {

namespace detail {

template <class Scalar>
Vector<Scalar> fd_steps(const Vector<Scalar>& packed, const ModelSpec& spec,
                        Scalar step_scale) {
  const PackedLayout l = packed_layout(spec);
  Vector<Scalar> h(packed.size());
  for (Index j = 0; j < packed.size(); ++j)
    h[j] = step_scale * std::max(Scalar(1), std::abs(packed[j]));
  if (l.weight_size > 0) {
    Scalar tail = Scalar(1);
    for (Index j = 0; j < l.weight_size; ++j) tail -= packed[j];
    for (Index j = 0; j < l.weight_size; ++j)
      h[j] = std::min(h[j], Scalar(0.4) * std::min(packed[j], tail));
  }
  return h;
}

}  // namespace detail

template <class Scalar>
Vector<Scalar> fd_score(const Parameters<Scalar>& p,
                        const Dataset<Scalar>& data, const ModelSpec& spec,
                        Scalar step_scale = Scalar(1e-5)) {
  const Vector<Scalar> at = pack(p, spec);
  const Vector<Scalar> h = detail::fd_steps(at, spec, step_scale);
  Vector<Scalar> g(at.size());
  for (Index j = 0; j < at.size(); ++j) {
    Vector<Scalar> up = at, down = at;
    up[j] += h[j];
    down[j] -= h[j];
    g[j] = (log_likelihood(unpack(up, spec), data, spec) -
            log_likelihood(unpack(down, spec), data, spec)) /
           (Scalar(2) * h[j]);
  }
  return g;
}

// Central differences of the analytic score, column by column.  Verifying
// the Hessian against d(score)/d(theta) rather than second differences of
// the log-likelihood keeps the truncation error quadratic in the step.
template <class Scalar>
Matrix<Scalar> fd_hessian(const Parameters<Scalar>& p,
                          const Dataset<Scalar>& data, const ModelSpec& spec,
                          Scalar step_scale = Scalar(1e-5)) {
  const Vector<Scalar> at = pack(p, spec);
  const Vector<Scalar> h = detail::fd_steps(at, spec, step_scale);
  Matrix<Scalar> hess(at.size(), at.size());
  for (Index j = 0; j < at.size(); ++j) {
    Vector<Scalar> up = at, down = at;
    up[j] += h[j];
    down[j] -= h[j];
    hess.col(j) = (score(unpack(up, spec), data, spec).packed(spec) -
                   score(unpack(down, spec), data, spec).packed(spec)) /
                  (Scalar(2) * h[j]);
  }
  return hess;
}

// max_j |a_j - b_j| / max(1, |b_j|) with b as the reference.
template <class Scalar>
Scalar max_rel_error(const Vector<Scalar>& a, const Vector<Scalar>& b) {
  Scalar worst = 0;
  for (Index j = 0; j < a.size(); ++j)
    worst = std::max(worst, std::abs(a[j] - b[j]) /
                                std::max(Scalar(1), std::abs(b[j])));
  return worst;
}

template <class Scalar>
Scalar max_rel_error(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  Scalar worst = 0;
  for (Index j = 0; j < a.size(); ++j)
    worst = std::max(worst, std::abs(a(j) - b(j)) /
                                std::max(Scalar(1), std::abs(b(j))));
  return worst;
}

template <class Scalar>
struct GradientCheck {
  Scalar score_error;    // analytic score vs central differences
  Scalar hessian_error;  // analytic Hessian vs differenced analytic score

  bool ok(Scalar score_tol, Scalar hessian_tol) const {
    return score_error < score_tol && hessian_error < hessian_tol;
  }
};

template <class Scalar>
GradientCheck<Scalar> gradient_check(const Parameters<Scalar>& p,
                                     const Dataset<Scalar>& data,
                                     const ModelSpec& spec,
                                     Scalar step_scale = Scalar(1e-5)) {
  GradientCheck<Scalar> out;
  out.score_error = max_rel_error(
      Vector<Scalar>(score(p, data, spec).packed(spec)),
      Vector<Scalar>(fd_score(p, data, spec, step_scale)));
  out.hessian_error =
      max_rel_error(hessian(p, data, spec), fd_hessian(p, data, spec,
                                                       step_scale));
  return out;
}

}  // namespace mixsur
