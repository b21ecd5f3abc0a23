#pragma once

// Half-vectorization algebra for symmetric matrices.
//
// vech() stacks the lower triangle of a D x D symmetric matrix column by
// column into a vector of length T = D(D+1)/2.  The duplication matrix G
// (D^2 x T) undoes that: G * vech(A) = vec(A) for symmetric A, with vec()
// stacking full columns.  Derivatives with respect to covariance entries
// live in vech space; the chain rule through vec space produces terms like
// (b' (x) A) G and G'(M (x) A) G.  Those are evaluated here by index
// bookkeeping on the Kronecker structure, so no D^2 x D^2 intermediate is
// ever formed.

#include <Eigen/Dense>

#include "mixsur/errors.hpp"

namespace mixsur {

using Index = Eigen::Index;

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

constexpr Index vech_size(Index dim) { return dim * (dim + 1) / 2; }

// Position of entry (i, j), i >= j, within vech of a dim x dim matrix.
inline Index vech_index(Index i, Index j, Index dim) {
  return j * dim - j * (j - 1) / 2 + (i - j);
}

template <class Derived>
Vector<typename Derived::Scalar> vech(const Eigen::MatrixBase<Derived>& a) {
  const Index dim = a.rows();
  Vector<typename Derived::Scalar> v(vech_size(dim));
  Index t = 0;
  for (Index j = 0; j < dim; ++j)
    for (Index i = j; i < dim; ++i) v[t++] = a(i, j);
  return v;
}

template <class Derived>
Matrix<typename Derived::Scalar> unvech(const Eigen::MatrixBase<Derived>& v,
                                        Index dim) {
  if (v.size() != vech_size(dim))
    throw InvalidArgument("unvech: length does not match dimension");
  Matrix<typename Derived::Scalar> a(dim, dim);
  Index t = 0;
  for (Index j = 0; j < dim; ++j)
    for (Index i = j; i < dim; ++i) {
      a(i, j) = v[t];
      a(j, i) = v[t];
      ++t;
    }
  return a;
}

template <class Scalar = double>
Matrix<Scalar> duplication_matrix(Index dim) {
  Matrix<Scalar> g = Matrix<Scalar>::Zero(dim * dim, vech_size(dim));
  for (Index j = 0; j < dim; ++j)
    for (Index i = j; i < dim; ++i) {
      const Index t = vech_index(i, j, dim);
      g(j * dim + i, t) = Scalar(1);  // entry (i, j) of vec
      g(i * dim + j, t) = Scalar(1);  // entry (j, i); same cell when i == j
    }
  return g;
}

// G' vec(B) for a general (not necessarily symmetric) B: diagonal entries
// pass through, off-diagonal pairs fold as B(i,j) + B(j,i).
template <class Derived>
Vector<typename Derived::Scalar> vech_fold(
    const Eigen::MatrixBase<Derived>& b) {
  const Index dim = b.rows();
  Vector<typename Derived::Scalar> v(vech_size(dim));
  Index t = 0;
  for (Index j = 0; j < dim; ++j)
    for (Index i = j; i < dim; ++i)
      v[t++] = (i == j) ? b(i, i) : b(i, j) + b(j, i);
  return v;
}

// (b' (x) A) G, a dim x T matrix.  Column vech(i,j) picks the two unit
// entries of G's column, landing on b_j A(.,i) and, when i != j, b_i A(.,j).
template <class DerB, class DerA>
Matrix<typename DerA::Scalar> kron_rowvec_dup(
    const Eigen::MatrixBase<DerB>& b, const Eigen::MatrixBase<DerA>& a) {
  const Index dim = a.rows();
  Matrix<typename DerA::Scalar> out(dim, vech_size(dim));
  for (Index j = 0; j < dim; ++j)
    for (Index i = j; i < dim; ++i) {
      const Index t = vech_index(i, j, dim);
      out.col(t) = b[j] * a.col(i);
      if (i != j) out.col(t) += b[i] * a.col(j);
    }
  return out;
}

// G' (b (x) A), a T x dim matrix.  Written out independently of
// kron_rowvec_dup on purpose: the two feed opposite off-diagonal blocks of
// a matrix that must come out symmetric, so coding them separately turns
// an index slip into a visible asymmetry instead of a silent error.
template <class DerB, class DerA>
Matrix<typename DerA::Scalar> dup_kron_colvec(
    const Eigen::MatrixBase<DerB>& b, const Eigen::MatrixBase<DerA>& a) {
  const Index dim = a.rows();
  Matrix<typename DerA::Scalar> out(vech_size(dim), dim);
  for (Index j = 0; j < dim; ++j)
    for (Index i = j; i < dim; ++i) {
      const Index t = vech_index(i, j, dim);
      out.row(t) = b[j] * a.row(i);
      if (i != j) out.row(t) += b[i] * a.row(j);
    }
  return out;
}

// G' (M (x) A) G, a T x T matrix.  Entry (vech(i,j), vech(p,q)) sums
// M(c_r, c_q) A(r_r, r_q) over the unit entries of the two G columns: row
// positions {(i,j), (j,i)} and column positions {(p,q), (q,p)}, singletons
// on the diagonal.
template <class DerM, class DerA>
Matrix<typename DerA::Scalar> dup_sandwich(const Eigen::MatrixBase<DerM>& m,
                                           const Eigen::MatrixBase<DerA>& a) {
  const Index dim = a.rows();
  const Index t = vech_size(dim);
  Matrix<typename DerA::Scalar> out(t, t);
  for (Index j = 0; j < dim; ++j)
    for (Index i = j; i < dim; ++i) {
      const Index row = vech_index(i, j, dim);
      for (Index q = 0; q < dim; ++q)
        for (Index p = q; p < dim; ++p) {
          const Index col = vech_index(p, q, dim);
          typename DerA::Scalar s = m(j, q) * a(i, p);
          if (p != q) s += m(j, p) * a(i, q);
          if (i != j) {
            s += m(i, q) * a(j, p);
            if (p != q) s += m(i, p) * a(j, q);
          }
          out(row, col) = s;
        }
    }
  return out;
}

}  // namespace mixsur
