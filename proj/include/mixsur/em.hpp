#pragma once

// EM for the mixture model.
//
// E step: posterior component weights from the current parameters.
// M step: weights update in closed form; the joint (intercepts, beta)
// vector and the covariances have no joint closed form, so the M step
// alternates an exact generalized least squares solve for the stacked
// gamma = (intercepts, beta) given the covariances with the closed-form
// covariance update given gamma, until the parameter stack stops moving.
// Each covariance update is Cholesky-checked on the spot.  Nothing is
// ridged or floored: a singular normal matrix, a failed factorization, or
// a component starved below D + 1 effective observations throws, the
// surrounding start records the failure, and only if every start fails
// does fit() give up.
//
// Stopping uses Aitken acceleration on the log-likelihood sequence: the
// geometric-tail estimate l_inf = l(r-1) + (l(r) - l(r-1)) / (1 - a) with
// a the consecutive-increment ratio, stopping when the estimated remaining
// gain drops below tol.  The first two iterations, and any iteration where
// the ratio degenerates (a >= 1 or a vanishing denominator), fall back to
// the plain |delta l| test.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mixsur/design.hpp"
#include "mixsur/likelihood.hpp"
#include "mixsur/rng.hpp"
#include "mixsur/types.hpp"

namespace mixsur {

enum class InitStrategy { SurResidualGmm, RandomPartition, User };

template <class Scalar>
struct EmControls {
  int max_iterations = 500;
  Scalar tolerance = Scalar(1e-8);
  int inner_max_iterations = 500;
  Scalar inner_tolerance = Scalar(1e-8);
  int starts = 1;  // first start uses `initialization`, the rest are random
  std::uint64_t seed = 0;
  InitStrategy initialization = InitStrategy::SurResidualGmm;
  std::optional<Parameters<Scalar>> initial;  // start point for User
};

enum class Convergence { Aitken, MaxIterations };

inline const char* to_string(Convergence c) {
  return c == Convergence::Aitken ? "aitken" : "max-iterations";
}

// Larger-is-better information criterion: 2 loglik - npar ln(I).
template <class Scalar>
Scalar bic(Scalar loglik, Index npar, Index observations) {
  return Scalar(2) * loglik -
         Scalar(npar) * std::log(Scalar(observations));
}

template <class Scalar>
struct FitResult {
  Parameters<Scalar> parameters;  // canonical component order
  Scalar loglik = 0;
  std::vector<Scalar> trace;      // trace[0] is the starting value
  Matrix<Scalar> posteriors;      // I x K at the returned parameters
  Convergence status = Convergence::Aitken;
  int iterations = 0;
  Index npar = 0;
  Scalar bic = 0;
  int start_index = 0;
  std::vector<std::string> start_notes;  // one line per start
};

template <class Scalar>
Matrix<Scalar> e_step(const Parameters<Scalar>& p, const Dataset<Scalar>& data,
                      const ModelSpec& spec) {
  return responsibilities(p, data, spec);
}

namespace detail {

// Pool columns actually used, concatenated equation by equation so column
// j lines up with packed coefficient j.
template <class Scalar>
Matrix<Scalar> selected_pool(const Dataset<Scalar>& data,
                             const ModelSpec& spec) {
  Matrix<Scalar> s(data.observation_count(), spec.coefficient_count());
  Index j = 0;
  for (Index d = 0; d < spec.response_count; ++d)
    for (Index c : spec.equation_regressors[d]) s.col(j++) = data.pool.col(c);
  return s;
}

template <class Scalar>
void check_normal_matrix(const Eigen::LDLT<Matrix<Scalar>>& ldlt) {
  const auto d = ldlt.vectorD();
  const Scalar largest = d.cwiseAbs().maxCoeff();
  const Scalar smallest = d.cwiseAbs().minCoeff();
  if (ldlt.info() != Eigen::Success || !(largest > Scalar(0)) ||
      smallest < Scalar(d.size()) *
                     std::numeric_limits<Scalar>::epsilon() * largest)
    throw SingularSystem(
        "generalized least squares normal matrix is numerically singular");
}

}  // namespace detail

// One M step from soft labels.  sigma_init seeds the inner alternation;
// callers inside EM pass the previous iteration's covariances so the inner
// loop starts where it will land anyway after the first few EM sweeps.
template <class Scalar>
Parameters<Scalar> m_step(const Matrix<Scalar>& posteriors,
                          const Dataset<Scalar>& data, const ModelSpec& spec,
                          const std::vector<Matrix<Scalar>>& sigma_init,
                          const EmControls<Scalar>& controls =
                              EmControls<Scalar>{}) {
  const Index n = data.observation_count();
  const Index dim = spec.response_count;
  const Index k_count = spec.component_count;
  const Index reg = spec.coefficient_count();
  if (posteriors.rows() != n || posteriors.cols() != k_count)
    throw InvalidArgument("m_step: posterior shape mismatch");
  if (static_cast<Index>(sigma_init.size()) != k_count)
    throw InvalidArgument("m_step: need one covariance seed per component");

  Vector<Scalar> soft_count(k_count);
  for (Index k = 0; k < k_count; ++k) {
    soft_count[k] = posteriors.col(k).sum();
    if (soft_count[k] < Scalar(dim + 1))
      throw EmptyComponent(
          static_cast<int>(k),
          "component " + std::to_string(k + 1) + " holds " +
              std::to_string(static_cast<double>(soft_count[k])) +
              " effective observations, fewer than D + 1");
  }

  const Matrix<Scalar> sel = detail::selected_pool(data, spec);
  // Sigma-independent accumulations, one set per component.
  std::vector<Matrix<Scalar>> gram(k_count), cross(k_count);
  std::vector<Vector<Scalar>> pool_sum(k_count), resp_sum(k_count);
  for (Index k = 0; k < k_count; ++k) {
    gram[k] = sel.transpose() * posteriors.col(k).asDiagonal() * sel;
    cross[k] = sel.transpose() * posteriors.col(k).asDiagonal() *
               data.responses;
    pool_sum[k] = sel.transpose() * posteriors.col(k);
    resp_sum[k] = data.responses.transpose() * posteriors.col(k);
  }

  const Index system = dim * k_count + reg;
  std::vector<Matrix<Scalar>> sigma = sigma_init;
  Vector<Scalar> gamma(system);
  Vector<Scalar> previous_stack;
  const Index stack_len = system + k_count * vech_size(dim);

  for (int pass = 0; pass < controls.inner_max_iterations; ++pass) {
    // Precision per component from the current covariances.
    std::vector<Matrix<Scalar>> prec(k_count);
    for (Index k = 0; k < k_count; ++k) {
      Eigen::LLT<Matrix<Scalar>> llt(sigma[k]);
      if (llt.info() != Eigen::Success)
        throw SingularCovariance(static_cast<int>(k),
                                 "component " + std::to_string(k + 1) +
                                     ": covariance Cholesky failed in M step");
      prec[k] = llt.solve(Matrix<Scalar>::Identity(dim, dim));
    }

    // Assemble the normal system for gamma = (intercepts..., beta).  The
    // intercept blocks are diagonal in k; the coefficient block mixes the
    // per-equation weighted Gram blocks through each precision.
    Matrix<Scalar> normal = Matrix<Scalar>::Zero(system, system);
    Vector<Scalar> rhs = Vector<Scalar>::Zero(system);
    for (Index k = 0; k < k_count; ++k) {
      const Index off = k * dim;
      normal.block(off, off, dim, dim) = soft_count[k] * prec[k];
      rhs.segment(off, dim) = prec[k] * resp_sum[k];
      for (Index d = 0; d < dim; ++d) {
        const Index jd = spec.coefficient_offset(d);
        const Index pd = spec.regressor_count(d);
        if (pd == 0) continue;
        for (Index e = 0; e < dim; ++e) {
          // intercept row e against equation-d coefficients
          normal.block(off + e, dim * k_count + jd, 1, pd) +=
              prec[k](e, d) * pool_sum[k].segment(jd, pd).transpose();
          normal.block(dim * k_count + jd, off + e, pd, 1) +=
              prec[k](e, d) * pool_sum[k].segment(jd, pd);
          rhs.segment(dim * k_count + jd, pd) +=
              prec[k](d, e) * cross[k].block(jd, e, pd, 1);
          const Index je = spec.coefficient_offset(e);
          const Index pe = spec.regressor_count(e);
          if (pe > 0)
            normal.block(dim * k_count + jd, dim * k_count + je, pd, pe) +=
                prec[k](d, e) * gram[k].block(jd, je, pd, pe);
        }
      }
    }

    Eigen::LDLT<Matrix<Scalar>> ldlt(normal);
    detail::check_normal_matrix(ldlt);
    gamma = ldlt.solve(rhs);

    // Covariance update at the new gamma.
    const Vector<Scalar> beta = gamma.tail(reg);
    Matrix<Scalar> shared(n, dim);
    shared.setZero();
    for (Index d = 0; d < dim; ++d) {
      Index j = spec.coefficient_offset(d);
      for (Index c : spec.equation_regressors[d])
        shared.col(d) += beta[j++] * data.pool.col(c);
    }
    Vector<Scalar> stack(stack_len);
    stack.head(system) = gamma;
    for (Index k = 0; k < k_count; ++k) {
      Matrix<Scalar> resid = data.responses - shared;
      resid.rowwise() -= gamma.segment(k * dim, dim).transpose();
      sigma[k] = resid.transpose() * posteriors.col(k).asDiagonal() * resid /
                 soft_count[k];
      Eigen::LLT<Matrix<Scalar>> llt(sigma[k]);
      if (llt.info() != Eigen::Success)
        throw SingularCovariance(static_cast<int>(k),
                                 "component " + std::to_string(k + 1) +
                                     ": updated covariance is singular");
      stack.segment(system + k * vech_size(dim), vech_size(dim)) =
          vech(sigma[k]);
    }

    // Mean Euclidean distance between consecutive stacks: l2 norm of the
    // change divided by the stack length.
    if (previous_stack.size() > 0 &&
        (stack - previous_stack).norm() / Scalar(stack_len) <
            controls.inner_tolerance) {
      previous_stack = std::move(stack);
      break;
    }
    previous_stack = std::move(stack);
  }

  Parameters<Scalar> p;
  p.weights = soft_count / Scalar(n);
  p.coefficients = gamma.tail(reg);
  for (Index k = 0; k < k_count; ++k) {
    p.intercepts.push_back(gamma.segment(k * dim, dim));
    p.covariances.push_back(sigma[k]);
  }
  return p;
}

namespace detail {

// Hard k-means partition of the rows of `points`, used only to seed the
// residual mixture during initialization.  Deterministic given the engine
// state: distinct starting centers by partial Fisher-Yates, ten Lloyd
// sweeps, ties and empty clusters resolved toward lower indices / previous
// centers.
template <class Scalar>
std::vector<Index> kmeans_partition(const Matrix<Scalar>& points,
                                    Index clusters, Prng& rng) {
  const Index n = points.rows();
  if (n < clusters)
    throw InvalidArgument("kmeans_partition: fewer points than clusters");
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index(0));
  for (Index j = 0; j < clusters; ++j) {
    std::uniform_int_distribution<Index> pick(j, n - 1);
    std::swap(order[j], order[pick(rng)]);
  }
  Matrix<Scalar> centers(clusters, points.cols());
  for (Index k = 0; k < clusters; ++k) centers.row(k) = points.row(order[k]);

  std::vector<Index> assign(n, 0);
  for (int sweep = 0; sweep < 10; ++sweep) {
    for (Index i = 0; i < n; ++i) {
      Scalar best = std::numeric_limits<Scalar>::max();
      for (Index k = 0; k < clusters; ++k) {
        const Scalar dist = (points.row(i) - centers.row(k)).squaredNorm();
        if (dist < best) {
          best = dist;
          assign[i] = k;
        }
      }
    }
    for (Index k = 0; k < clusters; ++k) {
      Index members = 0;
      Vector<Scalar> mean = Vector<Scalar>::Zero(points.cols());
      for (Index i = 0; i < n; ++i)
        if (assign[i] == k) {
          mean += points.row(i).transpose();
          ++members;
        }
      if (members > 0) centers.row(k) = mean.transpose() / Scalar(members);
    }
  }
  return assign;
}

template <class Scalar>
Matrix<Scalar> one_hot(const std::vector<Index>& labels, Index k_count) {
  Matrix<Scalar> hot =
      Matrix<Scalar>::Zero(static_cast<Index>(labels.size()), k_count);
  for (Index i = 0; i < hot.rows(); ++i)
    hot(i, labels[static_cast<size_t>(i)]) = Scalar(1);
  return hot;
}

// Maximum likelihood covariance of the columns of y (denominator n).
template <class Scalar>
Matrix<Scalar> ml_covariance(const Matrix<Scalar>& y) {
  Matrix<Scalar> centered = y.rowwise() - y.colwise().mean();
  return centered.transpose() * centered / Scalar(y.rows());
}

template <class Scalar>
struct EmRun {
  Parameters<Scalar> parameters;
  std::vector<Scalar> trace;
  Convergence status;
  int iterations;
};

// Plain EM from a given start; no restarts, no canonicalization.
template <class Scalar>
EmRun<Scalar> em_single_run(const Dataset<Scalar>& data, const ModelSpec& spec,
                            Parameters<Scalar> theta,
                            const EmControls<Scalar>& controls) {
  EmRun<Scalar> run;
  MixtureWorkspace<Scalar> work(theta, data, spec);
  run.trace.push_back(work.log_likelihood());
  for (int iter = 1; iter <= controls.max_iterations; ++iter) {
    theta = m_step(Matrix<Scalar>(work.responsibilities()), data, spec,
                   theta.covariances, controls);
    work = MixtureWorkspace<Scalar>(theta, data, spec);
    run.trace.push_back(work.log_likelihood());

    const size_t r = run.trace.size() - 1;
    const Scalar newest = run.trace[r];
    const Scalar last = run.trace[r - 1];
    bool stop;
    if (r < 3) {
      stop = std::abs(newest - last) < controls.tolerance;
    } else {
      const Scalar denom = last - run.trace[r - 2];
      const Scalar ratio = (newest - last) / denom;
      if (std::abs(denom) < Scalar(1e-300) || ratio >= Scalar(1))
        stop = std::abs(newest - last) < controls.tolerance;
      else
        stop = std::abs((newest - last) / (Scalar(1) - ratio)) <
               controls.tolerance;
    }
    if (stop) {
      run.parameters = std::move(theta);
      run.status = Convergence::Aitken;
      run.iterations = iter;
      return run;
    }
  }
  run.parameters = std::move(theta);
  run.status = Convergence::MaxIterations;
  run.iterations = controls.max_iterations;
  return run;
}

}  // namespace detail

// Starting point construction.
//
// SurResidualGmm first solves the K = 1 model exactly (the alternation in
// m_step with uniform weights is iterative feasible GLS), then fits a short
// K-component mixture to its residuals from a seeded k-means split, and
// grafts the residual mixture's means onto the single-model intercept.
// RandomPartition applies one M step to a uniformly random hard split with
// identity covariance seeds.  User validates and returns controls.initial.
// With K = 1 every strategy collapses to the classical fit.
template <class Scalar>
Parameters<Scalar> initialize(const Dataset<Scalar>& data,
                              const ModelSpec& spec, InitStrategy strategy,
                              std::uint64_t seed,
                              const EmControls<Scalar>& controls =
                                  EmControls<Scalar>{}) {
  const Index n = data.observation_count();
  const Index dim = spec.response_count;

  if (strategy == InitStrategy::User) {
    if (!controls.initial)
      throw InvalidArgument("initialize: User strategy needs a start point");
    controls.initial->validate(spec);
    return *controls.initial;
  }

  ModelSpec single = spec;
  single.component_count = 1;
  const Parameters<Scalar> base =
      m_step(Matrix<Scalar>(Matrix<Scalar>::Ones(n, 1)), data, single,
             {detail::ml_covariance(data.responses)}, controls);
  if (spec.component_count == 1) return base;

  if (strategy == InitStrategy::RandomPartition) {
    Prng rng = make_prng(seed);
    std::uniform_int_distribution<Index> pick(0, spec.component_count - 1);
    std::vector<Index> labels;
    for (Index i = 0; i < n; ++i) labels.push_back(pick(rng));
    std::vector<Matrix<Scalar>> eye(spec.component_count,
                                    Matrix<Scalar>::Identity(dim, dim));
    return m_step(detail::one_hot<Scalar>(labels, spec.component_count), data,
                  spec, eye, controls);
  }

  // SurResidualGmm
  Matrix<Scalar> resid =
      data.responses - fitted_values(data, spec, base.coefficients);
  resid.rowwise() -= base.intercepts[0].transpose();

  Dataset<Scalar> resid_data;
  resid_data.responses = resid;
  resid_data.pool.resize(n, 0);
  ModelSpec gmm;
  gmm.response_count = dim;
  gmm.component_count = spec.component_count;
  gmm.equation_regressors.assign(static_cast<size_t>(dim), {});
  resid_data.active = gmm;

  Prng rng = make_prng(seed);
  const std::vector<Index> labels =
      detail::kmeans_partition(resid, spec.component_count, rng);
  std::vector<Matrix<Scalar>> eye(spec.component_count,
                                  Matrix<Scalar>::Identity(dim, dim));
  Parameters<Scalar> mix0 =
      m_step(detail::one_hot<Scalar>(labels, spec.component_count),
             resid_data, gmm, eye, controls);

  EmControls<Scalar> short_controls = controls;
  short_controls.max_iterations = std::min(100, controls.max_iterations);
  const Parameters<Scalar> mix =
      detail::em_single_run(resid_data, gmm, std::move(mix0), short_controls)
          .parameters;

  Parameters<Scalar> start;
  start.weights = mix.weights;
  start.coefficients = base.coefficients;
  for (Index k = 0; k < spec.component_count; ++k) {
    start.intercepts.push_back(base.intercepts[0] + mix.intercepts[k]);
    start.covariances.push_back(mix.covariances[k]);
  }
  return start;
}

// Maximum likelihood fit.  Start 0 uses controls.initialization (or User
// when an explicit start is supplied); remaining starts are random
// partitions with seeds derived from (controls.seed, start index), so the
// schedule does not depend on evaluation order.  Per-start failures are
// recorded, not fatal, unless every start fails.
template <class Scalar>
FitResult<Scalar> fit(const Dataset<Scalar>& data, const ModelSpec& spec,
                      const EmControls<Scalar>& controls =
                          EmControls<Scalar>{}) {
  spec.validate();
  if (data.responses.cols() != spec.response_count)
    throw InvalidArgument("fit: response count does not match spec");
  for (const auto& eq : spec.equation_regressors)
    for (Index c : eq)
      if (c >= data.pool.cols())
        throw InvalidArgument("fit: regressor index exceeds pool");
  if (data.observation_count() < 1) throw EmptyData("fit: no observations");

  const int starts = std::max(1, controls.starts);
  std::optional<detail::EmRun<Scalar>> best;
  int best_start = -1;
  std::vector<std::string> notes;
  std::vector<std::string> failures;

  for (int s = 0; s < starts; ++s) {
    const std::uint64_t start_seed =
        derive_seed(controls.seed, seed_stream::kStart,
                    static_cast<std::uint64_t>(s));
    InitStrategy strategy = controls.initialization;
    if (controls.initial) strategy = InitStrategy::User;
    if (s > 0) strategy = InitStrategy::RandomPartition;
    try {
      Parameters<Scalar> theta0 =
          initialize(data, spec, strategy, start_seed, controls);
      detail::EmRun<Scalar> run =
          detail::em_single_run(data, spec, std::move(theta0), controls);
      const Scalar loglik = run.trace.back();
      notes.push_back("start " + std::to_string(s) + ": loglik " +
                      std::to_string(static_cast<double>(loglik)) + " (" +
                      to_string(run.status) + ", " +
                      std::to_string(run.iterations) + " iterations)");
      if (!best || loglik > best->trace.back()) {
        best = std::move(run);
        best_start = s;
      }
    } catch (const Error& err) {
      notes.push_back("start " + std::to_string(s) +
                      ": failed: " + err.what());
      failures.push_back(err.what());
    }
  }

  if (!best)
    throw AllStartsFailed(failures, "all " + std::to_string(starts) +
                                        " starts failed; first failure: " +
                                        (failures.empty() ? "?"
                                                          : failures.front()));

  FitResult<Scalar> result;
  result.parameters = std::move(best->parameters);
  canonicalize(result.parameters);
  result.posteriors = responsibilities(result.parameters, data, spec);
  result.loglik = best->trace.back();
  result.trace = std::move(best->trace);
  result.status = best->status;
  result.iterations = best->iterations;
  result.npar = count_parameters(spec);
  result.bic = bic(result.loglik, result.npar, data.observation_count());
  result.start_index = best_start;
  result.start_notes = std::move(notes);
  return result;
}

template <class Scalar>
FitResult<Scalar> fit(const Dataset<Scalar>& data,
                      const EmControls<Scalar>& controls =
                          EmControls<Scalar>{}) {
  return fit(data, data.active, controls);
}

}  // namespace mixsur
