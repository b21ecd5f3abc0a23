#pragma once

// Model simulation and the parametric bootstrap.
//
// simulate() draws each observation with a fixed consumption order (one
// uniform for the component label, then D standard normals pushed through
// the covariance Cholesky factor), so a seed pins the whole sample.
// parametric_bootstrap() refits B simulated samples; every replicate owns a
// seed derived from (root seed, replicate index), which makes the result
// independent of thread count and lets a failed replicate be replayed in
// isolation.  Replicates whose fit fails are recorded and excluded, never
// patched.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mixsur/em.hpp"
#include "mixsur/parallel.hpp"
#include "mixsur/rng.hpp"

namespace mixsur {

template <class Scalar>
Matrix<Scalar> simulate(const Parameters<Scalar>& p,
                        const Matrix<Scalar>& pool, const ModelSpec& spec,
                        std::uint64_t seed,
                        std::vector<Index>* labels = nullptr) {
  p.validate(spec);
  for (const auto& eq : spec.equation_regressors)
    for (Index c : eq)
      if (c >= pool.cols())
        throw InvalidArgument("simulate: regressor index exceeds pool");
  const Index n = pool.rows();
  if (n < 1) throw EmptyData("simulate: empty pool");
  const Index dim = spec.response_count;

  std::vector<Matrix<Scalar>> chol;
  for (Index k = 0; k < spec.component_count; ++k)
    chol.push_back(Matrix<Scalar>(
        Eigen::LLT<Matrix<Scalar>>(p.covariances[k]).matrixL()));

  Prng rng = make_prng(derive_seed(seed, seed_stream::kSimulate));
  std::uniform_real_distribution<Scalar> uniform(Scalar(0), Scalar(1));
  std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));

  Matrix<Scalar> responses(n, dim);
  if (labels) labels->clear();
  Vector<Scalar> shock(dim);
  for (Index i = 0; i < n; ++i) {
    const Scalar u = uniform(rng);
    Index k = 0;
    Scalar cum = p.weights[0];
    while (u > cum && k + 1 < spec.component_count) cum += p.weights[++k];
    if (labels) labels->push_back(k);
    for (Index d = 0; d < dim; ++d) shock[d] = normal(rng);
    Vector<Scalar> y = p.intercepts[k] + chol[k] * shock;
    for (Index d = 0; d < dim; ++d) {
      Index j = spec.coefficient_offset(d);
      for (Index c : spec.equation_regressors[d])
        y[d] += p.coefficients[j++] * pool(i, c);
    }
    responses.row(i) = y.transpose();
  }
  return responses;
}

template <class Scalar>
struct BootstrapResult {
  Matrix<Scalar> replicates;  // one row per successful refit, beta columns
  Index requested = 0;
  std::vector<Index> failed_replicates;       // replicate indices, ascending
  std::vector<std::string> failure_reasons;   // aligned with the above
  Index successes() const { return replicates.rows(); }
};

template <class Scalar>
BootstrapResult<Scalar> parametric_bootstrap(
    const Parameters<Scalar>& p, const Dataset<Scalar>& data,
    const ModelSpec& spec, Index b_count,
    const EmControls<Scalar>& controls = EmControls<Scalar>{},
    std::uint64_t seed = 0, int threads = 1) {
  if (b_count < 1)
    throw InvalidArgument("parametric_bootstrap: need at least one replicate");
  p.validate(spec);

  const Index reg = spec.coefficient_count();
  Matrix<Scalar> draws(b_count, reg);
  std::vector<char> ok(static_cast<size_t>(b_count), 0);
  std::vector<std::string> reasons(static_cast<size_t>(b_count));

  parallel_for(b_count, threads, [&](Index b) {
    const std::uint64_t replicate_seed =
        derive_seed(seed, seed_stream::kReplicate,
                    static_cast<std::uint64_t>(b));
    Dataset<Scalar> sample;
    sample.responses = simulate(p, data.pool, spec, replicate_seed);
    sample.pool = data.pool;
    sample.active = spec;

    EmControls<Scalar> replicate_controls = controls;
    replicate_controls.seed = replicate_seed;
    try {
      const FitResult<Scalar> refit = fit(sample, spec, replicate_controls);
      draws.row(b) = refit.parameters.coefficients.transpose();
      ok[static_cast<size_t>(b)] = 1;
    } catch (const Error& err) {
      reasons[static_cast<size_t>(b)] = err.what();
    }
  });

  BootstrapResult<Scalar> result;
  result.requested = b_count;
  Index kept = 0;
  for (Index b = 0; b < b_count; ++b)
    if (ok[static_cast<size_t>(b)]) ++kept;
  result.replicates.resize(kept, reg);
  Index row = 0;
  for (Index b = 0; b < b_count; ++b) {
    if (ok[static_cast<size_t>(b)]) {
      result.replicates.row(row++) = draws.row(b);
    } else {
      result.failed_replicates.push_back(b);
      result.failure_reasons.push_back(reasons[static_cast<size_t>(b)]);
    }
  }
  return result;
}

// Sample quantile with the (n - 1) p interpolation rule: sorted order
// statistics x_0 .. x_{n-1}, h = (n - 1) p, linear between neighbors.
template <class Scalar>
Scalar sample_quantile(const Vector<Scalar>& draws, Scalar prob) {
  if (draws.size() < 1) throw TooFewReplicates("sample_quantile: no draws");
  if (!(prob >= Scalar(0) && prob <= Scalar(1)))
    throw InvalidArgument("sample_quantile: probability outside [0, 1]");
  std::vector<Scalar> sorted(draws.data(), draws.data() + draws.size());
  std::sort(sorted.begin(), sorted.end());
  const Scalar h = prob * Scalar(sorted.size() - 1);
  const Index lo = static_cast<Index>(std::floor(h));
  const Index hi = std::min<Index>(lo + 1,
                                   static_cast<Index>(sorted.size()) - 1);
  const Scalar frac = h - Scalar(lo);
  return sorted[static_cast<size_t>(lo)] +
         frac * (sorted[static_cast<size_t>(hi)] -
                 sorted[static_cast<size_t>(lo)]);
}

template <class Scalar>
struct PercentileInterval {
  Scalar lower = 0;
  Scalar upper = 0;
};

template <class Scalar>
PercentileInterval<Scalar> percentile_ci(const Vector<Scalar>& draws,
                                         Scalar level) {
  if (!(level > Scalar(0) && level < Scalar(1)))
    throw InvalidArgument("percentile_ci: level must lie strictly in (0, 1)");
  if (draws.size() < 2)
    throw TooFewReplicates("percentile_ci: need at least two replicates");
  const Scalar tail = (Scalar(1) - level) / Scalar(2);
  return {sample_quantile(draws, tail),
          sample_quantile(draws, Scalar(1) - tail)};
}

template <class Scalar>
struct BootstrapSummary {
  Scalar mean = 0;
  Scalar sd = 0;          // denominator: successes - 1
  Scalar bias = 0;        // mean - reference point
  Scalar bias_ratio = 0;  // |bias| / sd
};

template <class Scalar>
BootstrapSummary<Scalar> bootstrap_summary(const Vector<Scalar>& draws,
                                           Scalar point) {
  if (draws.size() < 2)
    throw TooFewReplicates("bootstrap_summary: need at least two replicates");
  BootstrapSummary<Scalar> s;
  s.mean = draws.mean();
  s.sd = std::sqrt((draws.array() - s.mean).square().sum() /
                   Scalar(draws.size() - 1));
  s.bias = s.mean - point;
  if (s.sd > Scalar(0))
    s.bias_ratio = std::abs(s.bias) / s.sd;
  else
    s.bias_ratio = s.bias == Scalar(0)
                       ? Scalar(0)
                       : std::numeric_limits<Scalar>::infinity();
  return s;
}

}  // namespace mixsur
