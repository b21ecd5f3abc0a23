#pragma once

// Post-fit inference and model selection: Wald intervals for the regression
// coefficients from the observed information, exhaustive regressor-subset /
// component-count search ranked by BIC, posterior classification, and a
// chi-squared independence test for comparing the induced clustering with
// an external factor.

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <mutex>
#include <string>
#include <vector>

#include "mixsur/derivatives.hpp"
#include "mixsur/em.hpp"
#include "mixsur/parallel.hpp"
#include "mixsur/rng.hpp"
#include "mixsur/special.hpp"

namespace mixsur {

template <class Scalar>
struct IntervalEstimate {
  Scalar point = 0;
  Scalar se = 0;
  Scalar lower = 0;
  Scalar upper = 0;
};

// Symmetric normal-theory interval around a point estimate.
template <class Scalar>
IntervalEstimate<Scalar> make_interval(Scalar point, Scalar se, Scalar level) {
  if (!(level > Scalar(0) && level < Scalar(1)))
    throw InvalidArgument("make_interval: level must lie strictly in (0, 1)");
  if (!(se >= Scalar(0)))
    throw InvalidArgument("make_interval: standard error must be nonnegative");
  const Scalar z = static_cast<Scalar>(
      normal_quantile(0.5 * (1.0 + static_cast<double>(level))));
  return {point, se, point - z * se, point + z * se};
}

template <class Scalar>
struct InferenceResult {
  Matrix<Scalar> covariance;  // packed-parameter covariance, npar x npar
  Vector<Scalar> se;          // square roots of its diagonal
  std::vector<std::string> coefficient_names;
  std::vector<IntervalEstimate<Scalar>> coefficients;
  Scalar level = 0;
};

// Standard errors and coefficient intervals from the observed information
// at the supplied parameters (normally an ML fit).  Throws
// NotPositiveDefinite away from a proper maximum.
template <class Scalar>
InferenceResult<Scalar> coefficient_inference(const Parameters<Scalar>& p,
                                              const Dataset<Scalar>& data,
                                              const ModelSpec& spec,
                                              Scalar level = Scalar(0.95)) {
  InferenceResult<Scalar> out;
  out.level = level;
  out.covariance = covariance_of_estimates(hessian(p, data, spec));
  out.se = out.covariance.diagonal().cwiseMax(Scalar(0)).cwiseSqrt();
  const PackedLayout layout = packed_layout(spec);
  for (Index j = 0; j < spec.coefficient_count(); ++j) {
    const Index slot = layout.coefficient_offset + j;
    out.coefficient_names.push_back(spec.coefficient_name(j));
    out.coefficients.push_back(
        make_interval(p.coefficients[j], out.se[slot], level));
  }
  return out;
}

// Hard assignment by largest posterior probability, ties to the lower
// component index.  Labels are 0-based.
template <class Scalar>
std::vector<Index> classify(const Matrix<Scalar>& posteriors) {
  std::vector<Index> labels;
  labels.reserve(static_cast<size_t>(posteriors.rows()));
  for (Index i = 0; i < posteriors.rows(); ++i) {
    Index arg = 0;
    for (Index k = 1; k < posteriors.cols(); ++k)
      if (posteriors(i, k) > posteriors(i, arg)) arg = k;
    labels.push_back(arg);
  }
  return labels;
}

using CountTable = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>;

// Contingency table of two 0-based label sequences.
inline CountTable crosstab(const std::vector<Index>& rows,
                           const std::vector<Index>& cols) {
  if (rows.size() != cols.size())
    throw InvalidArgument("crosstab: label sequences differ in length");
  if (rows.empty()) throw EmptyData("crosstab: no observations");
  Index r = 0, c = 0;
  for (Index v : rows) {
    if (v < 0) throw InvalidArgument("crosstab: negative row label");
    r = std::max(r, v + 1);
  }
  for (Index v : cols) {
    if (v < 0) throw InvalidArgument("crosstab: negative column label");
    c = std::max(c, v + 1);
  }
  CountTable counts = CountTable::Zero(r, c);
  for (size_t i = 0; i < rows.size(); ++i) ++counts(rows[i], cols[i]);
  return counts;
}

struct ChiSquareTest {
  double statistic = 0;
  Index df = 0;
  double p_value = 1;
};

// Pearson's chi-squared test of independence, no continuity correction.
inline ChiSquareTest chi_square_independence(const CountTable& counts) {
  const Index r = counts.rows();
  const Index c = counts.cols();
  if (r < 2 || c < 2)
    throw DegenerateTable("independence test needs at least a 2 x 2 table");
  if ((counts.array() < 0).any())
    throw DegenerateTable("independence test: negative count");
  const Eigen::VectorXd row_totals =
      counts.cast<double>().rowwise().sum();
  const Eigen::VectorXd col_totals =
      counts.cast<double>().colwise().sum();
  const double total = row_totals.sum();
  if (row_totals.minCoeff() <= 0 || col_totals.minCoeff() <= 0)
    throw DegenerateTable("independence test: empty row or column");

  ChiSquareTest test;
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) {
      const double expected = row_totals[i] * col_totals[j] / total;
      const double diff = static_cast<double>(counts(i, j)) - expected;
      test.statistic += diff * diff / expected;
    }
  test.df = (r - 1) * (c - 1);
  test.p_value =
      chi_square_upper_tail(test.statistic, static_cast<double>(test.df));
  return test;
}

template <class Scalar>
struct SearchCell {
  Index components = 0;
  std::uint64_t mask = 0;      // bit d * candidates + j: candidate j in eq d
  Index coefficient_count = 0;
  Index npar = 0;
  Scalar loglik = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar bic = std::numeric_limits<Scalar>::quiet_NaN();
  bool ok = false;
  std::string status;          // convergence note or failure reason
  int iterations = 0;
  int start_index = -1;
};

template <class Scalar>
struct SearchGrid {
  std::vector<SearchCell<Scalar>> cells;  // K-major, mask ascending
  Index best_index = -1;
  ModelSpec best_spec;
  FitResult<Scalar> best_fit;
};

namespace detail {

// Strict total order on successful cells: higher BIC wins, ties prefer
// fewer parameters, then the smaller mask.  Distinct cells can never tie on
// all three (equal mask and npar forces equal K), so the winner does not
// depend on comparison order.
template <class Scalar>
bool cell_beats(const SearchCell<Scalar>& a, const SearchCell<Scalar>& b) {
  if (a.bic != b.bic) return a.bic > b.bic;
  if (a.npar != b.npar) return a.npar < b.npar;
  return a.mask < b.mask;
}

inline ModelSpec spec_from_mask(const ModelSpec& base,
                                const std::vector<Index>& candidates,
                                Index components, std::uint64_t mask) {
  ModelSpec spec = base;
  spec.component_count = components;
  spec.equation_regressors.assign(
      static_cast<size_t>(base.response_count), {});
  const Index c_count = static_cast<Index>(candidates.size());
  for (Index d = 0; d < base.response_count; ++d)
    for (Index j = 0; j < c_count; ++j)
      if (mask >> (d * c_count + j) & 1)
        spec.equation_regressors[static_cast<size_t>(d)].push_back(
            candidates[static_cast<size_t>(j)]);
  return spec;
}

}  // namespace detail

// Exhaustive ML fit of every regressor subset (per equation, over the
// candidate pool columns) crossed with every component count, ranked by
// BIC.  Ties prefer fewer parameters, then the smaller subset mask.  The
// per-cell fits are independent: each cell derives its own seed from
// (controls.seed, cell key), so results do not depend on thread count or
// evaluation order.  Individual cell failures are recorded in the grid;
// only a grid with no successful cell at all throws.
template <class Scalar>
SearchGrid<Scalar> search(const Dataset<Scalar>& data, const ModelSpec& base,
                          const std::vector<Index>& candidates,
                          const std::vector<Index>& k_values,
                          const EmControls<Scalar>& controls =
                              EmControls<Scalar>{},
                          int threads = 1) {
  if (k_values.empty())
    throw InvalidArgument("search: no component counts to try");
  for (Index k : k_values)
    if (k < 1) throw InvalidArgument("search: component counts start at 1");
  for (Index c : candidates)
    if (c < 0 || c >= data.pool.cols())
      throw InvalidArgument("search: candidate column outside the pool");

  const Index bits =
      base.response_count * static_cast<Index>(candidates.size());
  const std::uint64_t cell_cap = std::uint64_t(1) << 20;
  if (bits > 20)
    throw EnumerationTooLarge(
        std::uint64_t(0),
        "search: " + std::to_string(bits) +
            " equation-candidate pairs enumerate past the cell cap");
  const std::uint64_t masks = std::uint64_t(1) << bits;
  const std::uint64_t cell_count = masks * k_values.size();
  if (cell_count > cell_cap)
    throw EnumerationTooLarge(
        cell_count, "search: " + std::to_string(cell_count) +
                        " cells exceed the cap of " +
                        std::to_string(cell_cap));

  SearchGrid<Scalar> grid;
  grid.cells.resize(cell_count);
  std::mutex best_lock;  // guards best_index and best_fit during the sweep

  parallel_for(static_cast<Index>(cell_count), threads, [&](Index cell) {
    const std::uint64_t mask = std::uint64_t(cell) % masks;
    const Index k = k_values[static_cast<size_t>(cell / masks)];
    const ModelSpec spec =
        detail::spec_from_mask(base, candidates, k, mask);

    SearchCell<Scalar>& out = grid.cells[static_cast<size_t>(cell)];
    out.components = k;
    out.mask = mask;
    out.coefficient_count = spec.coefficient_count();
    out.npar = count_parameters(spec);

    EmControls<Scalar> cell_controls = controls;
    cell_controls.seed =
        derive_seed(controls.seed, seed_stream::kCell, mask * 64 + k);
    try {
      FitResult<Scalar> fit_result = fit(data, spec, cell_controls);
      out.loglik = fit_result.loglik;
      out.bic = fit_result.bic;
      out.ok = true;
      out.status = to_string(fit_result.status);
      out.iterations = fit_result.iterations;
      out.start_index = fit_result.start_index;

      std::lock_guard<std::mutex> hold(best_lock);
      if (grid.best_index < 0 ||
          detail::cell_beats(
              out, grid.cells[static_cast<size_t>(grid.best_index)])) {
        grid.best_index = cell;
        grid.best_fit = std::move(fit_result);
      }
    } catch (const Error& err) {
      out.status = std::string("failed: ") + err.what();
    }
  });

  if (grid.best_index < 0)
    throw Error("search: no cell produced a successful fit");
  const SearchCell<Scalar>& winner =
      grid.cells[static_cast<size_t>(grid.best_index)];
  grid.best_spec = detail::spec_from_mask(base, candidates,
                                          winner.components, winner.mask);
  return grid;
}

}  // namespace mixsur
