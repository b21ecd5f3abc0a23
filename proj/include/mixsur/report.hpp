#pragma once

// Report rendering: human-readable text tables plus a JSON mirror carrying
// the same doubles at full precision and the convergence metadata.  The
// text side rounds for the eye; the JSON side is the machine record, and
// nothing here stamps times or hosts, so identical runs produce identical
// bytes.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mixsur/csv.hpp"
#include "mixsur/em.hpp"
#include "mixsur/inference.hpp"
#include "mixsur/simboot.hpp"

namespace mixsur {

using nlohmann::json;

namespace detail {

inline std::string fmt(double value, int width = 12) {
  char buffer[48];
  std::snprintf(buffer, sizeof buffer, "%*.6g", width, value);
  return buffer;
}

inline std::string pad(const std::string& text, int width) {
  std::string out = text;
  if (static_cast<int>(out.size()) < width)
    out.append(static_cast<size_t>(width) - out.size(), ' ');
  return out;
}

inline void dump_full_into(const json& value, std::string& out, int depth) {
  const std::string inner(2 * size_t(depth + 1), ' ');
  const std::string outer(2 * size_t(depth), ' ');
  switch (value.type()) {
    case json::value_t::number_float: {
      const double x = value.get<double>();
      out += std::isfinite(x) ? format_full(x) : "null";
      break;
    }
    case json::value_t::array: {
      if (value.empty()) {
        out += "[]";
        break;
      }
      out += "[\n";
      for (size_t i = 0; i < value.size(); ++i) {
        out += inner;
        dump_full_into(value[i], out, depth + 1);
        if (i + 1 < value.size()) out += ',';
        out += '\n';
      }
      out += outer + "]";
      break;
    }
    case json::value_t::object: {
      if (value.empty()) {
        out += "{}";
        break;
      }
      out += "{\n";
      size_t i = 0;
      for (auto it = value.begin(); it != value.end(); ++it, ++i) {
        out += inner + json(it.key()).dump() + ": ";
        dump_full_into(it.value(), out, depth + 1);
        if (i + 1 < value.size()) out += ',';
        out += '\n';
      }
      out += outer + "}";
      break;
    }
    default:
      out += value.dump();
  }
}

}  // namespace detail

// nlohmann's dump() prints doubles in shortest-round-trip form, which can
// be as short as one digit.  The machine reports promise full precision, so
// floats are rendered through format_full (17 significant digits) instead.
inline std::string dump_full(const json& value) {
  std::string out;
  detail::dump_full_into(value, out, 0);
  out += '\n';
  return out;
}

inline json theta_to_json(const Parameters<double>& p, const ModelSpec& spec) {
  json theta;
  theta["weights"] = std::vector<double>(
      p.weights.data(), p.weights.data() + p.weights.size());
  theta["beta"] = std::vector<double>(
      p.coefficients.data(), p.coefficients.data() + p.coefficients.size());
  json lambda = json::array();
  json sigma = json::array();
  for (Index k = 0; k < spec.component_count; ++k) {
    lambda.push_back(std::vector<double>(
        p.intercepts[size_t(k)].data(),
        p.intercepts[size_t(k)].data() + spec.response_count));
    json rows = json::array();
    for (Index i = 0; i < spec.response_count; ++i) {
      json row = json::array();
      for (Index j = 0; j < spec.response_count; ++j)
        row.push_back(p.covariances[size_t(k)](i, j));
      rows.push_back(std::move(row));
    }
    sigma.push_back(std::move(rows));
  }
  theta["lambda"] = std::move(lambda);
  theta["sigma"] = std::move(sigma);
  return theta;
}

inline Parameters<double> theta_from_json(const json& theta) {
  if (!theta.contains("weights") || !theta.contains("beta") ||
      !theta.contains("lambda") || !theta.contains("sigma"))
    throw ParseError(
        "theta document needs weights, beta, lambda and sigma arrays");
  Parameters<double> p;
  const auto& weights = theta.at("weights");
  p.weights.resize(static_cast<Index>(weights.size()));
  for (size_t k = 0; k < weights.size(); ++k)
    p.weights[static_cast<Index>(k)] = weights[k].get<double>();
  const auto& beta = theta.at("beta");
  p.coefficients.resize(static_cast<Index>(beta.size()));
  for (size_t j = 0; j < beta.size(); ++j)
    p.coefficients[static_cast<Index>(j)] = beta[j].get<double>();
  for (const auto& l : theta.at("lambda")) {
    Vector<double> v(static_cast<Index>(l.size()));
    for (size_t d = 0; d < l.size(); ++d)
      v[static_cast<Index>(d)] = l[d].get<double>();
    p.intercepts.push_back(std::move(v));
  }
  for (const auto& s : theta.at("sigma")) {
    const Index dim = static_cast<Index>(s.size());
    Matrix<double> m(dim, dim);
    for (Index i = 0; i < dim; ++i) {
      if (static_cast<Index>(s[size_t(i)].size()) != dim)
        throw ParseError("theta sigma blocks must be square");
      for (Index j = 0; j < dim; ++j)
        m(i, j) = s[size_t(i)][size_t(j)].get<double>();
    }
    p.covariances.push_back(std::move(m));
  }
  if (p.intercepts.size() != p.covariances.size() ||
      p.intercepts.size() != static_cast<size_t>(p.weights.size()))
    throw ParseError("theta component blocks disagree on component count");
  return p;
}

// Covariances above the diagonal, correlations below, as in the classical
// presentation of a fitted residual covariance.
inline std::string covariance_table(const Matrix<double>& sigma,
                                    const ModelSpec& spec) {
  std::ostringstream out;
  out << detail::pad("", 6);
  for (Index j = 0; j < spec.response_count; ++j)
    out << detail::pad("", 4) << detail::pad(spec.response_name(j), 8);
  out << '\n';
  for (Index i = 0; i < spec.response_count; ++i) {
    out << detail::pad(spec.response_name(i), 6);
    for (Index j = 0; j < spec.response_count; ++j) {
      const double value =
          i <= j ? sigma(i, j)
                 : sigma(i, j) / std::sqrt(sigma(i, i) * sigma(j, j));
      out << detail::fmt(value);
    }
    out << '\n';
  }
  return out.str();
}

inline std::string fit_report_text(
    const FitResult<double>& fit, const ModelSpec& spec, Index observations,
    const InferenceResult<double>* inference = nullptr) {
  std::ostringstream out;
  out << "Model fit\n";
  out << "  observations     " << observations << '\n';
  out << "  responses        " << spec.response_count << " (";
  for (Index d = 0; d < spec.response_count; ++d)
    out << (d ? " " : "") << spec.response_name(d);
  out << ")\n";
  out << "  components       " << spec.component_count << '\n';
  out << "  parameters       " << fit.npar << '\n';
  out << "  log-likelihood   " << detail::fmt(fit.loglik, 0) << '\n';
  out << "  BIC              " << detail::fmt(fit.bic, 0) << '\n';
  out << "  convergence      " << to_string(fit.status) << " after "
      << fit.iterations << " iterations\n";
  out << "  best start       " << fit.start_index + 1 << " of "
      << fit.start_notes.size() << '\n';

  out << "\nComponent weights\n";
  for (Index k = 0; k < spec.component_count; ++k)
    out << "  " << k + 1 << "  " << detail::fmt(fit.parameters.weights[k])
        << '\n';

  for (Index k = 0; k < spec.component_count; ++k) {
    out << "\nComponent " << k + 1 << "\n  intercepts ";
    for (Index d = 0; d < spec.response_count; ++d)
      out << detail::fmt(fit.parameters.intercepts[size_t(k)][d]);
    out << "\n  covariance (upper) and correlation (lower)\n";
    std::istringstream lines(
        covariance_table(fit.parameters.covariances[size_t(k)], spec));
    std::string line;
    while (std::getline(lines, line)) out << "  " << line << '\n';
  }

  if (inference && !inference->coefficients.empty()) {
    char head[160];
    std::snprintf(head, sizeof head, "\nCoefficients (%.10g%% intervals)\n",
                  100.0 * inference->level);
    out << head;
    out << "  " << detail::pad("name", 12) << detail::pad("estimate", 12)
        << detail::pad("se", 12) << detail::pad("lower", 12)
        << detail::pad("upper", 12) << '\n';
    for (size_t j = 0; j < inference->coefficients.size(); ++j) {
      const IntervalEstimate<double>& ci = inference->coefficients[j];
      out << "  " << detail::pad(inference->coefficient_names[j], 12)
          << detail::pad(detail::fmt(ci.point, 0), 12)
          << detail::pad(detail::fmt(ci.se, 0), 12)
          << detail::pad(detail::fmt(ci.lower, 0), 12)
          << detail::pad(detail::fmt(ci.upper, 0), 12) << '\n';
    }
  } else if (spec.coefficient_count() > 0) {
    out << "\nCoefficients\n";
    for (Index j = 0; j < spec.coefficient_count(); ++j)
      out << "  " << detail::pad(spec.coefficient_name(j), 12)
          << detail::fmt(fit.parameters.coefficients[j]) << '\n';
  }
  return out.str();
}

inline json fit_report_json(const FitResult<double>& fit,
                            const ModelSpec& spec, Index observations,
                            const InferenceResult<double>* inference =
                                nullptr) {
  json doc;
  doc["command"] = "fit";
  doc["observations"] = observations;
  doc["responses"] = spec.response_count;
  doc["components"] = spec.component_count;
  json names = json::array();
  for (Index d = 0; d < spec.response_count; ++d)
    names.push_back(spec.response_name(d));
  doc["response_names"] = std::move(names);
  doc["npar"] = fit.npar;
  doc["loglik"] = fit.loglik;
  doc["bic"] = fit.bic;
  doc["status"] = to_string(fit.status);
  doc["iterations"] = fit.iterations;
  doc["start_index"] = fit.start_index;
  doc["start_notes"] = fit.start_notes;
  json regressors = json::array();
  for (Index d = 0; d < spec.response_count; ++d) {
    json eq = json::array();
    for (Index c : spec.equation_regressors[size_t(d)])
      eq.push_back(spec.pool_name(c));
    regressors.push_back(std::move(eq));
  }
  doc["regressors"] = std::move(regressors);
  doc["theta"] = theta_to_json(fit.parameters, spec);
  if (inference) {
    doc["level"] = inference->level;
    json table = json::array();
    for (size_t j = 0; j < inference->coefficients.size(); ++j) {
      const IntervalEstimate<double>& ci = inference->coefficients[j];
      table.push_back({{"name", inference->coefficient_names[j]},
                       {"estimate", ci.point},
                       {"se", ci.se},
                       {"lower", ci.lower},
                       {"upper", ci.upper}});
    }
    doc["coefficients"] = std::move(table);
  }
  return doc;
}

inline std::string crosstab_report_text(const CountTable& counts,
                                        const ChiSquareTest& test,
                                        const std::string& factor_name,
                                        const std::vector<std::string>&
                                            levels) {
  std::ostringstream out;
  out << "Classification against " << factor_name << '\n';
  out << "  " << detail::pad("component", 12);
  for (Index j = 0; j < counts.cols(); ++j)
    out << detail::pad(j < static_cast<Index>(levels.size())
                           ? levels[size_t(j)]
                           : "level" + std::to_string(j + 1),
                       10);
  out << detail::pad("total", 10) << '\n';
  for (Index i = 0; i < counts.rows(); ++i) {
    out << "  " << detail::pad(std::to_string(i + 1), 12);
    for (Index j = 0; j < counts.cols(); ++j)
      out << detail::pad(std::to_string(counts(i, j)), 10);
    out << detail::pad(std::to_string(counts.row(i).sum()), 10) << '\n';
  }
  out << "  " << detail::pad("total", 12);
  for (Index j = 0; j < counts.cols(); ++j)
    out << detail::pad(std::to_string(counts.col(j).sum()), 10);
  out << detail::pad(std::to_string(counts.sum()), 10) << '\n';
  char tail[160];
  std::snprintf(tail, sizeof tail,
                "  chi-squared %.6g on %lld df, p-value %.6g\n",
                test.statistic, static_cast<long long>(test.df),
                test.p_value);
  out << tail;
  return out.str();
}

inline json crosstab_report_json(const CountTable& counts,
                                 const ChiSquareTest& test,
                                 const std::string& factor_name,
                                 const std::vector<std::string>& levels) {
  json doc;
  doc["factor"] = factor_name;
  doc["levels"] = levels;
  json rows = json::array();
  for (Index i = 0; i < counts.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < counts.cols(); ++j) row.push_back(counts(i, j));
    rows.push_back(std::move(row));
  }
  doc["counts"] = std::move(rows);
  doc["chi_square"] = test.statistic;
  doc["df"] = test.df;
  doc["p_value"] = test.p_value;
  return doc;
}

inline std::string grid_to_csv(const SearchGrid<double>& grid) {
  std::ostringstream out;
  out << "K,P,regressor_mask,loglik,npar,bic,status\n";
  for (const auto& cell : grid.cells) {
    std::string status = cell.status;
    std::string quoted = "\"";
    for (char c : status) {
      if (c == '"') quoted += "\"\"";
      else quoted += c;
    }
    quoted += '"';
    out << cell.components << ',' << cell.coefficient_count << ','
        << cell.mask << ',' << format_full(cell.loglik) << ',' << cell.npar
        << ',' << format_full(cell.bic) << ',' << quoted << '\n';
  }
  return out.str();
}

inline std::string grid_report_text(const SearchGrid<double>& grid,
                                    const ModelSpec& base) {
  Index successes = 0;
  for (const auto& cell : grid.cells)
    if (cell.ok) ++successes;
  const auto& best = grid.cells[size_t(grid.best_index)];

  std::ostringstream out;
  out << "Model search\n";
  out << "  cells            " << grid.cells.size() << '\n';
  out << "  successful       " << successes << '\n';
  out << "  best             K=" << best.components << " P="
      << best.coefficient_count << " mask=" << best.mask << " npar="
      << best.npar << " bic=" << detail::fmt(best.bic, 0) << '\n';
  out << "  best regressors  ";
  bool any = false;
  for (Index d = 0; d < base.response_count; ++d) {
    const auto& eq = grid.best_spec.equation_regressors[size_t(d)];
    if (eq.empty()) continue;
    if (any) out << "; ";
    out << grid.best_spec.response_name(d) << " ~ ";
    for (size_t j = 0; j < eq.size(); ++j)
      out << (j ? " + " : "") << grid.best_spec.pool_name(eq[j]);
    any = true;
  }
  if (!any) out << "(intercept only)";
  out << '\n';

  // Best BIC for each component count and total regressor usage.
  std::vector<Index> k_seen, p_seen;
  for (const auto& cell : grid.cells) {
    if (std::find(k_seen.begin(), k_seen.end(), cell.components) ==
        k_seen.end())
      k_seen.push_back(cell.components);
    if (std::find(p_seen.begin(), p_seen.end(), cell.coefficient_count) ==
        p_seen.end())
      p_seen.push_back(cell.coefficient_count);
  }
  std::sort(k_seen.begin(), k_seen.end());
  std::sort(p_seen.begin(), p_seen.end());

  out << "\nBest BIC by P (rows) and K (columns)\n  " << detail::pad("P", 5);
  for (Index k : k_seen)
    out << detail::pad("K=" + std::to_string(k), 14);
  out << '\n';
  for (Index p : p_seen) {
    out << "  " << detail::pad(std::to_string(p), 5);
    for (Index k : k_seen) {
      double top = std::numeric_limits<double>::quiet_NaN();
      bool starred = false;
      for (const auto& cell : grid.cells) {
        if (!cell.ok || cell.components != k ||
            cell.coefficient_count != p)
          continue;
        if (std::isnan(top) || cell.bic > top) top = cell.bic;
      }
      if (best.components == k && best.coefficient_count == p &&
          !std::isnan(top) && top == best.bic)
        starred = true;
      std::string text = std::isnan(top) ? "-" : detail::fmt(top, 0);
      if (starred) text += "*";
      out << detail::pad(text, 14);
    }
    out << '\n';
  }
  return out.str();
}

inline json grid_report_json(const SearchGrid<double>& grid,
                             Index observations,
                             const InferenceResult<double>* inference =
                                 nullptr) {
  json doc;
  doc["command"] = "select";
  json cells = json::array();
  for (const auto& cell : grid.cells)
    cells.push_back({{"k", cell.components},
                     {"p", cell.coefficient_count},
                     {"mask", cell.mask},
                     {"loglik", cell.loglik},
                     {"npar", cell.npar},
                     {"bic", cell.bic},
                     {"ok", cell.ok},
                     {"status", cell.status},
                     {"iterations", cell.iterations}});
  doc["cells"] = std::move(cells);
  doc["best_index"] = grid.best_index;
  json best = fit_report_json(grid.best_fit, grid.best_spec, observations,
                              inference);
  best.erase("command");
  doc["best"] = std::move(best);
  // The round-trip block: loglik, npar and observations reproduce bic.
  doc["observations"] = observations;
  doc["loglik"] = grid.best_fit.loglik;
  doc["npar"] = grid.best_fit.npar;
  doc["bic"] = grid.best_fit.bic;
  return doc;
}

inline std::string replicates_to_csv(const BootstrapResult<double>& boot,
                                     const ModelSpec& spec) {
  std::ostringstream out;
  for (Index j = 0; j < spec.coefficient_count(); ++j)
    out << (j ? "," : "") << spec.coefficient_name(j);
  out << '\n';
  for (Index b = 0; b < boot.replicates.rows(); ++b) {
    for (Index j = 0; j < boot.replicates.cols(); ++j)
      out << (j ? "," : "") << format_full(boot.replicates(b, j));
    out << '\n';
  }
  return out.str();
}

inline std::string bootstrap_report_text(
    const BootstrapResult<double>& boot, const ModelSpec& spec,
    const Vector<double>& estimates, double level) {
  std::ostringstream out;
  out << "Parametric bootstrap\n";
  out << "  requested        " << boot.requested << '\n';
  out << "  successful       " << boot.successes() << '\n';
  out << "  failed           " << boot.failed_replicates.size();
  if (!boot.failed_replicates.empty()) {
    out << " (replicates";
    for (size_t f = 0; f < boot.failed_replicates.size() && f < 10; ++f)
      out << ' ' << boot.failed_replicates[f];
    if (boot.failed_replicates.size() > 10) out << " ...";
    out << ')';
  }
  out << '\n';
  if (boot.successes() >= 2 && spec.coefficient_count() > 0) {
    char head[160];
    std::snprintf(head, sizeof head,
                  "\nCoefficient replicates (%.10g%% percentile intervals)\n",
                  100.0 * level);
    out << head;
    out << "  " << detail::pad("name", 12) << detail::pad("estimate", 12)
        << detail::pad("mean", 12) << detail::pad("sd", 12)
        << detail::pad("bias ratio", 12) << detail::pad("lower", 12)
        << detail::pad("upper", 12) << '\n';
    for (Index j = 0; j < spec.coefficient_count(); ++j) {
      const Vector<double> draws = boot.replicates.col(j);
      const BootstrapSummary<double> s =
          bootstrap_summary(draws, estimates[j]);
      const PercentileInterval<double> ci = percentile_ci(draws, level);
      out << "  " << detail::pad(spec.coefficient_name(j), 12)
          << detail::pad(detail::fmt(estimates[j], 0), 12)
          << detail::pad(detail::fmt(s.mean, 0), 12)
          << detail::pad(detail::fmt(s.sd, 0), 12)
          << detail::pad(detail::fmt(s.bias_ratio, 0), 12)
          << detail::pad(detail::fmt(ci.lower, 0), 12)
          << detail::pad(detail::fmt(ci.upper, 0), 12) << '\n';
    }
  }
  return out.str();
}

inline json bootstrap_report_json(const BootstrapResult<double>& boot,
                                  const ModelSpec& spec,
                                  const Vector<double>& estimates,
                                  double level) {
  json doc;
  doc["command"] = "bootstrap";
  doc["requested"] = boot.requested;
  doc["successes"] = boot.successes();
  json failures = json::array();
  for (size_t f = 0; f < boot.failed_replicates.size(); ++f)
    failures.push_back({{"replicate", boot.failed_replicates[f]},
                        {"reason", boot.failure_reasons[f]}});
  doc["failures"] = std::move(failures);
  doc["level"] = level;
  json table = json::array();
  if (boot.successes() >= 2)
    for (Index j = 0; j < spec.coefficient_count(); ++j) {
      const Vector<double> draws = boot.replicates.col(j);
      const BootstrapSummary<double> s =
          bootstrap_summary(draws, estimates[j]);
      const PercentileInterval<double> ci = percentile_ci(draws, level);
      table.push_back({{"name", spec.coefficient_name(j)},
                       {"estimate", estimates[j]},
                       {"mean", s.mean},
                       {"sd", s.sd},
                       {"bias", s.bias},
                       {"bias_ratio", s.bias_ratio},
                       {"lower", ci.lower},
                       {"upper", ci.upper}});
    }
  doc["coefficients"] = std::move(table);
  return doc;
}

}  // namespace mixsur
