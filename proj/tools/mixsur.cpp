// mixsur: fits seemingly unrelated regressions with Gaussian-mixture errors.
//
// Subcommands: fit, select, bootstrap, simulate, gradcheck.  A JSON config
// file (--config) supplies the same fields as the flags; explicit flags win.
// Human-readable output goes to stdout; with --out DIR each command also
// writes report.txt plus a machine-readable report.json (and, where it
// applies, bic_grid.csv / replicates.csv / simulated.csv).
//
// Exit codes: 0 success, 1 usage or input problems (bad flags, missing
// columns, parse failures, refused enumerations), 2 numerical failures
// (no EM start converged, singular systems, degenerate tables, a failed
// derivative check).

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mixsur/csv.hpp"
#include "mixsur/design.hpp"
#include "mixsur/em.hpp"
#include "mixsur/fdcheck.hpp"
#include "mixsur/inference.hpp"
#include "mixsur/report.hpp"
#include "mixsur/simboot.hpp"

namespace fs = std::filesystem;
using namespace mixsur;

namespace {

struct RunConfig {
  std::string data;
  std::string delimiter;  // empty = auto-detect
  std::vector<std::string> responses;
  std::vector<std::vector<std::string>> regressors;
  std::vector<std::string> candidates;
  Index k = 1;
  Index k_lo = 0, k_hi = 0;  // 0 = no range given
  int max_iter = 500;
  double tol = 1e-8;
  int inner_max_iter = 500;
  double inner_tol = 1e-8;
  int starts = 1;
  std::uint64_t seed = 0;
  Index bootstrap_b = 200;
  double level = 0.95;
  std::string out;
  bool slow = false;
  bool deny_unidentifiable = false;
  int threads = 1;
  std::string factor;
  std::string theta;
  Index n = 100;  // simulate row count when no regressors are bound
  double score_tol = 1e-6;
  double hessian_tol = 1e-5;
};

// Raw flag values; copied into RunConfig only for flags the user passed,
// so config-file values survive unless explicitly overridden.
struct FlagValues {
  std::string config, data, delimiter, responses, regressors, candidates;
  std::string k_range, out, factor, theta;
  Index k = 1, bootstrap_b = 200, n = 100;
  int max_iter = 500, inner_max_iter = 500, starts = 1, threads = 1;
  double tol = 1e-8, inner_tol = 1e-8, level = 0.95;
  double score_tol = 1e-6, hessian_tol = 1e-5;
  std::uint64_t seed = 0;
  bool slow = false, deny = false;
};

std::string trim(const std::string& text) {
  size_t first = text.find_first_not_of(" \t");
  if (first == std::string::npos) return "";
  size_t last = text.find_last_not_of(" \t");
  return text.substr(first, last - first + 1);
}

// Split keeping empty segments so "a;;b" names three equations.
std::vector<std::string> split_keep(const std::string& text, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = text.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> parse_name_list(const std::string& text) {
  std::vector<std::string> names;
  for (const std::string& raw : split_keep(text, ',')) {
    const std::string name = trim(raw);
    if (!name.empty()) names.push_back(name);
  }
  return names;
}

std::vector<std::vector<std::string>> parse_equation_lists(
    const std::string& text) {
  std::vector<std::vector<std::string>> lists;
  if (trim(text).empty()) return lists;
  for (const std::string& segment : split_keep(text, ';'))
    lists.push_back(parse_name_list(segment));
  return lists;
}

std::pair<Index, Index> parse_k_range(const std::string& text) {
  const size_t colon = text.find(':');
  if (colon == std::string::npos)
    throw InvalidArgument("--k-range expects LO:HI, got '" + text + "'");
  Index lo = 0, hi = 0;
  try {
    lo = static_cast<Index>(std::stoll(trim(text.substr(0, colon))));
    hi = static_cast<Index>(std::stoll(trim(text.substr(colon + 1))));
  } catch (const std::exception&) {
    throw InvalidArgument("--k-range expects LO:HI, got '" + text + "'");
  }
  if (lo < 1 || hi < lo)
    throw InvalidArgument("--k-range needs 1 <= LO <= HI, got '" + text + "'");
  return {lo, hi};
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("config '" + path + "': " + e.what());
  }
  try {
    if (doc.contains("data")) cfg.data = doc["data"].get<std::string>();
    if (doc.contains("delimiter"))
      cfg.delimiter = doc["delimiter"].get<std::string>();
    if (doc.contains("responses"))
      cfg.responses = doc["responses"].get<std::vector<std::string>>();
    if (doc.contains("regressors"))
      cfg.regressors =
          doc["regressors"].get<std::vector<std::vector<std::string>>>();
    if (doc.contains("candidates"))
      cfg.candidates = doc["candidates"].get<std::vector<std::string>>();
    if (doc.contains("k")) cfg.k = doc["k"].get<Index>();
    if (doc.contains("k_range")) {
      const auto range = doc["k_range"].get<std::vector<Index>>();
      if (range.size() != 2 || range[0] < 1 || range[1] < range[0])
        throw ParseError("config: k_range must be [lo, hi] with 1 <= lo <= hi");
      cfg.k_lo = range[0];
      cfg.k_hi = range[1];
    }
    if (doc.contains("max_iter")) cfg.max_iter = doc["max_iter"].get<int>();
    if (doc.contains("tol")) cfg.tol = doc["tol"].get<double>();
    if (doc.contains("inner_max_iter"))
      cfg.inner_max_iter = doc["inner_max_iter"].get<int>();
    if (doc.contains("inner_tol"))
      cfg.inner_tol = doc["inner_tol"].get<double>();
    if (doc.contains("starts")) cfg.starts = doc["starts"].get<int>();
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("bootstrap_b"))
      cfg.bootstrap_b = doc["bootstrap_b"].get<Index>();
    if (doc.contains("level")) cfg.level = doc["level"].get<double>();
    if (doc.contains("out")) cfg.out = doc["out"].get<std::string>();
    if (doc.contains("slow")) cfg.slow = doc["slow"].get<bool>();
    if (doc.contains("deny_unidentifiable"))
      cfg.deny_unidentifiable = doc["deny_unidentifiable"].get<bool>();
    if (doc.contains("threads")) cfg.threads = doc["threads"].get<int>();
    if (doc.contains("factor")) cfg.factor = doc["factor"].get<std::string>();
    if (doc.contains("theta")) cfg.theta = doc["theta"].get<std::string>();
    if (doc.contains("n")) cfg.n = doc["n"].get<Index>();
    if (doc.contains("score_tol"))
      cfg.score_tol = doc["score_tol"].get<double>();
    if (doc.contains("hessian_tol"))
      cfg.hessian_tol = doc["hessian_tol"].get<double>();
  } catch (const json::exception& e) {
    throw ParseError("config '" + path + "': " + e.what());
  }
}

bool passed(const CLI::App* cmd, const std::string& name) {
  const CLI::Option* opt = cmd->get_option_no_throw(name);
  return opt && opt->count() > 0;
}

void apply_flags(RunConfig& cfg, const CLI::App* cmd, const FlagValues& f) {
  if (passed(cmd, "--data")) cfg.data = f.data;
  if (passed(cmd, "--delimiter")) cfg.delimiter = f.delimiter;
  if (passed(cmd, "--responses")) cfg.responses = parse_name_list(f.responses);
  if (passed(cmd, "--regressors"))
    cfg.regressors = parse_equation_lists(f.regressors);
  if (passed(cmd, "--candidates"))
    cfg.candidates = parse_name_list(f.candidates);
  if (passed(cmd, "--k")) cfg.k = f.k;
  if (passed(cmd, "--k-range")) {
    const auto range = parse_k_range(f.k_range);
    cfg.k_lo = range.first;
    cfg.k_hi = range.second;
  }
  if (passed(cmd, "--max-iter")) cfg.max_iter = f.max_iter;
  if (passed(cmd, "--tol")) cfg.tol = f.tol;
  if (passed(cmd, "--inner-max-iter")) cfg.inner_max_iter = f.inner_max_iter;
  if (passed(cmd, "--inner-tol")) cfg.inner_tol = f.inner_tol;
  if (passed(cmd, "--starts")) cfg.starts = f.starts;
  if (passed(cmd, "--seed")) cfg.seed = f.seed;
  if (passed(cmd, "--bootstrap-b")) cfg.bootstrap_b = f.bootstrap_b;
  if (passed(cmd, "--level")) cfg.level = f.level;
  if (passed(cmd, "--out")) cfg.out = f.out;
  if (passed(cmd, "--slow")) cfg.slow = f.slow;
  if (passed(cmd, "--deny-unidentifiable"))
    cfg.deny_unidentifiable = f.deny;
  if (passed(cmd, "--threads")) cfg.threads = f.threads;
  if (passed(cmd, "--factor")) cfg.factor = f.factor;
  if (passed(cmd, "--theta")) cfg.theta = f.theta;
  if (passed(cmd, "--n")) cfg.n = f.n;
  if (passed(cmd, "--score-tol")) cfg.score_tol = f.score_tol;
  if (passed(cmd, "--hessian-tol")) cfg.hessian_tol = f.hessian_tol;
}

char delimiter_from(const RunConfig& cfg) {
  if (cfg.delimiter.empty()) return '\0';
  if (cfg.delimiter == "\\t" || cfg.delimiter == "tab") return '\t';
  if (cfg.delimiter.size() == 1) return cfg.delimiter[0];
  throw InvalidArgument("--delimiter must be a single character (or 'tab')");
}

TextTable load_table(const RunConfig& cfg) {
  if (cfg.data.empty())
    throw InvalidArgument("no input file given (--data or config \"data\")");
  return read_delimited_file(cfg.data, delimiter_from(cfg));
}

Dataset<double> load_dataset(const RunConfig& cfg, const TextTable& table,
                             Index components) {
  if (cfg.responses.empty())
    throw InvalidArgument(
        "no response columns bound (--responses or config \"responses\")");
  return ingest(table, ColumnBindings{cfg.responses, cfg.regressors},
                components);
}

EmControls<double> em_controls(const RunConfig& cfg) {
  EmControls<double> controls;
  controls.max_iterations = cfg.max_iter;
  controls.tolerance = cfg.tol;
  controls.inner_max_iterations = cfg.inner_max_iter;
  controls.inner_tolerance = cfg.inner_tol;
  controls.starts = cfg.starts;
  controls.seed = cfg.seed;
  return controls;
}

void gate_identifiability(const Dataset<double>& data, const ModelSpec& spec,
                          bool deny) {
  const IdentifiabilityReport report = check_identifiability(data, spec);
  if (report.ok()) return;
  std::cerr << (deny ? "mixsur: error: " : "mixsur: warning: ")
            << "model is not identified\n"
            << report.to_string(spec);
  if (deny)
    throw InvalidArgument(
        "identifiability violations denied (--deny-unidentifiable)");
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  out << content;
  out.flush();
  if (!out) throw InvalidArgument("write failed for '" + path.string() + "'");
}

fs::path ensure_out_dir(const RunConfig& cfg) {
  const fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw InvalidArgument("cannot create output directory '" + cfg.out +
                          "': " + ec.message());
  return dir;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

// Accepts either a bare theta document or a fit report carrying one.
Parameters<double> theta_from_file(const json& doc) {
  return theta_from_json(doc.contains("theta") ? doc["theta"] : doc);
}

// Asymptotic intervals are a report garnish; a singular information matrix
// should not take the whole fit down with it.
bool try_inference(const FitResult<double>& fit_result,
                   const Dataset<double>& data, const ModelSpec& spec,
                   double level, InferenceResult<double>& inference) {
  if (spec.coefficient_count() == 0) return false;
  try {
    inference =
        coefficient_inference(fit_result.parameters, data, spec, level);
    return true;
  } catch (const Error& e) {
    std::cerr << "mixsur: warning: interval computation failed: " << e.what()
              << "\n";
    return false;
  }
}

// --- commands -----------------------------------------------------------------

int cmd_fit(const RunConfig& cfg) {
  const TextTable table = load_table(cfg);
  const Dataset<double> data = load_dataset(cfg, table, cfg.k);
  gate_identifiability(data, data.active, cfg.deny_unidentifiable);

  const FitResult<double> result = fit(data, em_controls(cfg));
  InferenceResult<double> inference;
  const bool have_inference =
      try_inference(result, data, data.active, cfg.level, inference);

  std::string text =
      fit_report_text(result, data.active, data.observation_count(),
                      have_inference ? &inference : nullptr);
  json doc = fit_report_json(result, data.active, data.observation_count(),
                             have_inference ? &inference : nullptr);
  doc["seed"] = cfg.seed;

  if (!cfg.factor.empty()) {
    const FactorColumn factor = read_factor(table, cfg.factor);
    const std::vector<Index> assignment = classify(result.posteriors);
    const CountTable counts = crosstab(assignment, factor.codes);
    const ChiSquareTest test = chi_square_independence(counts);
    text += "\n" + crosstab_report_text(counts, test, cfg.factor,
                                        factor.levels);
    doc["crosstab"] =
        crosstab_report_json(counts, test, cfg.factor, factor.levels);
  }

  std::cout << text;
  if (!cfg.out.empty()) {
    const fs::path dir = ensure_out_dir(cfg);
    write_file(dir / "report.txt", text);
    write_file(dir / "report.json", dump_full(doc));
  }
  return 0;
}

int cmd_select(const RunConfig& cfg) {
  const TextTable table = load_table(cfg);
  Dataset<double> data = load_dataset(cfg, table, 1);

  // Candidate columns join the pool after the always-in regressors; a name
  // already bound to some equation reuses its existing pool slot.
  std::vector<Index> candidates;
  for (const std::string& name : cfg.candidates) {
    Index slot = -1;
    for (size_t j = 0; j < data.active.pool_names.size(); ++j)
      if (data.active.pool_names[j] == name) slot = static_cast<Index>(j);
    if (slot < 0) {
      const Index column = table.column(name);
      if (column < 0)
        throw MissingColumn(name, "column '" + name + "' not found");
      slot = data.pool.cols();
      data.pool.conservativeResize(Eigen::NoChange, slot + 1);
      for (Index i = 0; i < data.pool.rows(); ++i)
        data.pool(i, slot) = detail::parse_double(
            table.rows[size_t(i)][size_t(column)], i + 1, name);
      data.active.pool_names.push_back(name);
    }
    candidates.push_back(slot);
  }

  std::vector<Index> k_values;
  if (cfg.k_lo > 0)
    for (Index k = cfg.k_lo; k <= cfg.k_hi; ++k) k_values.push_back(k);
  else
    k_values.push_back(cfg.k);

  // Every cell's design is a column subset of the fully augmented one, so
  // one rank check on the largest model covers the whole grid.
  ModelSpec full = data.active;
  for (auto& equation : full.equation_regressors)
    for (Index c : candidates)
      if (std::find(equation.begin(), equation.end(), c) == equation.end())
        equation.push_back(c);
  gate_identifiability(data, full, cfg.deny_unidentifiable);

  const Index bits =
      data.active.response_count * static_cast<Index>(candidates.size());
  if (bits <= 20) {
    const std::uint64_t cells =
        (std::uint64_t(1) << bits) * k_values.size();
    if (cells > 1024 && !cfg.slow)
      throw InvalidArgument("search would fit " + std::to_string(cells) +
                            " models; pass --slow to run it");
  }

  const SearchGrid<double> grid = search(data, data.active, candidates,
                                         k_values, em_controls(cfg),
                                         cfg.threads);

  InferenceResult<double> inference;
  const bool have_inference = try_inference(
      grid.best_fit, data, grid.best_spec, cfg.level, inference);

  std::string text = grid_report_text(grid, data.active);
  text += "\n" + fit_report_text(grid.best_fit, grid.best_spec,
                                 data.observation_count(),
                                 have_inference ? &inference : nullptr);
  json doc = grid_report_json(grid, data.observation_count(),
                              have_inference ? &inference : nullptr);
  doc["seed"] = cfg.seed;

  std::cout << text;
  if (!cfg.out.empty()) {
    const fs::path dir = ensure_out_dir(cfg);
    write_file(dir / "report.txt", text);
    write_file(dir / "report.json", dump_full(doc));
    write_file(dir / "bic_grid.csv", grid_to_csv(grid));
  }
  return 0;
}

int cmd_bootstrap(const RunConfig& cfg) {
  if (cfg.bootstrap_b > 1000 && !cfg.slow)
    throw InvalidArgument("--bootstrap-b " + std::to_string(cfg.bootstrap_b) +
                          " needs --slow");
  const TextTable table = load_table(cfg);
  const Dataset<double> data = load_dataset(cfg, table, cfg.k);
  gate_identifiability(data, data.active, cfg.deny_unidentifiable);

  const FitResult<double> base = fit(data, em_controls(cfg));

  // Replicates start at the base estimate; extra starts remain random.
  EmControls<double> replicate_controls = em_controls(cfg);
  replicate_controls.initialization = InitStrategy::User;
  replicate_controls.initial = base.parameters;
  const BootstrapResult<double> boot =
      parametric_bootstrap(base.parameters, data, data.active,
                           cfg.bootstrap_b, replicate_controls, cfg.seed,
                           cfg.threads);

  std::string text = fit_report_text(base, data.active,
                                     data.observation_count(), nullptr);
  text += "\n" + bootstrap_report_text(boot, data.active,
                                       base.parameters.coefficients,
                                       cfg.level);
  json doc = bootstrap_report_json(boot, data.active,
                                   base.parameters.coefficients, cfg.level);
  doc["seed"] = cfg.seed;
  json base_doc = fit_report_json(base, data.active,
                                  data.observation_count(), nullptr);
  base_doc.erase("command");
  doc["base"] = std::move(base_doc);

  std::cout << text;
  if (!cfg.out.empty()) {
    const fs::path dir = ensure_out_dir(cfg);
    write_file(dir / "report.txt", text);
    write_file(dir / "report.json", dump_full(doc));
    write_file(dir / "replicates.csv", replicates_to_csv(boot, data.active));
  }
  if (boot.successes() == 0) {
    std::cerr << "mixsur: error: every bootstrap replicate failed\n";
    return 2;
  }
  return 0;
}

int cmd_simulate(const RunConfig& cfg) {
  if (cfg.theta.empty())
    throw InvalidArgument("simulate needs --theta FILE (or config \"theta\")");
  const json doc = read_json_file(cfg.theta);
  const Parameters<double> p = theta_from_file(doc);
  if (p.intercepts.empty())
    throw InvalidArgument("theta document has no components");
  const Index dim = p.intercepts[0].size();

  std::vector<std::string> response_names = cfg.responses;
  if (response_names.empty() && doc.contains("response_names"))
    response_names = doc["response_names"].get<std::vector<std::string>>();
  std::vector<std::vector<std::string>> regressors = cfg.regressors;
  if (regressors.empty() && doc.contains("regressors"))
    regressors =
        doc["regressors"].get<std::vector<std::vector<std::string>>>();

  ModelSpec spec;
  spec.response_count = dim;
  spec.component_count = p.component_count();
  if (!response_names.empty()) {
    if (static_cast<Index>(response_names.size()) != dim)
      throw InvalidArgument("response names do not match theta dimension");
    spec.response_names = response_names;
  }
  if (!regressors.empty() &&
      static_cast<Index>(regressors.size()) != dim)
    throw InvalidArgument("regressor bindings must cover every equation");

  // Pool slots in first-use order, shared across equations by name.
  for (Index d = 0; d < dim; ++d) {
    std::vector<Index> equation;
    if (!regressors.empty())
      for (const std::string& name : regressors[size_t(d)]) {
        Index slot = -1;
        for (size_t j = 0; j < spec.pool_names.size(); ++j)
          if (spec.pool_names[j] == name) slot = static_cast<Index>(j);
        if (slot < 0) {
          slot = static_cast<Index>(spec.pool_names.size());
          spec.pool_names.push_back(name);
        }
        equation.push_back(slot);
      }
    spec.equation_regressors.push_back(std::move(equation));
  }

  Matrix<double> pool;
  if (spec.pool_names.empty()) {
    if (cfg.n < 1) throw InvalidArgument("--n must be at least 1");
    pool.resize(cfg.n, 0);
  } else {
    const TextTable table = load_table(cfg);
    pool.resize(static_cast<Index>(table.rows.size()),
                static_cast<Index>(spec.pool_names.size()));
    for (size_t j = 0; j < spec.pool_names.size(); ++j) {
      const std::string& name = spec.pool_names[j];
      const Index column = table.column(name);
      if (column < 0)
        throw MissingColumn(name, "column '" + name + "' not found");
      for (Index i = 0; i < pool.rows(); ++i)
        pool(i, static_cast<Index>(j)) = detail::parse_double(
            table.rows[size_t(i)][size_t(column)], i + 1, name);
    }
  }

  std::vector<Index> labels;
  Dataset<double> sample;
  sample.responses = simulate(p, pool, spec, cfg.seed, &labels);
  sample.pool = std::move(pool);
  sample.active = spec;

  std::ostringstream csv;
  write_dataset_csv(csv, sample, spec, &labels);
  if (cfg.out.empty()) {
    std::cout << csv.str();
  } else {
    const fs::path dir = ensure_out_dir(cfg);
    write_file(dir / "simulated.csv", csv.str());
    std::cout << "simulated " << sample.observation_count() << " rows, "
              << dim << " responses to " << (dir / "simulated.csv").string()
              << "\n";
  }
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg) {
  const TextTable table = load_table(cfg);
  const Dataset<double> data = load_dataset(cfg, table, cfg.k);
  gate_identifiability(data, data.active, cfg.deny_unidentifiable);

  Parameters<double> at;
  std::string source;
  if (!cfg.theta.empty()) {
    at = theta_from_file(read_json_file(cfg.theta));
    source = cfg.theta;
  } else {
    at = fit(data, em_controls(cfg)).parameters;
    source = "the fitted estimate";
  }

  const GradientCheck<double> check = gradient_check(at, data, data.active);
  const bool score_ok = check.score_error < cfg.score_tol;
  const bool hessian_ok = check.hessian_error < cfg.hessian_tol;

  std::ostringstream text;
  text << "Derivative check at " << source << "\n";
  char line[160];
  std::snprintf(line, sizeof line, "  %-8s  max rel error %.3e  tolerance %.1e  %s\n",
                "score", check.score_error, cfg.score_tol,
                score_ok ? "PASS" : "FAIL");
  text << line;
  std::snprintf(line, sizeof line, "  %-8s  max rel error %.3e  tolerance %.1e  %s\n",
                "hessian", check.hessian_error, cfg.hessian_tol,
                hessian_ok ? "PASS" : "FAIL");
  text << line;

  json doc;
  doc["command"] = "gradcheck";
  doc["score_error"] = check.score_error;
  doc["hessian_error"] = check.hessian_error;
  doc["score_tol"] = cfg.score_tol;
  doc["hessian_tol"] = cfg.hessian_tol;
  doc["pass"] = score_ok && hessian_ok;
  doc["seed"] = cfg.seed;

  std::cout << text.str();
  if (!cfg.out.empty()) {
    const fs::path dir = ensure_out_dir(cfg);
    write_file(dir / "report.txt", text.str());
    write_file(dir / "report.json", dump_full(doc));
  }
  return score_ok && hessian_ok ? 0 : 2;
}

void add_options(CLI::App* cmd, FlagValues& f) {
  cmd->add_option("--data", f.data,
                  "input file, delimited text with a header row");
  cmd->add_option("--config", f.config,
                  "JSON config file; explicit flags override it");
  cmd->add_option("--delimiter", f.delimiter,
                  "field delimiter (default: auto among , ; tab)");
  cmd->add_option("--responses", f.responses,
                  "comma-separated response column names");
  cmd->add_option("--regressors", f.regressors,
                  "regressor columns per equation: ';' between equations, "
                  "',' within");
  cmd->add_option("--candidates", f.candidates,
                  "comma-separated candidate columns for select");
  cmd->add_option("--k", f.k, "mixture component count");
  cmd->add_option("--k-range", f.k_range, "inclusive K range LO:HI");
  cmd->add_option("--max-iter", f.max_iter, "EM iteration cap");
  cmd->add_option("--tol", f.tol, "EM stopping tolerance");
  cmd->add_option("--inner-max-iter", f.inner_max_iter, "M-step pass cap");
  cmd->add_option("--inner-tol", f.inner_tol, "M-step stopping tolerance");
  cmd->add_option("--starts", f.starts,
                  "EM starts: first deterministic, rest random");
  cmd->add_option("--seed", f.seed, "PRNG seed");
  cmd->add_option("--bootstrap-b", f.bootstrap_b, "bootstrap replicates");
  cmd->add_option("--level", f.level, "interval confidence level");
  cmd->add_option("--out", f.out, "directory for report files");
  cmd->add_flag("--slow", f.slow, "allow large grids and B > 1000");
  cmd->add_flag("--deny-unidentifiable", f.deny,
                "make identifiability violations fatal");
  cmd->add_option("--threads", f.threads,
                  "worker threads for select and bootstrap");
  cmd->add_option("--factor", f.factor,
                  "factor column to cross-tabulate against components");
  cmd->add_option("--theta", f.theta,
                  "parameter JSON: a fit report or bare theta document");
  cmd->add_option("--n", f.n,
                  "rows to simulate when no regressors are bound");
  cmd->add_option("--score-tol", f.score_tol, "gradcheck score tolerance");
  cmd->add_option("--hessian-tol", f.hessian_tol,
                  "gradcheck Hessian tolerance");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seemingly unrelated regressions with Gaussian-mixture errors"};
  app.require_subcommand(1);
  FlagValues f;

  CLI::App* c_fit = app.add_subcommand("fit", "fit one model by EM");
  CLI::App* c_select =
      app.add_subcommand("select", "BIC search over regressor subsets and K");
  CLI::App* c_boot =
      app.add_subcommand("bootstrap", "fit, then parametric bootstrap");
  CLI::App* c_sim =
      app.add_subcommand("simulate", "draw a dataset from a theta document");
  CLI::App* c_grad =
      app.add_subcommand("gradcheck", "finite-difference derivative check");
  for (CLI::App* cmd : {c_fit, c_select, c_boot, c_sim, c_grad})
    add_options(cmd, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  CLI::App* cmd = app.get_subcommands().front();
  try {
    RunConfig cfg;
    if (passed(cmd, "--config")) apply_config_file(cfg, f.config);
    apply_flags(cfg, cmd, f);
    if (cmd == c_fit) return cmd_fit(cfg);
    if (cmd == c_select) return cmd_select(cfg);
    if (cmd == c_boot) return cmd_bootstrap(cfg);
    if (cmd == c_sim) return cmd_simulate(cfg);
    return cmd_gradcheck(cfg);
  } catch (const InvalidArgument& e) {
    std::cerr << "mixsur: " << e.what() << "\n";
    return 1;
  } catch (const MissingColumn& e) {
    std::cerr << "mixsur: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "mixsur: " << e.what() << "\n";
    return 1;
  } catch (const EmptyData& e) {
    std::cerr << "mixsur: " << e.what() << "\n";
    return 1;
  } catch (const EnumerationTooLarge& e) {
    std::cerr << "mixsur: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "mixsur: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mixsur: " << e.what() << "\n";
    return 1;
  }
}
