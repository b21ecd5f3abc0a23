#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "mixsur/csv.hpp"
#include "mixsur/em.hpp"
#include "mixsur/simboot.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace mixsur;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "mixsur_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

RunResult run_cli(const std::string& args) {
  static int call = 0;
  const fs::path out_path = work_dir() / ("stdout" + std::to_string(call));
  const fs::path err_path = work_dir() / ("stderr" + std::to_string(call));
  ++call;
  const std::string command = std::string("\"") + MIXSUR_CLI_PATH + "\" " +
                              args + " >" + out_path.string() + " 2>" +
                              err_path.string();
  const int status = std::system(command.c_str());
  RunResult result;
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  return result;
}

// A well separated two-component dataset shared by most cases, written
// once through the library's own CSV writer.
const fs::path& toy_csv() {
  static const fs::path path = [] {
    ModelSpec spec;
    spec.response_count = 2;
    spec.component_count = 2;
    spec.equation_regressors = {{0}, {1}};
    spec.response_names = {"y1", "y2"};
    spec.pool_names = {"x1", "x2"};

    Parameters<double> p;
    p.weights = Vector<double>(2);
    p.weights << 0.6, 0.4;
    p.coefficients = Vector<double>(2);
    p.coefficients << 1.2, -0.7;
    p.intercepts = {Vector<double>::Zero(2), Vector<double>(2)};
    p.intercepts[1] << 6.0, -5.0;
    p.covariances = {Matrix<double>::Identity(2, 2),
                     Matrix<double>::Identity(2, 2)};

    std::mt19937_64 rng(4711);
    Dataset<double> data;
    data.pool = testutil::random_matrix(rng, 150, 2);
    std::vector<Index> labels;
    data.responses = simulate(p, data.pool, spec, 4711, &labels);
    data.active = spec;

    const fs::path out = work_dir() / "toy.csv";
    std::ofstream file(out);
    write_dataset_csv(file, data, spec, &labels);
    return out;
  }();
  return path;
}

std::string toy_args(const std::string& extra) {
  return "fit --data " + toy_csv().string() +
         " --responses y1,y2 --regressors \"x1;x2\" " + extra;
}

}  // namespace

TEST_CASE("fit runs, reports, and exits zero") {
  const fs::path out = work_dir() / "fit_basic";
  const RunResult r = run_cli(toy_args("--k 2 --seed 11 --out " +
                                       out.string()));
  CAPTURE(r.err);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("log-likelihood") != std::string::npos);
  CHECK(r.out.find("aitken") != std::string::npos);
  CHECK(fs::exists(out / "report.txt"));
  CHECK(fs::exists(out / "report.json"));

  SUBCASE("stored BIC recomputes exactly from loglik, npar and I") {
    const json doc = json::parse(slurp(out / "report.json"));
    const double stored = doc["bic"].get<double>();
    const double again = bic(doc["loglik"].get<double>(),
                             doc["npar"].get<Index>(),
                             doc["observations"].get<Index>());
    CHECK(stored == again);
  }

  SUBCASE("human text shows the same loglik the machine report stores") {
    const json doc = json::parse(slurp(out / "report.json"));
    char shown[48];
    std::snprintf(shown, sizeof shown, "%.6g", doc["loglik"].get<double>());
    CHECK(slurp(out / "report.txt").find(shown) != std::string::npos);
  }

  SUBCASE("text written to the report file matches stdout") {
    CHECK(slurp(out / "report.txt") == r.out);
  }
}

TEST_CASE("same seed gives byte-identical machine reports") {
  const fs::path a = work_dir() / "rep_a";
  const fs::path b = work_dir() / "rep_b";
  REQUIRE(run_cli(toy_args("--k 2 --seed 77 --starts 3 --out " +
                           a.string())).code == 0);
  REQUIRE(run_cli(toy_args("--k 2 --seed 77 --starts 3 --out " +
                           b.string())).code == 0);
  CHECK(slurp(a / "report.json") == slurp(b / "report.json"));

  const fs::path c = work_dir() / "rep_c";
  REQUIRE(run_cli(toy_args("--k 2 --seed 78 --starts 3 --out " +
                           c.string())).code == 0);
  CHECK(slurp(a / "report.json") != slurp(c / "report.json"));
}

TEST_CASE("K = 1 fit through the CLI matches the GLS oracle") {
  const fs::path out = work_dir() / "fit_k1";
  REQUIRE(run_cli(toy_args("--k 1 --out " + out.string())).code == 0);
  const json doc = json::parse(slurp(out / "report.json"));

  TextTable table = read_delimited_file(toy_csv().string());
  Dataset<double> data = ingest(table, {{"y1", "y2"}, {{"x1"}, {"x2"}}}, 1);
  const auto gls = oracle::gls_sur(data, data.active);

  const auto beta = doc["theta"]["beta"].get<std::vector<double>>();
  REQUIRE(beta.size() == 2);
  CHECK(std::abs(beta[0] - gls.beta[0]) < 1e-8);
  CHECK(std::abs(beta[1] - gls.beta[1]) < 1e-8);
  const auto lambda = doc["theta"]["lambda"][0].get<std::vector<double>>();
  CHECK(std::abs(lambda[0] - gls.intercept[0]) < 1e-8);
  CHECK(std::abs(lambda[1] - gls.intercept[1]) < 1e-8);
}

TEST_CASE("ingest failures exit 1 with a diagnostic") {
  SUBCASE("missing file") {
    const RunResult r = run_cli("fit --data /nonexistent/nope.csv --responses y1");
    CHECK(r.code == 1);
    CHECK(r.err.find("cannot open") != std::string::npos);
  }
  SUBCASE("missing column") {
    const RunResult r = run_cli(
        "fit --data " + toy_csv().string() + " --responses y1,zz");
    CHECK(r.code == 1);
    CHECK(r.err.find("zz") != std::string::npos);
  }
  SUBCASE("non-numeric cell names row and column") {
    const fs::path bad = work_dir() / "bad.csv";
    std::ofstream(bad) << "y1,x1\n1.0,2.0\noops,3.0\n";
    const RunResult r = run_cli("fit --data " + bad.string() +
                                " --responses y1 --regressors x1");
    CHECK(r.code == 1);
    CHECK(r.err.find("row 2") != std::string::npos);
    CHECK(r.err.find("y1") != std::string::npos);
  }
  SUBCASE("header-only file") {
    const fs::path empty = work_dir() / "empty.csv";
    std::ofstream(empty) << "y1,x1\n";
    const RunResult r = run_cli("fit --data " + empty.string() +
                                " --responses y1");
    CHECK(r.code == 1);
  }
  SUBCASE("unknown flag is a usage error") {
    const RunResult r = run_cli("fit --definitely-not-a-flag");
    CHECK(r.code == 1);
  }
}

TEST_CASE("delimiters are auto-detected and forceable") {
  const fs::path semi = work_dir() / "semi.csv";
  std::ofstream(semi) << "y1;x1\n1.5;0.2\n2.5;0.4\n0.5;-0.3\n1.0;0.1\n";
  CHECK(run_cli("fit --data " + semi.string() +
                " --responses y1 --regressors x1 --k 1").code == 0);
  CHECK(run_cli("fit --data " + semi.string() +
                " --responses y1 --regressors x1 --k 1 --delimiter \";\"")
            .code == 0);
}

TEST_CASE("config file supplies values and flags override them") {
  const fs::path cfg = work_dir() / "cfg.json";
  std::ofstream(cfg) << R"({"data": ")" << toy_csv().string() << R"(",
    "responses": ["y1", "y2"], "regressors": [["x1"], ["x2"]],
    "k": 2, "seed": 11})";

  const fs::path out_cfg = work_dir() / "from_cfg";
  REQUIRE(run_cli("fit --config " + cfg.string() + " --out " +
                  out_cfg.string()).code == 0);
  CHECK(json::parse(slurp(out_cfg / "report.json"))["components"] == 2);

  const fs::path out_flag = work_dir() / "from_flag";
  REQUIRE(run_cli("fit --config " + cfg.string() + " --k 1 --out " +
                  out_flag.string()).code == 0);
  CHECK(json::parse(slurp(out_flag / "report.json"))["components"] == 1);

  SUBCASE("broken config exits 1") {
    const fs::path broken = work_dir() / "broken.json";
    std::ofstream(broken) << "{ not json";
    CHECK(run_cli("fit --config " + broken.string()).code == 1);
  }
}

TEST_CASE("select writes a grid whose winner is the best cell") {
  const fs::path out = work_dir() / "sel";
  const RunResult r = run_cli(
      "select --data " + toy_csv().string() +
      " --responses y1,y2 --candidates x1,x2 --k-range 1:2 --seed 11"
      " --threads 2 --out " + out.string());
  CAPTURE(r.err);
  REQUIRE(r.code == 0);
  REQUIRE(fs::exists(out / "bic_grid.csv"));

  TextTable grid = read_delimited_file((out / "bic_grid.csv").string());
  REQUIRE(grid.header.size() == 7);
  CHECK(grid.header[0] == "K");
  CHECK(grid.header[2] == "regressor_mask");
  CHECK(grid.rows.size() == 32);  // 2^(2*2) masks x 2 component counts

  // Recompute the winner from the CSV alone and compare with the report.
  const json doc = json::parse(slurp(out / "report.json"));
  double best_bic = -std::numeric_limits<double>::infinity();
  Index best_npar = 0;
  long best_mask = -1;
  for (const auto& row : grid.rows) {
    if (row[6] != "aitken" && row[6] != "max-iterations") continue;
    const double cell_bic = std::stod(row[5]);
    const Index cell_npar = std::stoll(row[4]);
    const long cell_mask = std::stol(row[2]);
    const bool beats =
        cell_bic > best_bic ||
        (cell_bic == best_bic &&
         (cell_npar < best_npar ||
          (cell_npar == best_npar && cell_mask < best_mask)));
    if (best_mask < 0 || beats) {
      best_bic = cell_bic;
      best_npar = cell_npar;
      best_mask = cell_mask;
    }
  }
  CHECK(doc["best"]["bic"].get<double>() == best_bic);
  CHECK(doc["best"]["npar"].get<Index>() == best_npar);
  // The true model has y1 ~ x1 and y2 ~ x2 with two components.
  CHECK(doc["best"]["components"] == 2);
  CHECK(doc["best"]["regressors"][0][0] == "x1");
  CHECK(doc["best"]["regressors"][1][0] == "x2");
}

TEST_CASE("select refuses oversized work") {
  SUBCASE("more than 20 candidate bits") {
    std::ostringstream header, row;
    header << "y1";
    row << "1.0";
    for (int j = 0; j < 21; ++j) {
      header << ",c" << j;
      row << "," << 0.1 * j;
    }
    const fs::path wide = work_dir() / "wide.csv";
    std::ofstream(wide) << header.str() << "\n"
                        << row.str() << "\n" << row.str() << "\n";
    std::string candidates = "c0";
    for (int j = 1; j < 21; ++j) candidates += ",c" + std::to_string(j);
    const RunResult r = run_cli("select --data " + wide.string() +
                                " --responses y1 --candidates " + candidates);
    CHECK(r.code == 1);
  }
  SUBCASE("large grids need --slow") {
    const RunResult r = run_cli(
        "select --data " + toy_csv().string() +
        " --responses y1,y2 --candidates x1,x2 --k-range 1:100");
    CHECK(r.code == 1);
    CHECK(r.err.find("--slow") != std::string::npos);
  }
}

TEST_CASE("bootstrap exports replicates that are thread-invariant") {
  const fs::path a = work_dir() / "boot_a";
  const fs::path b = work_dir() / "boot_b";
  const std::string base =
      "bootstrap --data " + toy_csv().string() +
      " --responses y1,y2 --regressors \"x1;x2\" --k 2 --seed 5"
      " --bootstrap-b 10";
  REQUIRE(run_cli(base + " --threads 3 --out " + a.string()).code == 0);
  REQUIRE(run_cli(base + " --threads 1 --out " + b.string()).code == 0);
  CHECK(slurp(a / "replicates.csv") == slurp(b / "replicates.csv"));

  TextTable reps = read_delimited_file((a / "replicates.csv").string());
  const json doc = json::parse(slurp(a / "report.json"));
  CHECK(static_cast<Index>(reps.rows.size()) ==
        doc["successes"].get<Index>());
  CHECK(reps.header == std::vector<std::string>{"y1~x1", "y2~x2"});

  SUBCASE("B = 0 is a usage error") {
    CHECK(run_cli(base.substr(0, base.find("--bootstrap-b")) +
                  "--bootstrap-b 0").code == 1);
  }
  SUBCASE("B past 1000 needs --slow") {
    const RunResult r = run_cli(base.substr(0, base.find("--bootstrap-b")) +
                                "--bootstrap-b 2000");
    CHECK(r.code == 1);
    CHECK(r.err.find("--slow") != std::string::npos);
  }
}

TEST_CASE("simulate round-trips through ingest losslessly") {
  const fs::path fit_out = work_dir() / "sim_fit";
  REQUIRE(run_cli(toy_args("--k 2 --seed 11 --out " + fit_out.string()))
              .code == 0);

  const fs::path sim_out = work_dir() / "sim_data";
  const RunResult r = run_cli("simulate --theta " +
                              (fit_out / "report.json").string() +
                              " --data " + toy_csv().string() +
                              " --seed 99 --out " + sim_out.string());
  CAPTURE(r.err);
  REQUIRE(r.code == 0);

  // The same draw through the library, bit for bit.
  const json doc = json::parse(slurp(fit_out / "report.json"));
  Parameters<double> p;
  p.weights = Vector<double>(2);
  const auto weights = doc["theta"]["weights"].get<std::vector<double>>();
  p.weights << weights[0], weights[1];
  p.coefficients = Vector<double>(2);
  const auto beta = doc["theta"]["beta"].get<std::vector<double>>();
  p.coefficients << beta[0], beta[1];
  for (int k = 0; k < 2; ++k) {
    const auto lambda = doc["theta"]["lambda"][k].get<std::vector<double>>();
    Vector<double> l(2);
    l << lambda[0], lambda[1];
    p.intercepts.push_back(l);
    Matrix<double> s(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        s(i, j) = doc["theta"]["sigma"][k][i][j].get<double>();
    p.covariances.push_back(s);
  }

  TextTable toy_table = read_delimited_file(toy_csv().string());
  Dataset<double> toy =
      ingest(toy_table, {{"y1", "y2"}, {{"x1"}, {"x2"}}}, 2);
  const Matrix<double> direct = simulate(p, toy.pool, toy.active, 99);

  TextTable sim_table =
      read_delimited_file((sim_out / "simulated.csv").string());
  Dataset<double> sim =
      ingest(sim_table, {{"y1", "y2"}, {{"x1"}, {"x2"}}}, 2);
  REQUIRE(sim.observation_count() == toy.observation_count());
  CHECK((sim.responses - direct).cwiseAbs().maxCoeff() == 0.0);
  CHECK((sim.pool - toy.pool).cwiseAbs().maxCoeff() == 0.0);

  SUBCASE("the simulated file fits cleanly") {
    CHECK(run_cli("fit --data " + (sim_out / "simulated.csv").string() +
                  " --responses y1,y2 --regressors \"x1;x2\" --k 2")
              .code == 0);
  }
  SUBCASE("simulate without a theta file is a usage error") {
    CHECK(run_cli("simulate --data " + toy_csv().string()).code == 1);
  }
}

TEST_CASE("gradcheck passes at the fitted estimate and honors tolerances") {
  const std::string base =
      "gradcheck --data " + toy_csv().string() +
      " --responses y1,y2 --regressors \"x1;x2\" --k 2 --seed 11";
  const fs::path out = work_dir() / "grad";
  const RunResult pass = run_cli(base + " --out " + out.string());
  CAPTURE(pass.err);
  CHECK(pass.code == 0);
  CHECK(pass.out.find("PASS") != std::string::npos);
  const json doc = json::parse(slurp(out / "report.json"));
  CHECK(doc["pass"] == true);
  CHECK(doc["score_error"].get<double>() < 1e-6);
  CHECK(doc["hessian_error"].get<double>() < 1e-5);

  const RunResult fail = run_cli(base + " --score-tol 1e-18");
  CHECK(fail.code == 2);
  CHECK(fail.out.find("FAIL") != std::string::npos);
}

TEST_CASE("numerical failures exit 2") {
  const fs::path dup = work_dir() / "dup.csv";
  {
    TextTable table = read_delimited_file(toy_csv().string());
    std::ofstream out(dup);
    out << "y1,y2,x1,x2,x1b\n";
    for (const auto& row : table.rows)
      out << row[0] << ',' << row[1] << ',' << row[2] << ',' << row[3]
          << ',' << row[2] << '\n';
  }
  const RunResult r = run_cli("fit --data " + dup.string() +
                              " --responses y1,y2"
                              " --regressors \"x1,x1b;x2\" --k 1");
  CHECK(r.code == 2);
  CHECK(r.err.find("failed") != std::string::npos);

  SUBCASE("--deny-unidentifiable turns the warning into exit 1") {
    const RunResult denied = run_cli("fit --data " + dup.string() +
                                     " --responses y1,y2"
                                     " --regressors \"x1,x1b;x2\" --k 1"
                                     " --deny-unidentifiable");
    CHECK(denied.code == 1);
    CHECK(denied.err.find("not identified") != std::string::npos);
  }
}

TEST_CASE("the bundled synthetic athlete data fits end to end") {
  const fs::path data = fs::path(MIXSUR_DATA_DIR) / "ais_synthetic.csv";
  REQUIRE(fs::exists(data));
  const fs::path out = work_dir() / "ais_fit";
  const RunResult r = run_cli(
      "fit --data " + data.string() +
      " --responses BMI,SSF,PBF,LBM"
      " --regressors \"RCC,PFC;RCC;RCC,PFC;RCC,PFC\""
      " --k 2 --starts 4 --seed 20240202 --factor SEX --out " +
      out.string());
  CAPTURE(r.err);
  REQUIRE(r.code == 0);
  const json doc = json::parse(slurp(out / "report.json"));
  CHECK(doc["observations"] == 202);
  CHECK(doc["npar"] == 36);
  CHECK(doc["components"] == 2);
  // The generator ties cluster membership to sex, so the association test
  // must reject independence decisively.
  CHECK(doc["crosstab"]["p_value"].get<double>() < 1e-4);
  const auto weights = doc["theta"]["weights"].get<std::vector<double>>();
  CHECK(weights[0] > 0.5);  // canonical order puts the majority first
  CHECK(weights[0] + weights[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit with a factor column adds the cross tabulation") {
  // Rebuild the toy file with its simulation labels as a text factor.
  const fs::path labeled = work_dir() / "labeled.csv";
  {
    TextTable table = read_delimited_file(toy_csv().string());
    const Index comp = table.column("component");
    REQUIRE(comp >= 0);
    std::ofstream out(labeled);
    out << "y1,y2,x1,x2,grp\n";
    for (const auto& row : table.rows)
      out << row[0] << ',' << row[1] << ',' << row[2] << ',' << row[3]
          << ',' << (row[size_t(comp)] == "1" ? "low" : "high") << '\n';
  }
  const fs::path out = work_dir() / "factor_fit";
  const RunResult r = run_cli("fit --data " + labeled.string() +
                              " --responses y1,y2 --regressors \"x1;x2\""
                              " --k 2 --seed 11 --factor grp --out " +
                              out.string());
  CAPTURE(r.err);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("chi-squared") != std::string::npos);
  const json doc = json::parse(slurp(out / "report.json"));
  REQUIRE(doc.contains("crosstab"));
  CHECK(doc["crosstab"]["df"] == 1);
  // The components track the generating labels almost perfectly here, so
  // independence is overwhelmingly rejected.
  CHECK(doc["crosstab"]["p_value"].get<double>() < 1e-10);
}
