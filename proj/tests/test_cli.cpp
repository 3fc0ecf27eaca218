#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "msrisk/compare.hpp"
#include "msrisk/markov.hpp"
#include "msrisk/panel.hpp"

namespace fs = std::filesystem;
using namespace msrisk;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Run {
  int code = -1;
  std::string err;
};

// Runs the binary with `args`; stdout is discarded and stderr captured.
Run run(const std::string& args) {
  static int counter = 0;
  const fs::path err = fs::temp_directory_path() / ("msrisk_cli_err_" + std::to_string(counter++));
  const std::string cmd = std::string("\"") + MSRISK_CLI + "\" " + args + " >/dev/null 2>\"" + err.string() + '"';
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  fs::remove(err);
  return r;
}

std::string q(const fs::path& p) { return '"' + p.string() + '"'; }

// A smaller copy of the shipped scenario so the pipeline runs quickly.
fs::path small_scenario(const fs::path& dir) {
  std::string text = slurp(MSRISK_DEFAULT_SCENARIO);
  auto set = [&](const std::string& key, const std::string& value) {
    const auto at = text.find(key + " = ");
    REQUIRE(at != std::string::npos);
    const auto end = text.find('\n', at);
    text.replace(at, end - at, key + " = " + value);
  };
  set("loans", "1500");
  set("months", "72");
  const fs::path out = dir / "small.ini";
  std::ofstream(out) << text;
  return out;
}

// Shared run of simulate and the three fits; built once per process.
struct Workspace {
  fs::path root, scenario, panel, models;

  Workspace() {
    root = fs::temp_directory_path() / "msrisk_cli_test";
    fs::remove_all(root);
    fs::create_directories(root);
    scenario = small_scenario(root);
    REQUIRE(run("simulate --scenario " + q(scenario) + " --output-dir " + q(root / "sim")).code == 0);
    panel = root / "sim" / "panel.csv";
    models = root / "fit";
    for (const char* m : {"mc", "br", "mlr"})
      REQUIRE(run(std::string("fit --model ") + m + " --input " + q(panel) + " --output-dir " + q(models)).code == 0);
  }
};

const Workspace& workspace() {
  static const Workspace w;
  return w;
}

std::size_t data_lines(const std::string& csv) {
  return static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) - 1;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("simulate --output-dir /tmp/msrisk_unused").code == 2);
  CHECK(run("simulate --scenario /nonexistent.ini --output-dir /tmp/msrisk_unused").code == 2);
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  const auto& w = workspace();
  const std::string in = " --input " + q(w.panel) + " --output-dir " + q(w.root / "bad");
  CHECK(run("fit --model xgb" + in).code == 2);
  CHECK(run("fit --model mc --link logit" + in).code == 2);
  CHECK(run("fit --model br --transitions PP,XY" + in).code == 2);
  CHECK(run("fit --model br --precision-link logit" + in).code == 2);
  CHECK(run("compare --input " + q(w.panel) + " --models " + q(w.models) + " --output-dir " +
            q(w.root / "c") + " --fill sideways")
            .code == 2);
  // An output directory that coincides with an input is refused.
  CHECK(run("simulate --scenario " + q(w.scenario) + " --output-dir " + q(w.scenario)).code == 2);
}

TEST_CASE("bad scenario is a computation error") {
  const auto& w = workspace();
  const fs::path bad = w.root / "bad.ini";
  std::ofstream(bad) << "[portfolio]\nloans = 10\n[mystery]\n";
  const Run r = run("simulate --scenario " + q(bad) + " --output-dir " + q(w.root / "bad_sim"));
  CHECK(r.code == 1);
  CHECK(r.err.find("scenario") != std::string::npos);
}

TEST_CASE("simulate is reproducible per seed") {
  const auto& w = workspace();
  REQUIRE(run("simulate --scenario " + q(w.scenario) + " --output-dir " + q(w.root / "again")).code == 0);
  CHECK(slurp(w.root / "again" / "panel.csv") == slurp(w.panel));
  CHECK(slurp(w.root / "again" / "truth.csv") == slurp(w.root / "sim" / "truth.csv"));
  REQUIRE(run("simulate --scenario " + q(w.scenario) + " --seed 99 --output-dir " + q(w.root / "other")).code == 0);
  CHECK(slurp(w.root / "other" / "panel.csv") != slurp(w.panel));
  CHECK_NOTHROW(panel::load_panel(w.panel));
}

TEST_CASE("fit outputs") {
  const auto& w = workspace();
  const auto mc = markov::matrices_from_csv(w.models / "mc_matrix.csv");
  REQUIRE(mc.homogeneous.has_value());
  CHECK(mc.homogeneous->max_row_sum_error() < 1e-12);

  for (const char* t : {"PP", "PD", "PS", "DD", "DS", "DW"}) {
    const std::string s = slurp(w.models / (std::string("br_") + t + "_summary.txt"));
    CHECK(s.find("mean_link: loglog") != std::string::npos);
    CHECK(s.find("precision_link: log") != std::string::npos);
  }
  CHECK_FALSE(fs::exists(w.models / "br_PW_summary.txt"));

  // Three non-baseline destinations times (intercept + 3 covariates).
  for (const char* s : {"P", "D"}) {
    const std::string coef = slurp(w.models / (std::string("mlr_") + s + "_coefficients.csv"));
    CHECK(data_lines(coef) == 3 * (1 + 3));
    const std::string summary = slurp(w.models / (std::string("mlr_") + s + "_summary.txt"));
    CHECK(summary.find("coefficients: 12") != std::string::npos);
  }
}

TEST_CASE("MC-only comparison covers the eight transient cells") {
  const auto& w = workspace();
  const fs::path mc_dir = w.root / "mc_only";
  REQUIRE(run("fit --model mc --input " + q(w.panel) + " --output-dir " + q(mc_dir)).code == 0);
  const std::string args = "compare --input " + q(w.panel) + " --models " + q(mc_dir) + " --output-dir ";
  REQUIRE(run(args + q(w.root / "cmp_mc")).code == 0);
  REQUIRE(run(args + q(w.root / "cmp_mc2")).code == 0);
  const std::string table = slurp(w.root / "cmp_mc" / "ad_table.csv");
  const auto rows = compare::ad_table_from_csv(table);
  CHECK(rows.size() == 8);
  for (const auto& r : rows) CHECK(r.best_in_class);
  CHECK(table == slurp(w.root / "cmp_mc2" / "ad_table.csv"));
  CHECK(slurp(w.root / "cmp_mc" / "improvement.csv") == "model,relative_improvement\n");
}

TEST_CASE("full comparison flags the per-cell minimum") {
  const auto& w = workspace();
  REQUIRE(run("compare --input " + q(w.panel) + " --models " + q(w.models) + " --output-dir " + q(w.root / "cmp")).code == 0);
  const auto rows = compare::ad_table_from_csv(slurp(w.root / "cmp" / "ad_table.csv"));
  REQUIRE(rows.size() == 24);
  std::map<compare::Cell, double> best;
  for (const auto& r : rows) {
    auto [it, fresh] = best.emplace(r.cell, r.ad);
    if (!fresh) it->second = std::min(it->second, r.ad);
  }
  for (const auto& r : rows) CHECK(r.best_in_class == (r.ad == best.at(r.cell)));
  for (const char* f : {"improvement.csv", "series_MC.csv", "series_BR.csv", "series_MLR.csv",
                        "compare_PD.svg", "term_structure_mae.csv"})
    CHECK(fs::exists(w.root / "cmp" / f));
  const std::string svg = slurp(w.root / "cmp" / "compare_PD.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("term-structure matches the library and honours strict fill") {
  const auto& w = workspace();
  const std::string base = "term-structure --input " + q(w.panel) + " --models " + q(w.models) + " --output-dir ";
  const Run strict = run(base + q(w.root / "ts_strict") + " --fill strict");
  CHECK(strict.code == 1);
  CHECK(strict.err.find("month") != std::string::npos);

  REQUIRE(run(base + q(w.root / "ts") + " --fill window-mean").code == 0);
  // Actual rates come from the validation part of the fit-time split (seed 1, 70% train).
  const auto valid = panel::split_train_valid(panel::load_panel(w.panel), 0.7, 1).second;
  const auto tv = markov::estimate_time_varying(valid);
  const panel::MonthWindow window{tv.by_month.front().calendar_month, tv.by_month.back().calendar_month};
  const auto ts = compare::cumulate_term_structure(tv, window, compare::FillPolicy::window_mean);
  const std::string written = slurp(w.root / "ts" / "term_structure_actual.csv");
  CHECK(written == compare::term_structure_to_csv(ts));

  const auto mc = compare::term_structure_from_csv(slurp(w.root / "ts" / "term_structure_MC.csv"));
  REQUIRE(mc.cumulative.size() == ts.cumulative.size());
  for (std::size_t j = 1; j < mc.cumulative.size(); ++j) {
    CHECK(mc.cumulative[j].second(0, 2) >= mc.cumulative[j - 1].second(0, 2));
    CHECK(mc.cumulative[j].second(0, 3) >= mc.cumulative[j - 1].second(0, 3));
  }
  CHECK(fs::exists(w.root / "ts" / "term_structure_PD.svg"));

  REQUIRE(run(base + q(w.root / "ts_csv") + " --format csv").code == 0);
  CHECK_FALSE(fs::exists(w.root / "ts_csv" / "term_structure_PD.svg"));
}

TEST_CASE("diagnose writes its reports") {
  const auto& w = workspace();
  REQUIRE(run("diagnose --input " + q(w.panel) + " --output-dir " + q(w.root / "diag")).code == 0);
  for (const char* f : {"sojourn_times.csv", "default_rate.csv", "default_rate_train.csv",
                        "representativeness.txt", "br_PD_residuals.csv", "br_PD_ks.csv", "br_influence.csv"})
    CHECK(fs::exists(w.root / "diag" / f));
  const auto rates = panel::rate_series_from_csv(w.root / "diag" / "default_rate.csv");
  CHECK_FALSE(rates.empty());
}
