#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ddmhe/experiment.hpp"

using namespace ddmhe;

namespace {

std::string small_config_json(const std::string& out_dir, const std::string& modes) {
  std::ostringstream os;
  os << "{"
     << "\"N\": 50, \"T\": 10, \"L\": 3, \"rho\": 0.95,"
     << "\"P_scale\": 500, \"R_scales\": [500],"
     << "\"offline_input\": {\"kind\": \"uniform\", \"a\": 0, \"b\": 20},"
     << "\"seeds\": [1], \"modes\": [" << modes << "],"
     << "\"out_dir\": \"" << out_dir << "\"}";
  return os.str();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("config parsing fills defaults and validates") {
  const ExperimentConfig cfg = parse_experiment_config(
      "{\"offline_input\": {\"kind\": \"uniform\", \"a\": 0, \"b\": 20}}");
  CHECK(cfg.N == 100);
  CHECK(cfg.T == 100);
  CHECK(cfg.L == 7);
  CHECK(cfg.rho == doctest::Approx(0.95));
  CHECK(cfg.P_scale == doctest::Approx(500.0));
  CHECK(cfg.x0_true(0) == doctest::Approx(7.0));
  CHECK(cfg.x0_prior(1) == doctest::Approx(2.0));
  CHECK(cfg.modes == std::vector<std::string>{"dd-nominal"});
}

TEST_CASE("config parsing rejects unknown keys, bad modes and bad JSON") {
  CHECK_THROWS_AS(parse_experiment_config("{\"horizon\": 5}"), std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment_config("{\"modes\": [\"bogus\"]}"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment_config("not json"), std::invalid_argument);
  CHECK_THROWS_AS(
      parse_experiment_config("{\"offline_input\": {\"kind\": \"unknown\"}}"),
      std::invalid_argument);
  CHECK_THROWS_AS(
      parse_experiment_config("{\"tank_params\": {\"volume\": 3}}"),
      std::invalid_argument);
}

TEST_CASE("rmse matches hand-computed values") {
  RunSeries s;
  s.x_true = Eigen::MatrixXd::Zero(2, 5);
  s.x_hat = Eigen::MatrixXd::Zero(2, 5);
  s.x_hat.row(0).setConstant(2.0);
  s.err_norm.assign(5, 0.0);
  CHECK(rmse(s, 0, 0, 5) == doctest::Approx(2.0));
  CHECK(rmse(s, 1, 0, 5) == doctest::Approx(0.0));
  // mixed window: errors 2, 2, 0 over [1, 4) on a modified row
  s.x_hat(0, 3) = 0.0;
  CHECK(rmse(s, 0, 1, 4) == doctest::Approx(std::sqrt(8.0 / 3.0)));
}

TEST_CASE("run_estimator is deterministic and emits a recomputable csv") {
  const std::string out =
      (std::filesystem::temp_directory_path() / "ddmhe_exp_test").string();
  std::filesystem::create_directories(out);
  const ExperimentConfig cfg =
      parse_experiment_config(small_config_json(out, "\"dd-nominal\""));
  const RunSeries a = run_estimator(cfg, "dd-nominal", 500.0, 1);
  const RunSeries b = run_estimator(cfg, "dd-nominal", 500.0, 1);
  CHECK((a.x_hat - b.x_hat).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.x_true - b.x_true).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(a.length() == 11);

  const std::string p1 = out + "/run_a.csv";
  const std::string p2 = out + "/run_b.csv";
  emit_csv(a, p1);
  emit_csv(b, p2);
  CHECK(slurp(p1) == slurp(p2));

  // err_norm column is consistent with the stored trajectories
  for (int t = 0; t <= 10; ++t) {
    CHECK(a.err_norm[t] ==
          doctest::Approx((a.x_true.col(t) - a.x_hat.col(t)).norm()).epsilon(1e-12));
  }
  std::filesystem::remove_all(out);
}

TEST_CASE("aggregate_run reduces the steady-state window") {
  RunSeries s;
  s.estimator = "dd-nominal";
  s.R_scale = 500.0;
  s.seed = 9;
  s.x_true = Eigen::MatrixXd::Zero(2, 8);
  s.x_hat = Eigen::MatrixXd::Zero(2, 8);
  s.x_hat.row(0).setConstant(1.0);
  s.err_norm.assign(8, 1.0);
  s.solve_ms.assign(8, 2.0);
  const AggregateRow row = aggregate_run(s);
  CHECK(row.estimator == "dd-nominal");
  CHECK(row.seed == 9);
  REQUIRE(row.rmse_per_state.size() == 2);
  CHECK(row.rmse_per_state[0] == doctest::Approx(1.0));
  CHECK(row.rmse_per_state[1] == doctest::Approx(0.0));
  CHECK(row.mean_solve_ms == doctest::Approx(2.0));
}

TEST_CASE("svg plot is emitted as a valid svg document") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "ddmhe_plot_test.svg").string();
  PlotSeries a{"first", {0.0, 1.0, 0.5, 2.0}};
  PlotSeries b{"second", {1.0, 0.0, 1.5, 0.25}};
  emit_svg_lineplot({a, b}, "test plot", path);
  const std::string s = slurp(path);
  CHECK(s.find("<svg") != std::string::npos);
  CHECK(s.find("polyline") != std::string::npos);
  CHECK(s.find("first") != std::string::npos);
  CHECK(s.find("</svg>") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("run_benchmark produces per-run and aggregate artifacts") {
  const std::string out =
      (std::filesystem::temp_directory_path() / "ddmhe_bench_test").string();
  std::filesystem::remove_all(out);
  const ExperimentConfig cfg = parse_experiment_config(
      small_config_json(out, "\"dd-nominal\", \"model-based\""));
  const std::vector<AggregateRow> rows = run_benchmark(cfg);
  CHECK(rows.size() == 2);  // two modes x one R x one seed
  CHECK(std::filesystem::exists(out + "/aggregate.csv"));
  int csvs = 0, svgs = 0;
  for (const auto& e : std::filesystem::directory_iterator(out)) {
    if (e.path().extension() == ".csv") ++csvs;
    if (e.path().extension() == ".svg") ++svgs;
  }
  CHECK(csvs >= 3);  // two run files + aggregate
  CHECK(svgs >= 1);
  std::filesystem::remove_all(out);
}
