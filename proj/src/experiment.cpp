#include "ddmhe/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ddmhe {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& context) {
  for (const auto& item : obj.items()) {
    if (allowed.count(item.key()) == 0) {
      throw std::invalid_argument("config: unknown key '" + item.key() + "' in " +
                                  context);
    }
  }
}

NoiseSpec parse_noise(const json& obj, const std::string& context) {
  reject_unknown_keys(obj, {"kind", "a", "b", "mean", "stddev", "bound"}, context);
  const std::string kind = obj.value("kind", "none");
  if (kind == "none") return NoiseSpec::none_spec();
  if (kind == "uniform") {
    return NoiseSpec::uniform_spec(obj.at("a").get<double>(), obj.at("b").get<double>(),
                                   0);
  }
  if (kind == "gaussian") {
    return NoiseSpec::gaussian_spec(obj.value("mean", 0.0), obj.at("stddev").get<double>(),
                                    0);
  }
  if (kind == "truncated_gaussian") {
    return NoiseSpec::truncated_gaussian_spec(obj.value("mean", 0.0),
                                              obj.at("stddev").get<double>(),
                                              obj.at("bound").get<double>(), 0);
  }
  throw std::invalid_argument("config: unknown noise kind '" + kind + "' in " + context);
}

Eigen::VectorXd parse_vector(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = arr[i];
  return v;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (plant != "linear" && plant != "nonlinear") {
    throw std::invalid_argument("config: plant must be 'linear' or 'nonlinear'");
  }
  if (N < 2) throw std::invalid_argument("config: N must be >= 2");
  if (T < 1) throw std::invalid_argument("config: T must be >= 1");
  if (L < 1 || L >= N) throw std::invalid_argument("config: need 1 <= L < N");
  if (rho <= 0.0 || rho >= 1.0) throw std::invalid_argument("config: rho must be in (0,1)");
  if (P_scale <= 0.0) throw std::invalid_argument("config: P_scale must be positive");
  if (R_scales.empty()) throw std::invalid_argument("config: R_scales must be nonempty");
  for (double r : R_scales) {
    if (r <= 0.0) throw std::invalid_argument("config: R_scales must be positive");
  }
  if (eps_x_bound < 0.0 || eps_y_bound < 0.0) {
    throw std::invalid_argument("config: eps bounds must be nonnegative");
  }
  if (seeds.empty()) throw std::invalid_argument("config: seeds must be nonempty");
  if (modes.empty()) throw std::invalid_argument("config: modes must be nonempty");
  for (const auto& m : modes) {
    if (m != "dd-nominal" && m != "dd-robust" && m != "model-based") {
      throw std::invalid_argument("config: unknown mode '" + m + "'");
    }
  }
  if (online_u_period <= 0.0) {
    throw std::invalid_argument("config: online_u_period must be positive");
  }
  if (x0_offline.size() != 0 && x0_offline.size() != 4) {
    throw std::invalid_argument("config: x0_offline must have 4 entries");
  }
  if (x0_true.size() != 4 || x0_prior.size() != 4) {
    throw std::invalid_argument("config: x0_true and x0_prior must have 4 entries");
  }
  if (plant == "nonlinear") tank_params.validate();
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
  }
  reject_unknown_keys(
      doc,
      {"plant", "tank_params", "N", "T", "L", "rho", "P_scale", "R_scales",
       "offline_input", "offline_state_noise", "offline_output_noise",
       "online_output_noise", "eps_x_bound", "eps_y_bound", "c_alpha", "c_sigma_x",
       "online_u_offset", "online_u_amp", "online_u_period", "x0_offline", "x0_true", "x0_prior",
       "seeds", "modes", "out_dir"},
      "top level");

  ExperimentConfig cfg;
  cfg.plant = doc.value("plant", cfg.plant);
  if (doc.contains("tank_params")) {
    const json& tp = doc["tank_params"];
    reject_unknown_keys(tp,
                        {"a1", "a2", "a3", "a4", "A1", "A2", "A3", "A4", "gamma1",
                         "gamma2", "g", "dt"},
                        "tank_params");
    FourTankParams& q = cfg.tank_params;
    q.a1 = tp.value("a1", q.a1);
    q.a2 = tp.value("a2", q.a2);
    q.a3 = tp.value("a3", q.a3);
    q.a4 = tp.value("a4", q.a4);
    q.A1 = tp.value("A1", q.A1);
    q.A2 = tp.value("A2", q.A2);
    q.A3 = tp.value("A3", q.A3);
    q.A4 = tp.value("A4", q.A4);
    q.gamma1 = tp.value("gamma1", q.gamma1);
    q.gamma2 = tp.value("gamma2", q.gamma2);
    q.g = tp.value("g", q.g);
    q.dt = tp.value("dt", q.dt);
  }
  cfg.N = doc.value("N", cfg.N);
  cfg.T = doc.value("T", cfg.T);
  cfg.L = doc.value("L", cfg.L);
  cfg.rho = doc.value("rho", cfg.rho);
  cfg.P_scale = doc.value("P_scale", cfg.P_scale);
  if (doc.contains("R_scales")) {
    cfg.R_scales = doc["R_scales"].get<std::vector<double>>();
  }
  if (doc.contains("offline_input")) {
    cfg.offline_input = parse_noise(doc["offline_input"], "offline_input");
  }
  if (doc.contains("offline_state_noise")) {
    cfg.offline_state_noise = parse_noise(doc["offline_state_noise"], "offline_state_noise");
  }
  if (doc.contains("offline_output_noise")) {
    cfg.offline_output_noise =
        parse_noise(doc["offline_output_noise"], "offline_output_noise");
  }
  if (doc.contains("online_output_noise")) {
    cfg.online_output_noise =
        parse_noise(doc["online_output_noise"], "online_output_noise");
  }
  cfg.eps_x_bound = doc.value("eps_x_bound", cfg.eps_x_bound);
  cfg.eps_y_bound = doc.value("eps_y_bound", cfg.eps_y_bound);
  cfg.c_alpha = doc.value("c_alpha", cfg.c_alpha);
  cfg.c_sigma_x = doc.value("c_sigma_x", cfg.c_sigma_x);
  cfg.online_u_offset = doc.value("online_u_offset", cfg.online_u_offset);
  cfg.online_u_amp = doc.value("online_u_amp", cfg.online_u_amp);
  cfg.online_u_period = doc.value("online_u_period", cfg.online_u_period);
  cfg.x0_offline = doc.contains("x0_offline") ? parse_vector(doc["x0_offline"])
                                              : Eigen::VectorXd::Zero(4);
  cfg.x0_true = doc.contains("x0_true") ? parse_vector(doc["x0_true"])
                                        : (Eigen::VectorXd(4) << 7, 7, 7, 7).finished();
  cfg.x0_prior = doc.contains("x0_prior") ? parse_vector(doc["x0_prior"])
                                          : (Eigen::VectorXd(4) << 1, 2, 1, 2).finished();
  if (doc.contains("seeds")) cfg.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();
  if (doc.contains("modes")) cfg.modes = doc["modes"].get<std::vector<std::string>>();
  cfg.out_dir = doc.value("out_dir", cfg.out_dir);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

DataSet make_offline_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  NoiseSpec input = cfg.offline_input;
  NoiseSpec sn = cfg.offline_state_noise;
  NoiseSpec on = cfg.offline_output_noise;
  input.seed = seed * 1000 + 1;
  sn.seed = seed * 1000 + 2;
  on.seed = seed * 1000 + 3;
  PlantVariant plant;
  if (cfg.plant == "linear") {
    plant = four_tank_linear();
  } else {
    plant = cfg.tank_params;
  }
  DataSet ds = collect_offline_data(plant, input, cfg.N, sn, on, cfg.x0_offline);
  ds.eps_x_bound = cfg.eps_x_bound;
  ds.eps_y_bound = cfg.eps_y_bound;
  ds.seed = seed;
  return ds;
}

SimRecord make_online_record(const ExperimentConfig& cfg, std::uint64_t seed) {
  const int m = 2;
  Eigen::MatrixXd u(m, cfg.T);
  for (int t = 0; t < cfg.T; ++t) {
    const double v = cfg.online_u_offset +
                     cfg.online_u_amp *
                         std::sin(2.0 * std::numbers::pi * t / cfg.online_u_period);
    u.col(t).setConstant(v);
  }
  NoiseSpec noise = cfg.online_output_noise;
  noise.seed = seed * 1000 + 4;
  const Trajectory u_traj(u);
  if (cfg.plant == "linear") {
    return simulate_lti(four_tank_linear(), cfg.x0_true, u_traj, noise);
  }
  return simulate_four_tank_nonlinear(cfg.tank_params, cfg.x0_true, u_traj, noise);
}

namespace {

EstimatorConfig make_estimator_config(const ExperimentConfig& cfg, double R_scale,
                                      bool robust) {
  EstimatorConfig ec;
  ec.L = cfg.L;
  ec.rho = cfg.rho;
  ec.P_weight = cfg.P_scale * Eigen::MatrixXd::Identity(4, 4);
  ec.R_weight = R_scale * Eigen::MatrixXd::Identity(2, 2);
  ec.state_lower = Eigen::VectorXd::Zero(4);
  ec.state_upper =
      Eigen::VectorXd::Constant(4, std::numeric_limits<double>::infinity());
  ec.mode = robust ? EstimatorConfig::Mode::robust : EstimatorConfig::Mode::nominal;
  ec.c_alpha = cfg.c_alpha;
  ec.c_sigma_x = cfg.c_sigma_x;
  ec.eps_x_bound = cfg.eps_x_bound;
  ec.eps_y_bound = cfg.eps_y_bound;
  return ec;
}

std::vector<double> try_bound_column(const ExperimentConfig& cfg, const DataSet& ds,
                                     const SimRecord& online, const std::string& mode,
                                     const EstimatorConfig& ec) {
  std::vector<double> bound;
  if (mode == "model-based") return bound;
  try {
    const EUossConstants consts = estimate_euoss_constants(ds);
    const double e0 = (cfg.x0_true - cfg.x0_prior).norm();
    const Eigen::MatrixXd v = online.v.samples();
    if (mode == "dd-nominal") {
      const NominalBoundParams params =
          nominal_bound_params(consts, ec.P_weight, ec.R_weight, cfg.rho, cfg.L);
      for (int t = 0; t <= cfg.T; ++t) {
        bound.push_back(nominal_error_bound(t, e0, v, params));
      }
    } else {
      RobustCostWeights w{ec.P_weight, ec.R_weight, cfg.rho, cfg.c_alpha, cfg.c_sigma_x};
      double u_max = 0.0, x_max = 0.0;
      propose_compact_radii(online.u, online.x, u_max, x_max);
      const RobustBoundParams params =
          robust_bound_params(consts, ds, w, u_max, x_max, cfg.L);
      for (int t = 0; t <= cfg.T; ++t) {
        bound.push_back(robust_error_bound(t, e0, v, params));
      }
    }
  } catch (const std::exception&) {
    bound.clear();
  }
  return bound;
}

}  // namespace

RunSeries run_estimator(const ExperimentConfig& cfg, const std::string& mode,
                        double R_scale, std::uint64_t seed) {
  const DataSet ds = make_offline_dataset(cfg, seed);
  const SimRecord online = make_online_record(cfg, seed);
  const EstimatorConfig ec = make_estimator_config(cfg, R_scale, mode == "dd-robust");
  ec.validate(4, 2);

  RunSeries series;
  series.estimator = mode;
  series.R_scale = R_scale;
  series.seed = seed;
  series.x_true = online.x.samples();
  series.x_hat.resize(4, cfg.T + 1);

  EstimatorState state(cfg.x0_prior);
  HankelBlocks blocks;
  IdentifiedModel model;
  if (mode == "model-based") {
    model = identify_lsq(ds);
  } else {
    blocks = HankelBlocks::build(ds, cfg.L);
  }

  for (int t = 0; t <= cfg.T; ++t) {
    std::optional<Eigen::VectorXd> nu, ny;
    if (t < cfg.T) {
      nu = online.u.at(t);
      ny = online.y_measured.at(t);
    }
    const StepResult r = mode == "model-based"
                             ? model_based_step(state, model, ec, nu, ny)
                             : estimator_step(state, blocks, ec, nu, ny);
    series.x_hat.col(t) = r.x_hat;
    series.err_norm.push_back((online.x.at(t) - r.x_hat).norm());
    series.cost.push_back(r.cost);
    series.status.push_back(r.degraded ? "degraded" : to_string(r.status));
    series.solve_ms.push_back(r.solve_ms);
  }
  series.bound = try_bound_column(cfg, ds, online, mode, ec);
  return series;
}

double rmse(const RunSeries& series, int state_index, int window_start, int window_end) {
  if (window_start < 0 || window_end > series.length() || window_start >= window_end) {
    throw std::invalid_argument("rmse: empty or out-of-range window");
  }
  if (state_index < 0 || state_index >= series.x_true.rows()) {
    throw std::invalid_argument("rmse: bad state index");
  }
  double acc = 0.0;
  for (int t = window_start; t < window_end; ++t) {
    const double e = series.x_true(state_index, t) - series.x_hat(state_index, t);
    acc += e * e;
  }
  return std::sqrt(acc / (window_end - window_start));
}

void emit_csv(const RunSeries& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_csv: cannot open " + path);
  const Eigen::Index n = series.x_true.rows();
  const bool has_bound = !series.bound.empty();
  out << "t";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",x_true_" << i;
  for (Eigen::Index i = 1; i <= n; ++i) out << ",x_hat_" << i;
  out << ",err_norm";
  if (has_bound) out << ",bound";
  out << ",cost,status\n";
  for (int t = 0; t < series.length(); ++t) {
    out << t;
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << fmt(series.x_true(i, t));
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << fmt(series.x_hat(i, t));
    out << ',' << fmt(series.err_norm[static_cast<std::size_t>(t)]);
    if (has_bound) out << ',' << fmt(series.bound[static_cast<std::size_t>(t)]);
    out << ',' << fmt(series.cost[static_cast<std::size_t>(t)]);
    out << ',' << series.status[static_cast<std::size_t>(t)] << "\n";
  }
}

void emit_svg_lineplot(const std::vector<PlotSeries>& series, const std::string& title,
                       const std::string& path) {
  if (series.empty()) throw std::invalid_argument("emit_svg_lineplot: no series");
  const int W = 800, H = 400, ml = 60, mr = 150, mt = 40, mb = 40;
  double ymin = std::numeric_limits<double>::infinity();
  double ymax = -std::numeric_limits<double>::infinity();
  std::size_t len = 0;
  for (const auto& s : series) {
    len = std::max(len, s.values.size());
    for (double v : s.values) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (len < 2) throw std::invalid_argument("emit_svg_lineplot: series too short");
  if (ymax <= ymin) ymax = ymin + 1.0;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b"};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_svg_lineplot: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
      << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << H - mb << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << ml - 6 << "\" y=\"" << H - mb << "\" text-anchor=\"end\" "
      << "font-size=\"11\">" << fmt(ymin) << "</text>\n";
  out << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 4 << "\" text-anchor=\"end\" "
      << "font-size=\"11\">" << fmt(ymax) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    out << "<polyline fill=\"none\" stroke=\"" << colors[k % 6]
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const double x =
          ml + static_cast<double>(i) / static_cast<double>(len - 1) * (W - ml - mr);
      const double y =
          H - mb - (s.values[i] - ymin) / (ymax - ymin) * (H - mt - mb);
      out << fmt(x) << ',' << fmt(y) << ' ';
    }
    out << "\"/>\n";
    out << "<text x=\"" << W - mr + 10 << "\" y=\"" << mt + 16 * (k + 1)
        << "\" font-size=\"12\" fill=\"" << colors[k % 6] << "\">" << s.label
        << "</text>\n";
  }
  out << "</svg>\n";
}

AggregateRow aggregate_run(const RunSeries& series) {
  AggregateRow row;
  row.estimator = series.estimator;
  row.R_scale = series.R_scale;
  row.seed = series.seed;
  const int T = series.length();
  const int start = T / 2;  // steady-state window, final half of the run
  for (Eigen::Index i = 0; i < series.x_true.rows(); ++i) {
    row.rmse_per_state.push_back(rmse(series, static_cast<int>(i), start, T));
  }
  double acc = 0.0;
  for (double ms : series.solve_ms) acc += ms;
  row.mean_solve_ms = acc / T;
  return row;
}

void emit_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_aggregate_csv: cannot open " + path);
  out << "estimator,R_setting,seed";
  const std::size_t nstates = rows.empty() ? 4 : rows.front().rmse_per_state.size();
  for (std::size_t i = 1; i <= nstates; ++i) out << ",rmse_x" << i;
  out << ",mean_solve_ms\n";
  for (const auto& r : rows) {
    out << r.estimator << ',' << fmt(r.R_scale) << ',' << r.seed;
    for (double v : r.rmse_per_state) out << ',' << fmt(v);
    out << ',' << fmt(r.mean_solve_ms) << "\n";
  }
}

std::vector<AggregateRow> run_benchmark(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  std::vector<AggregateRow> rows;
  for (const auto& mode : cfg.modes) {
    for (double R_scale : cfg.R_scales) {
      std::vector<RunSeries> first_seed_runs;
      for (std::uint64_t seed : cfg.seeds) {
        RunSeries series = run_estimator(cfg, mode, R_scale, seed);
        std::ostringstream name;
        name << mode << "_R" << fmt(R_scale) << "_seed" << seed << ".csv";
        emit_csv(series, (fs::path(cfg.out_dir) / name.str()).string());
        rows.push_back(aggregate_run(series));
        if (seed == cfg.seeds.front()) first_seed_runs.push_back(std::move(series));
      }
      for (const auto& series : first_seed_runs) {
        for (Eigen::Index i = 0; i < series.x_true.rows(); ++i) {
          std::vector<PlotSeries> plot;
          PlotSeries truth{"true", {}};
          PlotSeries est{series.estimator, {}};
          for (int t = 0; t < series.length(); ++t) {
            truth.values.push_back(series.x_true(i, t));
            est.values.push_back(series.x_hat(i, t));
          }
          plot.push_back(std::move(truth));
          plot.push_back(std::move(est));
          std::ostringstream name;
          name << mode << "_R" << fmt(R_scale) << "_state" << (i + 1) << ".svg";
          emit_svg_lineplot(plot, name.str(),
                            (fs::path(cfg.out_dir) / name.str()).string());
        }
      }
    }
  }
  emit_aggregate_csv(rows, (fs::path(cfg.out_dir) / "aggregate.csv").string());
  return rows;
}

}  // namespace ddmhe
