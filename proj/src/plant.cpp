#include "ddmhe/plant.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ddmhe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Deterministic draws on top of mt19937_64; std:: distributions are
// implementation-defined and would break cross-toolchain reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  double gaussian(double mean, double stddev) {
    if (!have_spare_) {
      double u1 = uniform01();
      while (u1 <= 0.0) u1 = uniform01();
      const double u2 = uniform01();
      const double r = std::sqrt(-2.0 * std::log(u1));
      spare_ = r * std::sin(2.0 * M_PI * u2);
      have_spare_ = true;
      return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }
    have_spare_ = false;
    return mean + stddev * spare_;
  }

  double truncated_gaussian(double mean, double stddev, double bound) {
    for (;;) {
      const double v = gaussian(mean, stddev);
      if (std::abs(v - mean) <= bound) return v;
    }
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

double draw(Rng& rng, const NoiseSpec& spec) {
  switch (spec.kind) {
    case NoiseSpec::Kind::none:
      return 0.0;
    case NoiseSpec::Kind::uniform:
      return rng.uniform(spec.a, spec.b);
    case NoiseSpec::Kind::gaussian:
      return rng.gaussian(spec.mean, spec.stddev);
    case NoiseSpec::Kind::truncated_gaussian:
      return rng.truncated_gaussian(spec.mean, spec.stddev, spec.bound);
  }
  throw std::logic_error("draw: unreachable");
}

}  // namespace

void StateSpaceModel::validate() const {
  if (A.rows() != A.cols()) throw std::invalid_argument("StateSpaceModel: A must be square");
  if (B.rows() != A.rows()) throw std::invalid_argument("StateSpaceModel: B row count");
  if (C.cols() != A.rows()) throw std::invalid_argument("StateSpaceModel: C column count");
  if (D.rows() != C.rows() || D.cols() != B.cols()) {
    throw std::invalid_argument("StateSpaceModel: D dimensions");
  }
}

StateSpaceModel four_tank_linear() {
  StateSpaceModel sys;
  sys.A.resize(4, 4);
  sys.A << 0.921, 0, 0.041, 0,  //
      0, 0.918, 0, 0.033,       //
      0, 0, 0.924, 0,           //
      0, 0, 0, 0.937;
  sys.B.resize(4, 2);
  sys.B << 0.017, 0.001,  //
      0.001, 0.023,       //
      0, 0.061,           //
      0.072, 0;
  sys.C.resize(2, 4);
  sys.C << 1, 0, 0, 0,  //
      0, 1, 0, 0;
  sys.D = Eigen::MatrixXd::Zero(2, 2);
  return sys;
}

NoiseSpec NoiseSpec::none_spec() { return NoiseSpec{}; }

NoiseSpec NoiseSpec::uniform_spec(double a, double b, std::uint64_t seed) {
  NoiseSpec s;
  s.kind = Kind::uniform;
  s.a = a;
  s.b = b;
  s.seed = seed;
  return s;
}

NoiseSpec NoiseSpec::gaussian_spec(double mean, double stddev, std::uint64_t seed) {
  NoiseSpec s;
  s.kind = Kind::gaussian;
  s.mean = mean;
  s.stddev = stddev;
  s.seed = seed;
  return s;
}

NoiseSpec NoiseSpec::truncated_gaussian_spec(double mean, double stddev, double bound,
                                             std::uint64_t seed) {
  NoiseSpec s;
  s.kind = Kind::truncated_gaussian;
  s.mean = mean;
  s.stddev = stddev;
  s.bound = bound;
  s.seed = seed;
  return s;
}

double NoiseSpec::amplitude_bound() const {
  switch (kind) {
    case Kind::none:
      return 0.0;
    case Kind::uniform:
      return std::max(std::abs(a), std::abs(b));
    case Kind::gaussian:
      return kInf;
    case Kind::truncated_gaussian:
      return std::abs(mean) + bound;
  }
  throw std::logic_error("amplitude_bound: unreachable");
}

void NoiseSpec::validate() const {
  switch (kind) {
    case Kind::none:
      return;
    case Kind::uniform:
      if (!(a <= b)) throw std::invalid_argument("NoiseSpec: uniform requires a <= b");
      return;
    case Kind::gaussian:
      if (!(stddev >= 0.0)) throw std::invalid_argument("NoiseSpec: stddev must be >= 0");
      return;
    case Kind::truncated_gaussian:
      if (!(stddev >= 0.0)) throw std::invalid_argument("NoiseSpec: stddev must be >= 0");
      if (!(bound > 0.0)) throw std::invalid_argument("NoiseSpec: truncation bound must be > 0");
      return;
  }
}

Eigen::MatrixXd sample_noise(const NoiseSpec& spec, int count, int dim) {
  spec.validate();
  if (count < 0 || dim < 1) throw std::invalid_argument("sample_noise: bad count or dim");
  Rng rng(spec.seed);
  Eigen::MatrixXd out(dim, count);
  for (int j = 0; j < count; ++j) {
    for (int i = 0; i < dim; ++i) out(i, j) = draw(rng, spec);
  }
  return out;
}

SimRecord simulate_lti(const StateSpaceModel& model, const Eigen::VectorXd& x0,
                       const Trajectory& u_seq, const NoiseSpec& noise) {
  model.validate();
  if (x0.size() != model.n()) throw std::invalid_argument("simulate_lti: x0 size");
  if (u_seq.dim() != model.m()) throw std::invalid_argument("simulate_lti: input dim");
  const int T = u_seq.length();
  Eigen::MatrixXd x(model.n(), T + 1);
  Eigen::MatrixXd y(model.p(), T + 1);
  x.col(0) = x0;
  for (int t = 0; t < T; ++t) {
    y.col(t) = model.C * x.col(t) + model.D * u_seq.at(t);
    x.col(t + 1) = model.A * x.col(t) + model.B * u_seq.at(t);
  }
  y.col(T) = model.C * x.col(T);  // final output with zero feedthrough input
  const Eigen::MatrixXd v = sample_noise(noise, T + 1, model.p());
  return SimRecord{u_seq, Trajectory(x), Trajectory(y), Trajectory(y + v), Trajectory(v)};
}

void FourTankParams::validate() const {
  for (double area : {a1, a2, a3, a4, A1, A2, A3, A4}) {
    if (!(area > 0.0)) throw std::invalid_argument("FourTankParams: areas must be > 0");
  }
  if (!(gamma1 > 0.0 && gamma1 < 1.0 && gamma2 > 0.0 && gamma2 < 1.0)) {
    throw std::invalid_argument("FourTankParams: valve splits must lie in (0, 1)");
  }
  if (!(g > 0.0 && dt > 0.0)) throw std::invalid_argument("FourTankParams: g and dt must be > 0");
}

FourTankParams four_tank_default_params() {
  // Representative quadruple-tank values sized so that inputs in (0, 20)
  // keep the levels in single-digit range; not taken from any paper.
  FourTankParams p;
  p.a1 = p.a2 = p.a3 = p.a4 = 0.04;
  p.A1 = p.A2 = p.A3 = p.A4 = 30.0;
  p.gamma1 = 0.45;
  p.gamma2 = 0.40;
  p.g = 981.0;
  p.dt = 1.0;
  return p;
}

namespace {

Eigen::Vector4d tank_field(const FourTankParams& pr, const Eigen::Vector4d& x,
                           const Eigen::Vector2d& u) {
  auto out = [&](double level) { return std::sqrt(2.0 * pr.g * std::max(level, 0.0)); };
  Eigen::Vector4d dx;
  dx(0) = -pr.a1 / pr.A1 * out(x(0)) + pr.a3 / pr.A1 * out(x(2)) + pr.gamma1 / pr.A1 * u(0);
  dx(1) = -pr.a2 / pr.A2 * out(x(1)) + pr.a4 / pr.A2 * out(x(3)) + pr.gamma2 / pr.A2 * u(1);
  dx(2) = -pr.a3 / pr.A3 * out(x(2)) + (1.0 - pr.gamma2) / pr.A3 * u(1);
  dx(3) = -pr.a4 / pr.A4 * out(x(3)) + (1.0 - pr.gamma1) / pr.A4 * u(0);
  return dx;
}

}  // namespace

Eigen::VectorXd four_tank_nonlinear_step(const FourTankParams& params,
                                         const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& u) {
  params.validate();
  if (x.size() != 4 || u.size() != 2) {
    throw std::invalid_argument("four_tank_nonlinear_step: expects 4 states and 2 inputs");
  }
  if (!x.allFinite() || !u.allFinite()) {
    throw std::invalid_argument("four_tank_nonlinear_step: nonfinite input");
  }
  const Eigen::Vector4d x0 = x;
  const Eigen::Vector2d uu = u;
  const double h = params.dt;
  const Eigen::Vector4d k1 = tank_field(params, x0, uu);
  const Eigen::Vector4d k2 = tank_field(params, x0 + 0.5 * h * k1, uu);
  const Eigen::Vector4d k3 = tank_field(params, x0 + 0.5 * h * k2, uu);
  const Eigen::Vector4d k4 = tank_field(params, x0 + h * k3, uu);
  Eigen::Vector4d next = x0 + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return next.cwiseMax(0.0);
}

SimRecord simulate_four_tank_nonlinear(const FourTankParams& params,
                                       const Eigen::VectorXd& x0, const Trajectory& u_seq,
                                       const NoiseSpec& noise) {
  params.validate();
  if (x0.size() != 4 || u_seq.dim() != 2) {
    throw std::invalid_argument("simulate_four_tank_nonlinear: dimension mismatch");
  }
  const int T = u_seq.length();
  Eigen::MatrixXd x(4, T + 1);
  Eigen::MatrixXd y(2, T + 1);
  x.col(0) = x0;
  for (int t = 0; t < T; ++t) {
    y.col(t) = x.col(t).head<2>();
    x.col(t + 1) = four_tank_nonlinear_step(params, x.col(t), u_seq.at(t));
  }
  y.col(T) = x.col(T).head<2>();
  const Eigen::MatrixXd v = sample_noise(noise, T + 1, 2);
  return SimRecord{u_seq, Trajectory(x), Trajectory(y), Trajectory(y + v), Trajectory(v)};
}

DataSet collect_offline_data(const PlantVariant& plant, const NoiseSpec& input_spec, int N,
                             const NoiseSpec& state_noise, const NoiseSpec& output_noise,
                             const Eigen::VectorXd& x0_init) {
  if (N < 2) throw std::invalid_argument("collect_offline_data: N must be >= 2");
  const bool linear = std::holds_alternative<StateSpaceModel>(plant);
  const int m = linear ? std::get<StateSpaceModel>(plant).m() : 2;
  const int n = linear ? std::get<StateSpaceModel>(plant).n() : 4;
  const int p = linear ? std::get<StateSpaceModel>(plant).p() : 2;

  const Trajectory u(sample_noise(input_spec, N, m));
  Eigen::VectorXd x0 = x0_init;
  if (x0.size() == 0) x0 = Eigen::VectorXd::Zero(n);
  if (x0.size() != n) {
    throw std::invalid_argument("collect_offline_data: x0 has the wrong dimension");
  }
  SimRecord rec =
      linear ? simulate_lti(std::get<StateSpaceModel>(plant), x0, u, NoiseSpec::none_spec())
             : simulate_four_tank_nonlinear(std::get<FourTankParams>(plant), x0, u,
                                            NoiseSpec::none_spec());

  const Eigen::MatrixXd eps_x = sample_noise(state_noise, N, n);
  const Eigen::MatrixXd eps_y = sample_noise(output_noise, N - 1, p);

  DataSet ds{Trajectory(u.samples()),
             Trajectory(rec.x.samples().leftCols(N) + eps_x),
             Trajectory(rec.y_clean.samples().leftCols(N - 1) + eps_y),
             Trajectory(rec.x.samples().leftCols(N)),
             Trajectory(rec.y_clean.samples().leftCols(N - 1)),
             state_noise.amplitude_bound(),
             output_noise.amplitude_bound(),
             input_spec.seed};
  return ds;
}

void write_dataset_csv(const DataSet& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset_csv: cannot open " + path);
  out.precision(17);
  out << "t";
  for (int i = 1; i <= ds.m(); ++i) out << ",u_" << i;
  for (int i = 1; i <= ds.n(); ++i) out << ",x_" << i;
  for (int i = 1; i <= ds.p(); ++i) out << ",y_" << i;
  out << "\n";
  for (int t = 0; t < ds.N(); ++t) {
    out << t;
    for (int i = 0; i < ds.m(); ++i) out << "," << ds.u_d.samples()(i, t);
    for (int i = 0; i < ds.n(); ++i) out << "," << ds.x_d_noisy.samples()(i, t);
    for (int i = 0; i < ds.p(); ++i) {
      if (t < ds.N() - 1) {
        out << "," << ds.y_d_noisy.samples()(i, t);
      } else {
        out << ",nan";  // outputs are recorded only up to N-2
      }
    }
    out << "\n";
  }
  std::ofstream meta(path + ".meta");
  if (!meta) throw std::runtime_error("write_dataset_csv: cannot open sidecar for " + path);
  meta.precision(17);
  meta << "N=" << ds.N() << "\n"
       << "n=" << ds.n() << "\n"
       << "m=" << ds.m() << "\n"
       << "p=" << ds.p() << "\n"
       << "eps_x_bound=" << ds.eps_x_bound << "\n"
       << "eps_y_bound=" << ds.eps_y_bound << "\n"
       << "seed=" << ds.seed << "\n";
}

DataSet read_dataset_csv(const std::string& path) {
  std::ifstream meta(path + ".meta");
  if (!meta) throw std::runtime_error("read_dataset_csv: missing sidecar for " + path);
  int N = 0, n = 0, m = 0, p = 0;
  double eps_x = 0.0, eps_y = 0.0;
  std::uint64_t seed = 0;
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "N") N = std::stoi(val);
    else if (key == "n") n = std::stoi(val);
    else if (key == "m") m = std::stoi(val);
    else if (key == "p") p = std::stoi(val);
    else if (key == "eps_x_bound") eps_x = std::stod(val);
    else if (key == "eps_y_bound") eps_y = std::stod(val);
    else if (key == "seed") seed = std::stoull(val);
  }
  if (N < 2 || n < 1 || m < 1 || p < 1) {
    throw std::runtime_error("read_dataset_csv: malformed sidecar for " + path);
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_dataset_csv: cannot open " + path);
  std::getline(in, line);  // header
  Eigen::MatrixXd u(m, N), x(n, N), y(p, N - 1);
  for (int t = 0; t < N; ++t) {
    if (!std::getline(in, line)) {
      throw std::runtime_error("read_dataset_csv: truncated file " + path);
    }
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // t
    for (int i = 0; i < m; ++i) {
      std::getline(ss, cell, ',');
      u(i, t) = std::stod(cell);
    }
    for (int i = 0; i < n; ++i) {
      std::getline(ss, cell, ',');
      x(i, t) = std::stod(cell);
    }
    for (int i = 0; i < p; ++i) {
      std::getline(ss, cell, ',');
      if (t < N - 1) y(i, t) = std::stod(cell);
    }
  }
  DataSet ds{Trajectory(u), Trajectory(x),     Trajectory(y), std::nullopt,
             std::nullopt,  eps_x, eps_y, seed};
  return ds;
}

}  // namespace ddmhe
