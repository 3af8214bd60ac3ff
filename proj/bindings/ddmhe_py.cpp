#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ddmhe/baseline.hpp"
#include "ddmhe/euoss.hpp"
#include "ddmhe/experiment.hpp"
#include "ddmhe/mhe.hpp"
#include "ddmhe/plant.hpp"
#include "ddmhe/solver.hpp"
#include "ddmhe/trajectory.hpp"

namespace py = pybind11;
using namespace ddmhe;

PYBIND11_MODULE(_ddmhe, m) {
  m.doc() = "Data-driven moving horizon estimation";

  m.def(
      "build_hankel",
      [](const Eigen::MatrixXd& data, int depth) {
        return build_hankel(Trajectory(data), depth).data;
      },
      py::arg("data"), py::arg("depth"));

  m.def(
      "persistency_rank",
      [](const Eigen::MatrixXd& u, int depth) {
        const RankReport r = is_persistently_exciting(Trajectory(u), depth);
        return py::make_tuple(r.numerical_rank, r.matrix_rows, r.full_row_rank);
      },
      py::arg("u"), py::arg("depth"));

  m.def("four_tank_linear", []() {
    const StateSpaceModel md = four_tank_linear();
    return py::make_tuple(md.A, md.B, md.C, md.D);
  });

  m.def(
      "solve_qp",
      [](const Eigen::MatrixXd& H, const Eigen::VectorXd& f, const Eigen::MatrixXd& A_eq,
         const Eigen::VectorXd& b_eq, const Eigen::MatrixXd& A_in,
         const Eigen::VectorXd& lb, const Eigen::VectorXd& ub) {
        QuadraticProgram qp{H, f, A_eq, b_eq, A_in, lb, ub};
        const SolveResult r = solve_qp(qp);
        return py::make_tuple(r.z, to_string(r.status), r.objective);
      },
      py::arg("H"), py::arg("f"), py::arg("A_eq"), py::arg("b_eq"), py::arg("A_in"),
      py::arg("lb"), py::arg("ub"));

  m.def("c_J", &c_J, py::arg("t"), py::arg("p0"), py::arg("r0"), py::arg("rho"));
  m.def("cJ_is_decreasing", &cJ_is_decreasing, py::arg("p0"), py::arg("r0"),
        py::arg("rho"));

  m.def(
      "euoss_constants",
      [](const std::string& config_json, std::uint64_t seed) {
        const ExperimentConfig cfg = parse_experiment_config(config_json);
        const DataSet ds = make_offline_dataset(cfg, seed);
        const EUossConstants c = estimate_euoss_constants(ds);
        py::dict out;
        out["p0"] = c.p0;
        out["r0"] = c.r0;
        out["eta"] = c.eta;
        out["A_hat"] = c.A_hat;
        out["C_hat"] = c.C_hat;
        return out;
      },
      py::arg("config_json"), py::arg("seed"));

  m.def(
      "run_estimator",
      [](const std::string& config_json, const std::string& mode, double R_scale,
         std::uint64_t seed) {
        const ExperimentConfig cfg = parse_experiment_config(config_json);
        const RunSeries s = run_estimator(cfg, mode, R_scale, seed);
        py::dict out;
        out["x_true"] = s.x_true;
        out["x_hat"] = s.x_hat;
        out["err_norm"] = s.err_norm;
        out["bound"] = s.bound;
        out["cost"] = s.cost;
        out["status"] = s.status;
        return out;
      },
      py::arg("config_json"), py::arg("mode"), py::arg("R_scale"), py::arg("seed"));

  m.def(
      "identify_model",
      [](const std::string& config_json, std::uint64_t seed) {
        const ExperimentConfig cfg = parse_experiment_config(config_json);
        const DataSet ds = make_offline_dataset(cfg, seed);
        const IdentifiedModel im = identify_lsq(ds);
        py::dict out;
        out["A"] = im.model.A;
        out["B"] = im.model.B;
        out["C"] = im.model.C;
        out["residual_state"] = im.residual_state;
        out["residual_output"] = im.residual_output;
        return out;
      },
      py::arg("config_json"), py::arg("seed"));
}
