#pragma once

#include <iosfwd>

#include "ddmhe/mhe.hpp"
#include "ddmhe/plant.hpp"

namespace ddmhe {

struct IdentifiedModel {
  StateSpaceModel model;
  double residual_state = 0.0;   // Frobenius misfit of the state recursion
  double residual_output = 0.0;  // Frobenius misfit of the output map
};

/// Least-squares fit [A B] = X1 pinv([X0; U0]) from the noisy offline data.
/// C is regressed on the states alone unless feedthrough estimation is
/// requested, in which case [C D] = Y0 pinv([X0; U0]).
IdentifiedModel identify_lsq(const DataSet& dataset, bool estimate_feedthrough = false);

/// Model-based MHE sharing cost structure and tuning with the data-driven
/// scheme: variables are the state window and the output slacks, the dynamics
/// enter as equality constraints.
QuadraticProgram build_model_based_mhe(const IdentifiedModel& model,
                                       const EstimatorState& state,
                                       const EstimatorConfig& cfg);

/// Prediction-form step of the model-based estimator; mirrors estimator_step.
StepResult model_based_step(EstimatorState& state, const IdentifiedModel& model,
                            const EstimatorConfig& cfg,
                            const std::optional<Eigen::VectorXd>& new_u,
                            const std::optional<Eigen::VectorXd>& new_y);

/// Plain-text matrix dump for inspection and diffing against the true plant.
void dump_model(const IdentifiedModel& model, std::ostream& out);

}  // namespace ddmhe
