#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "splvm/data.hpp"
#include "splvm/model.hpp"
#include "splvm/random.hpp"

namespace splvm {

struct SimulationSettings {
  Index individuals = 500;
  FactorStructure structure;
  Eigen::MatrixXd loadings;        // J x Q, must respect the mask
  std::vector<int> cutoff_counts;  // per outcome, each >= 1
  Eigen::MatrixXd covariates;      // optional I x P
  Eigen::VectorXd beta;            // optional, length P
  std::uint64_t seed = 1;
};

struct GroundTruth {
  Eigen::MatrixXd H;       // I x Q factor scores
  Eigen::MatrixXd Z;       // I x J latent responses
  Eigen::MatrixXd Lambda;  // J x Q
  std::vector<std::vector<double>> cutoffs;
  Eigen::MatrixXd X;
  Eigen::VectorXd beta;
};

struct SimulatedData {
  MixedOutcomeMatrix y;
  GroundTruth truth;
};

/// eta_i ~ N((x_i^T beta, 0, ..., 0), I_Q), z_i ~ N(Lambda eta_i, I_J); each
/// outcome is cut at cutoff_counts[j] points drawn uniformly over the range
/// of its latent responses, giving codes 0..cutoff_counts[j].
/// Throws ValidationError on a mask violation or inconsistent sizes.
SimulatedData generate_bifactor_data(const SimulationSettings& settings);

struct SimulationLayout {
  FactorStructure structure;
  Eigen::MatrixXd loadings;
  std::vector<int> cutoff_counts;
};

/// Fifteen outcomes on a general factor; outcomes 1, 13, 14, 15 on a second
/// factor and 3, 4, 6, 8 on a third. Free loadings take `loading`. Default
/// cutoff counts give 2 (outcome 1) to 30 (outcome 9) categories.
SimulationLayout paper_sim_structure(double loading = 0.6);

/// I x P independent normals, standardized column-wise.
Eigen::MatrixXd simulate_covariates(Index individuals, Index covariates, RngStream& rng);

nlohmann::json truth_to_json(const GroundTruth& truth);

}  // namespace splvm
