#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "splvm/model.hpp"
#include "splvm/sampler.hpp"

namespace splvm {

/// Maps a working state to the identified scale:
///   eta_i = Psi^{-1/2} (eta*_i - (alpha, 0, ..., 0)),  Lambda = Sigma^{-1/2} Lambda* Psi^{1/2},
///   beta = beta* / psi_1.
/// Without regression alpha is ignored and beta is empty.
InferentialDraw to_inferential(const WorkingState& state, bool regression_enabled);
std::vector<InferentialDraw> to_inferential(const ChainOutput& chain);

/// Latent responses on the identified scale, Sigma^{-1/2} (z*_i - Lambda* (alpha, 0, ..., 0)^T).
/// The alpha term is only present under regression.
Eigen::MatrixXd inferential_latent(const WorkingState& state, bool regression_enabled = false);

struct RelabelResult {
  std::vector<InferentialDraw> draws;
  /// Per draw, per factor: the total sign (+1 or -1) applied to that column.
  std::vector<std::vector<int>> signs;
  /// Squared-Frobenius loss against the reference after each pass; the first
  /// entry is the loss of the unmodified draws against their mean.
  std::vector<double> loss_trace;
  std::size_t iterations = 0;
  /// Factors flipped in every draw by the reporting convention (largest
  /// absolute mean loading positive).
  std::vector<int> convention_flips;
};

/// Resolves reflection invariance. Starting from the element-wise mean as the
/// reference, each draw's factor column is flipped when the flipped column is
/// closer to the reference column; the reference is then recomputed. Repeats
/// until no draw changes. Flips apply to Lambda and H columns; a flip of the
/// primary factor also negates beta, whose sign is tied to that factor.
/// Throws ValidationError on fewer than two draws, inconsistent shapes or a
/// draw that violates `structure` (when given).
RelabelResult relabel_signs(std::vector<InferentialDraw> draws, const FactorStructure* structure = nullptr);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double median = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};

struct NamedChain {
  std::string name;
  std::vector<double> values;
};

/// Type-7 (linear interpolation) sample quantile.
double sample_quantile(std::vector<double> values, double p);

ParameterSummary summarize_chain(const std::string& name, std::span<const double> values);

std::string loading_name(Index j, Index q);
std::string beta_name(Index p);

/// One chain per free loading (row-major over outcomes) and per coefficient.
std::vector<NamedChain> parameter_chains(const std::vector<InferentialDraw>& draws, const FactorStructure& structure);

/// Throws ValidationError on an empty draw sequence.
std::vector<ParameterSummary> summarize(const std::vector<InferentialDraw>& draws, const FactorStructure& structure);
std::vector<ParameterSummary> summarize(const std::vector<NamedChain>& chains);

nlohmann::json summary_to_json(const std::vector<ParameterSummary>& rows);
/// Aligned text table with columns parameter, mean, median, q2.5, q97.5.
std::string summary_to_text(const std::vector<ParameterSummary>& rows);

}  // namespace splvm
