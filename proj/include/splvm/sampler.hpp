#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "splvm/data.hpp"
#include "splvm/model.hpp"
#include "splvm/random.hpp"

namespace splvm {

enum class Algorithm {
  parameter_expanded,  // working model with free diagonal Sigma and Psi
  standard_gibbs,      // identified model, Sigma = I and Psi = I held fixed
};

std::string to_string(Algorithm algorithm);
/// Accepts "px" / "parameter_expanded" and "standard" / "standard_gibbs".
Algorithm parse_algorithm(const std::string& name);

struct SamplerConfig {
  std::size_t n_iterations = 50000;
  std::size_t burn_in = 10000;
  std::size_t thin = 10;
  std::uint64_t seed = 1;
  Algorithm algorithm = Algorithm::parameter_expanded;
  /// Maximum number of snapshots that keep their latent responses, evenly
  /// spaced over the retained chain. The remaining snapshots drop Z_star.
  std::size_t keep_latent = std::numeric_limits<std::size_t>::max();

  std::size_t snapshot_count() const { return (n_iterations - burn_in) / thin; }
  bool too_short() const { return snapshot_count() < 100; }
  /// Throws ValidationError on inconsistent settings.
  void validate() const;
};

struct GaussianConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct GammaConditional {
  double shape = 0.0;
  double rate = 0.0;
};

/// Starting state: normal scores for Z*, zero factors, free loadings at 0.5,
/// unit working variances, zero regression coefficients.
WorkingState initial_state(const MixedOutcomeMatrix& y, const FactorStructure& structure,
                           const RegressionSpec& regression, RngStream& rng);

/// Step 1. Resamples every z*_ij from its truncated normal full conditional,
/// column by column with ascending i. Returns the number of cells whose
/// interval was numerically empty and were placed at the midpoint instead.
std::size_t draw_latent_responses(WorkingState& state, const MixedOutcomeMatrix& y, RankIndex& index,
                                  RngStream& rng);
std::size_t draw_latent_responses(WorkingState& state, const MixedOutcomeMatrix& y, RngStream& rng);

/// Step 2 conditional of eta*_i. Under regression the prior mean of the
/// primary factor is alpha + x_i^T beta*.
GaussianConditional factor_conditional(const WorkingState& state, const RegressionSpec& regression, Index i);
void draw_factors(WorkingState& state, const RegressionSpec& regression, RngStream& rng);

/// Step 3 conditional of the free loadings of outcome j, ordered as
/// FactorStructure::free_factors(j).
GaussianConditional loading_conditional(const WorkingState& state, const FactorStructure& structure,
                                        const Hyperparameters& hyper, Index j);
void draw_loadings(WorkingState& state, const FactorStructure& structure, const Hyperparameters& hyper,
                   RngStream& rng);

/// Step 4 conditional of psi_q^{-2}.
GammaConditional psi_conditional(const WorkingState& state, const Hyperparameters& hyper,
                                 const RegressionSpec& regression, Index q);
void draw_psi_inverse(WorkingState& state, const Hyperparameters& hyper, const RegressionSpec& regression,
                      RngStream& rng);

/// Step 5 conditional of sigma_j^{-2}.
GammaConditional sigma_conditional(const WorkingState& state, const Hyperparameters& hyper, Index j);
void draw_sigma_inverse(WorkingState& state, const Hyperparameters& hyper, RngStream& rng);

/// Regression step: beta* given alpha, then alpha given beta*.
GaussianConditional beta_conditional(const WorkingState& state, const RegressionSpec& regression,
                                     const Hyperparameters& hyper);
GaussianConditional alpha_conditional(const WorkingState& state, const RegressionSpec& regression,
                                      const Hyperparameters& hyper);
/// With `draw_alpha` false alpha stays at its current value (standard Gibbs).
void draw_regression(WorkingState& state, const RegressionSpec& regression, const Hyperparameters& hyper,
                     RngStream& rng, bool draw_alpha = true);

struct ChainOutput {
  std::vector<WorkingState> snapshots;
  /// 1-based iteration of each snapshot.
  std::vector<std::size_t> iterations;
  SamplerConfig config;
  Hyperparameters hyper;
  bool regression_enabled = false;
  std::size_t interval_repairs = 0;

  bool has_latent(std::size_t s) const { return snapshots[s].Z_star.size() > 0; }
};

/// Called after every full scan, burn-in included.
using IterationObserver = std::function<void(std::size_t iteration, const WorkingState& state)>;

/// Runs the Gibbs sampler selected by config.algorithm. Records every
/// thin-th state after burn-in. Deterministic given config.seed.
ChainOutput run_chain(const MixedOutcomeMatrix& y, const FactorStructure& structure, const Hyperparameters& hyper,
                      const RegressionSpec& regression, const SamplerConfig& config,
                      const IterationObserver& observer = {});

/// Standard Gibbs baseline: run_chain with Sigma = I and Psi = I held fixed.
ChainOutput run_chain_standard(const MixedOutcomeMatrix& y, const FactorStructure& structure,
                               const Hyperparameters& hyper, const RegressionSpec& regression,
                               SamplerConfig config, const IterationObserver& observer = {});

}  // namespace splvm
