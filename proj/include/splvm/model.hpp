#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "splvm/data.hpp"

namespace splvm {

/// J x Q loading mask. `true` marks a free loading, `false` a structural
/// zero. Factor 0 is the primary (general) factor.
struct FactorStructure {
  BoolMatrix mask;
  /// When set, every outcome must load on the primary factor.
  bool bifactor = false;

  Index outcomes() const { return mask.rows(); }
  Index factors() const { return mask.cols(); }
  Index structural_zero_count() const { return mask.size() - mask.count(); }
  Index free_count() const { return mask.count(); }
  /// Factor indices with a free loading for outcome j, ascending.
  std::vector<Index> free_factors(Index j) const;

  /// All-free single-factor structure.
  static FactorStructure single_factor(Index outcomes);
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

/// Checks the identification preconditions and reports every violated rule.
ValidationReport validate_structure(const FactorStructure& structure);

/// Prior hyperparameters. Gamma priors use (shape, rate). The loading,
/// regression and alpha priors are exchangeable: one mean and one variance
/// shared by every element, giving diagonal covariance matrices.
struct Hyperparameters {
  double phi_psi = 2.0;
  double nu_psi = 0.5;
  double phi_sigma = 2.0;
  double nu_sigma = 1.0;
  double m_lambda = 0.0;
  double s_lambda = 1.0;
  double m_beta = 0.0;
  double s_beta = 100.0;
  double m_alpha = 0.0;
  double s_alpha2 = 100.0;
};

Hyperparameters default_hyperparameters();
/// Throws ValidationError unless every shape, rate and variance is positive and finite.
void validate_hyperparameters(const Hyperparameters& hyper);

/// Covariates for the regression of the primary factor on x_i.
struct RegressionSpec {
  Eigen::MatrixXd X;
  std::vector<std::string> covariate_names;
  bool enabled = false;

  Index covariates() const { return enabled ? X.cols() : 0; }
  /// Throws ValidationError on a row-count mismatch or non-finite entries.
  void validate(Index individuals) const;

  static RegressionSpec disabled() { return {}; }
};

/// Center and scale each column to mean 0, standard deviation 1.
Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& x);

/// One state of the overparameterized working model.
struct WorkingState {
  Eigen::MatrixXd Z_star;       // I x J
  Eigen::MatrixXd H_star;       // I x Q
  Eigen::MatrixXd Lambda_star;  // J x Q, zero where the mask is false
  Eigen::VectorXd sigma2;       // J working residual variances
  Eigen::VectorXd psi2;         // Q working factor variances
  Eigen::VectorXd beta_star;    // P
  double alpha = 0.0;
};

/// Draw on the identified scale.
struct InferentialDraw {
  Eigen::MatrixXd Lambda;
  Eigen::MatrixXd H;
  Eigen::VectorXd beta;  // empty when regression is disabled
};

/// Correlation of the latent responses implied by the loadings:
/// D^{-1/2} (I + Lambda Lambda^T) D^{-1/2}, D = diag(1 + lambda_j^T lambda_j).
Eigen::MatrixXd implied_correlation(const Eigen::MatrixXd& lambda);

/// Throws ValidationError if a masked-out loading is nonzero or the shapes differ.
void check_mask(const FactorStructure& structure, const Eigen::MatrixXd& lambda);

}  // namespace splvm
