#include "splvm/model.hpp"

#include <cmath>
#include <sstream>

#include "splvm/error.hpp"

namespace splvm {

std::vector<Index> FactorStructure::free_factors(Index j) const {
  std::vector<Index> out;
  for (Index q = 0; q < mask.cols(); ++q)
    if (mask(j, q)) out.push_back(q);
  return out;
}

FactorStructure FactorStructure::single_factor(Index outcomes) {
  return FactorStructure{BoolMatrix::Constant(outcomes, 1, true), false};
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& v : violations) os << "  - " << v << '\n';
  return os.str();
}

ValidationReport validate_structure(const FactorStructure& structure) {
  ValidationReport report;
  const Index J = structure.outcomes();
  const Index Q = structure.factors();
  if (J < 1 || Q < 1) {
    report.violations.push_back("mask must have at least one outcome and one factor");
    return report;
  }
  const Index required = Q * (Q - 1) / 2;
  const Index zeros = structure.structural_zero_count();
  if (zeros < required) {
    report.violations.push_back("too few structural zeros: " + std::to_string(zeros) + " < " +
                                std::to_string(required) + " required for " + std::to_string(Q) + " factors");
  }
  for (Index q = 0; q < Q; ++q) {
    if (!structure.mask.col(q).any()) {
      report.violations.push_back("column without free loading: factor " + std::to_string(q + 1));
    }
  }
  if (structure.bifactor) {
    for (Index j = 0; j < J; ++j) {
      if (!structure.mask(j, 0)) {
        report.violations.push_back("bifactor structure: outcome " + std::to_string(j + 1) +
                                    " does not load on the primary factor");
      }
    }
  }
  return report;
}

Hyperparameters default_hyperparameters() { return Hyperparameters{}; }

void validate_hyperparameters(const Hyperparameters& h) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string("hyperparameter ") + name + " must be positive");
  };
  positive(h.phi_psi, "phi_psi");
  positive(h.nu_psi, "nu_psi");
  positive(h.phi_sigma, "phi_sigma");
  positive(h.nu_sigma, "nu_sigma");
  positive(h.s_lambda, "s_lambda");
  positive(h.s_beta, "s_beta");
  positive(h.s_alpha2, "s_alpha2");
  if (!std::isfinite(h.m_lambda) || !std::isfinite(h.m_beta) || !std::isfinite(h.m_alpha)) {
    throw ValidationError("prior means must be finite");
  }
}

void RegressionSpec::validate(Index individuals) const {
  if (!enabled) return;
  if (X.rows() != individuals) {
    throw ValidationError("covariate rows (" + std::to_string(X.rows()) + ") do not match outcome rows (" +
                          std::to_string(individuals) + ")");
  }
  if (X.cols() < 1) throw ValidationError("regression enabled without covariates");
  if (!X.allFinite()) throw ValidationError("covariates contain missing or non-finite entries");
  if (!covariate_names.empty() && static_cast<Index>(covariate_names.size()) != X.cols()) {
    throw ValidationError("covariate name count does not match covariate columns");
  }
}

Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out = x;
  const double n = static_cast<double>(x.rows());
  for (Index p = 0; p < x.cols(); ++p) {
    const double mean = x.col(p).mean();
    out.col(p).array() -= mean;
    const double sd = std::sqrt(out.col(p).squaredNorm() / (n - 1.0));
    if (!(sd > 0.0)) throw ValidationError("covariate column " + std::to_string(p + 1) + " is constant");
    out.col(p) /= sd;
  }
  return out;
}

Eigen::MatrixXd implied_correlation(const Eigen::MatrixXd& lambda) {
  const Index J = lambda.rows();
  Eigen::MatrixXd cov = lambda * lambda.transpose();
  cov.diagonal().array() += 1.0;
  const Eigen::VectorXd inv_sd = cov.diagonal().array().rsqrt();
  Eigen::MatrixXd corr = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
  for (Index j = 0; j < J; ++j) {
    corr(j, j) = 1.0;
    for (Index k = j + 1; k < J; ++k) corr(k, j) = corr(j, k);
  }
  return corr;
}

void check_mask(const FactorStructure& structure, const Eigen::MatrixXd& lambda) {
  if (lambda.rows() != structure.outcomes() || lambda.cols() != structure.factors()) {
    throw ValidationError("loading matrix shape does not match the factor structure");
  }
  for (Index j = 0; j < lambda.rows(); ++j)
    for (Index q = 0; q < lambda.cols(); ++q)
      if (!structure.mask(j, q) && lambda(j, q) != 0.0) {
        throw ValidationError("loading (" + std::to_string(j + 1) + ", " + std::to_string(q + 1) +
                              ") violates a structural zero");
      }
}

}  // namespace splvm
