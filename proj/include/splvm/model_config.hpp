#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "splvm/model.hpp"

namespace splvm {

/// Contents of a model specification file:
///
///   {
///     "Q": 3,
///     "mask": [[1, 0, 0], ...],          // J x Q of 0/1; optional when Q = 1
///     "bifactor": true,                  // every outcome loads on factor 1
///     "preset": "paper_sim",             // alternative to "mask"
///     "hyperparameters": {"phi_sigma": 2, "nu_sigma": 1, ...},
///     "regression": {"enabled": true, "covariates": ["x1", "x2"], "standardize": true},
///     "continuous": ["y9"],              // columns replicated by interpolation
///     "simulation": {"loading": 0.6, "loadings": [[...]], "cutoffs": [...],
///                    "beta": [0.35, -0.33], "covariates": 2}
///   }
struct ModelConfig {
  Index factors = 1;
  std::optional<FactorStructure> structure;  // absent for an implicit all-free single factor
  Hyperparameters hyper;
  bool regression_enabled = false;
  std::vector<std::string> covariate_columns;
  bool standardize_covariates = true;
  std::optional<std::vector<std::string>> continuous_columns;
  nlohmann::json simulation = nlohmann::json::object();

  /// The factor structure for data with `outcomes` columns. Throws
  /// ValidationError if an explicit mask has a different row count.
  FactorStructure resolve_structure(Index outcomes) const;

  nlohmann::json to_json() const;
};

/// Throws ValidationError on malformed content.
ModelConfig parse_model_config(const nlohmann::json& j);
/// Throws IoError when the file cannot be read or is not JSON.
ModelConfig load_model_config(const std::string& path);

}  // namespace splvm
