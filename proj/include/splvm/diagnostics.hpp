#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "splvm/postprocess.hpp"

namespace splvm {

/// Sample autocorrelation at lags 0..max_lag with the biased 1/n normalizer.
/// Throws ValidationError unless chain.size() > max_lag >= 1 and
/// NumericalError("zero variance") for a constant chain.
std::vector<double> autocorrelation(std::span<const double> chain, std::size_t max_lag);

/// n / (1 + 2 sum rho_k), with the sum truncated by Geyer's initial monotone
/// sequence rule, clipped to [1, n]. Requires at least 100 values.
double effective_sample_size(std::span<const double> chain);

/// Geweke z-score comparing the means of the first frac_a and the last frac_b
/// of the chain, each standardized by its spectral density at zero.
/// Requires at least 200 values.
double geweke(std::span<const double> chain, double frac_a = 0.1, double frac_b = 0.5);

struct ParameterDiagnostics {
  std::string name;
  double ess = 0.0;
  double geweke_z = 0.0;
  std::vector<double> rho;
  /// Non-empty when the chain could not be diagnosed (e.g. "zero variance").
  std::string error;
};

/// Never throws on a degenerate chain; the failure is recorded in `error`.
std::vector<ParameterDiagnostics> diagnose(const std::vector<NamedChain>& chains, std::size_t max_lag = 20);

nlohmann::json diagnostics_to_json(const std::vector<ParameterDiagnostics>& rows);
std::string diagnostics_to_text(const std::vector<ParameterDiagnostics>& rows);

}  // namespace splvm
