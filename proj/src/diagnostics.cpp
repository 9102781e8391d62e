#include "splvm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "splvm/error.hpp"

namespace splvm {
namespace {

// Deviations scaled by n: c_t = n x_t - sum(x). Avoids dividing by n before
// centering, so an exactly representable affine map a x + b with a = +-2^k
// transforms every intermediate by a power of two.
std::vector<double> scaled_deviations(std::span<const double> x) {
  // Tested directly: the rounded sum of a constant chain need not equal n x.
  if (x.empty() || std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); })) {
    throw NumericalError("zero variance");
  }
  const double n = static_cast<double>(x.size());
  double sum = 0.0;
  for (double v : x) sum += v;
  std::vector<double> c(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) c[t] = n * x[t] - sum;
  return c;
}

double autocovariance(const std::vector<double>& c, std::size_t lag) {
  double s = 0.0;
  for (std::size_t t = 0; t + lag < c.size(); ++t) s += c[t] * c[t + lag];
  return s;
}

// Integrated autocorrelation time 1 + 2 sum rho_k with Geyer's initial
// monotone sequence truncation.
double autocorrelation_time(const std::vector<double>& c) {
  const double g0 = autocovariance(c, 0);
  const std::size_t n = c.size();
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = (autocovariance(c, 2 * k) + autocovariance(c, 2 * k + 1)) / g0;
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    sum += pair;
    prev = pair;
  }
  return 2.0 * sum - 1.0;
}

struct WindowStats {
  double sum = 0.0;
  double n = 0.0;
  double mean_variance = 0.0;  // spectral variance of the window mean
};

WindowStats window_stats(std::span<const double> x) {
  WindowStats w;
  w.n = static_cast<double>(x.size());
  for (double v : x) w.sum += v;
  const std::vector<double> c = scaled_deviations(x);
  const double tau = std::max(autocorrelation_time(c), 0.0);
  // gamma_0 of c is n^2 times the sum of squared deviations.
  w.mean_variance = autocovariance(c, 0) * tau / (w.n * w.n * w.n * w.n);
  return w;
}

}  // namespace

std::vector<double> autocorrelation(std::span<const double> chain, std::size_t max_lag) {
  if (max_lag < 1 || chain.size() <= max_lag) throw ValidationError("autocorrelation needs chain length > max_lag >= 1");
  const std::vector<double> c = scaled_deviations(chain);
  const double g0 = autocovariance(c, 0);
  std::vector<double> rho(max_lag + 1);
  for (std::size_t k = 0; k <= max_lag; ++k) rho[k] = autocovariance(c, k) / g0;
  return rho;
}

double effective_sample_size(std::span<const double> chain) {
  if (chain.size() < 100) throw ValidationError("effective sample size needs at least 100 values");
  const double n = static_cast<double>(chain.size());
  const double tau = autocorrelation_time(scaled_deviations(chain));
  if (!(tau > 0.0)) return n;
  return std::clamp(n / tau, 1.0, n);
}

double geweke(std::span<const double> chain, double frac_a, double frac_b) {
  if (chain.size() < 200) throw ValidationError("Geweke diagnostic needs at least 200 values");
  if (!(frac_a > 0.0) || !(frac_b > 0.0) || frac_a + frac_b > 1.0) {
    throw ValidationError("Geweke window fractions must be positive and sum to at most 1");
  }
  const auto na = static_cast<std::size_t>(std::floor(frac_a * static_cast<double>(chain.size())));
  const auto nb = static_cast<std::size_t>(std::floor(frac_b * static_cast<double>(chain.size())));
  const WindowStats a = window_stats(chain.first(na));
  const WindowStats b = window_stats(chain.last(nb));
  const double diff = (b.n * a.sum - a.n * b.sum) / (a.n * b.n);
  return diff / std::sqrt(a.mean_variance + b.mean_variance);
}

std::vector<ParameterDiagnostics> diagnose(const std::vector<NamedChain>& chains, std::size_t max_lag) {
  std::vector<ParameterDiagnostics> out;
  for (const auto& c : chains) {
    ParameterDiagnostics d;
    d.name = c.name;
    try {
      const std::size_t lag = std::min(max_lag, c.values.size() > 1 ? c.values.size() - 1 : 1);
      d.rho = autocorrelation(c.values, lag);
      d.ess = effective_sample_size(c.values);
      d.geweke_z = geweke(c.values);
    } catch (const Error& e) {
      d.error = e.what();
      d.ess = std::numeric_limits<double>::quiet_NaN();
      d.geweke_z = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(std::move(d));
  }
  return out;
}

nlohmann::json diagnostics_to_json(const std::vector<ParameterDiagnostics>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j = {{"parameter", r.name}};
    if (r.error.empty()) {
      j["ess"] = r.ess;
      j["geweke_z"] = r.geweke_z;
      j["rho"] = r.rho;
    } else {
      j["ess"] = nullptr;
      j["geweke_z"] = nullptr;
      j["rho"] = nlohmann::json::array();
      j["error"] = r.error;
    }
    out.push_back(std::move(j));
  }
  return out;
}

std::string diagnostics_to_text(const std::vector<ParameterDiagnostics>& rows) {
  std::size_t width = std::string("parameter").size();
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "parameter" << std::right << std::setw(11) << "ess"
     << std::setw(11) << "geweke_z" << std::setw(9) << "rho1" << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(width)) << r.name << std::right;
    if (!r.error.empty()) {
      os << "  " << r.error << '\n';
      continue;
    }
    os << std::fixed << std::setprecision(1) << std::setw(11) << r.ess << std::setprecision(3) << std::setw(11)
       << r.geweke_z << std::setw(9) << (r.rho.size() > 1 ? r.rho[1] : 1.0) << '\n';
  }
  return os.str();
}

}  // namespace splvm
