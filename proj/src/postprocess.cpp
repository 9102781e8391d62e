#include "splvm/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "splvm/error.hpp"

namespace splvm {
namespace {

double relabel_loss(const std::vector<InferentialDraw>& draws, const Eigen::MatrixXd& reference) {
  double loss = 0.0;
  for (const auto& d : draws) loss += (d.Lambda - reference).squaredNorm();
  return loss;
}

Eigen::MatrixXd mean_loadings(const std::vector<InferentialDraw>& draws) {
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(draws.front().Lambda.rows(), draws.front().Lambda.cols());
  for (const auto& d : draws) mean += d.Lambda;
  return mean / static_cast<double>(draws.size());
}

void flip(InferentialDraw& d, Index q) {
  d.Lambda.col(q) *= -1.0;
  if (d.H.cols() > q) d.H.col(q) *= -1.0;
  if (q == 0 && d.beta.size() > 0) d.beta *= -1.0;
}

}  // namespace

InferentialDraw to_inferential(const WorkingState& s, bool regression_enabled) {
  InferentialDraw d;
  const Eigen::VectorXd psi_sd = s.psi2.cwiseSqrt();
  const Eigen::VectorXd sigma_inv_sd = s.sigma2.cwiseSqrt().cwiseInverse();
  d.Lambda = sigma_inv_sd.asDiagonal() * s.Lambda_star * psi_sd.asDiagonal();
  // States read back from a draw log carry no factor scores.
  if (s.H_star.size() > 0) {
    d.H = s.H_star;
    if (regression_enabled) d.H.col(0).array() -= s.alpha;
    d.H = d.H * psi_sd.cwiseInverse().asDiagonal();
  }
  if (regression_enabled) d.beta = s.beta_star / psi_sd(0);
  return d;
}

std::vector<InferentialDraw> to_inferential(const ChainOutput& chain) {
  std::vector<InferentialDraw> out;
  out.reserve(chain.snapshots.size());
  for (const auto& s : chain.snapshots) out.push_back(to_inferential(s, chain.regression_enabled));
  return out;
}

Eigen::MatrixXd inferential_latent(const WorkingState& s, bool regression_enabled) {
  Eigen::MatrixXd z = s.Z_star;
  if (regression_enabled && s.alpha != 0.0) z.rowwise() -= s.alpha * s.Lambda_star.col(0).transpose();
  return z * s.sigma2.cwiseSqrt().cwiseInverse().asDiagonal();
}

RelabelResult relabel_signs(std::vector<InferentialDraw> draws, const FactorStructure* structure) {
  if (draws.size() < 2) throw ValidationError("relabeling needs at least two draws");
  const Index J = draws.front().Lambda.rows();
  const Index Q = draws.front().Lambda.cols();
  for (const auto& d : draws) {
    if (d.Lambda.rows() != J || d.Lambda.cols() != Q) throw ValidationError("draws have inconsistent loading shapes");
    if (structure) check_mask(*structure, d.Lambda);
  }

  RelabelResult result;
  result.signs.assign(draws.size(), std::vector<int>(static_cast<std::size_t>(Q), 1));

  Eigen::MatrixXd reference = mean_loadings(draws);
  // A column whose mean vanishes (exactly balanced reflections) gives no
  // direction; fall back to the first draw's column.
  for (Index q = 0; q < Q; ++q) {
    double scale = 0.0;
    for (const auto& d : draws) scale = std::max(scale, d.Lambda.col(q).norm());
    if (reference.col(q).norm() <= 1e-12 * scale) reference.col(q) = draws.front().Lambda.col(q);
  }
  result.loss_trace.push_back(relabel_loss(draws, reference));

  for (;;) {
    std::size_t flips = 0;
    for (std::size_t m = 0; m < draws.size(); ++m) {
      for (Index q = 0; q < Q; ++q) {
        // ||-c - r||^2 < ||c - r||^2  <=>  c . r < 0
        if (draws[m].Lambda.col(q).dot(reference.col(q)) < 0.0) {
          flip(draws[m], q);
          result.signs[m][static_cast<std::size_t>(q)] *= -1;
          ++flips;
        }
      }
    }
    ++result.iterations;
    if (flips == 0) break;
    reference = mean_loadings(draws);
    result.loss_trace.push_back(relabel_loss(draws, reference));
  }

  result.convention_flips.assign(static_cast<std::size_t>(Q), 0);
  for (Index q = 0; q < Q; ++q) {
    Index j_max = 0;
    reference.col(q).cwiseAbs().maxCoeff(&j_max);
    if (reference(j_max, q) < 0.0) {
      result.convention_flips[static_cast<std::size_t>(q)] = 1;
      for (std::size_t m = 0; m < draws.size(); ++m) {
        flip(draws[m], q);
        result.signs[m][static_cast<std::size_t>(q)] *= -1;
      }
    }
  }
  result.draws = std::move(draws);
  return result;
}

double sample_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("quantile of an empty sequence");
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double v_lo = values[lo];
  if (hi == lo) return v_lo;
  const double v_hi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return v_lo + (h - static_cast<double>(lo)) * (v_hi - v_lo);
}

ParameterSummary summarize_chain(const std::string& name, std::span<const double> values) {
  if (values.empty()) throw ValidationError("cannot summarize an empty chain for " + name);
  std::vector<double> v(values.begin(), values.end());
  ParameterSummary s;
  s.name = name;
  // Accumulate around the first value so a constant chain returns it exactly.
  const double origin = v.front();
  double shifted = 0.0;
  for (double x : v) shifted += x - origin;
  s.mean = origin + shifted / static_cast<double>(v.size());
  s.median = sample_quantile(v, 0.5);
  s.q025 = sample_quantile(v, 0.025);
  s.q975 = sample_quantile(std::move(v), 0.975);
  return s;
}

std::string loading_name(Index j, Index q) { return "lambda." + std::to_string(j + 1) + "." + std::to_string(q + 1); }

std::string beta_name(Index p) { return "beta." + std::to_string(p + 1); }

std::vector<NamedChain> parameter_chains(const std::vector<InferentialDraw>& draws, const FactorStructure& structure) {
  std::vector<NamedChain> out;
  for (Index j = 0; j < structure.outcomes(); ++j) {
    for (Index q = 0; q < structure.factors(); ++q) {
      if (!structure.mask(j, q)) continue;
      NamedChain c{loading_name(j, q), {}};
      c.values.reserve(draws.size());
      for (const auto& d : draws) c.values.push_back(d.Lambda(j, q));
      out.push_back(std::move(c));
    }
  }
  const Index P = draws.empty() ? 0 : draws.front().beta.size();
  for (Index p = 0; p < P; ++p) {
    NamedChain c{beta_name(p), {}};
    for (const auto& d : draws) c.values.push_back(d.beta(p));
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ParameterSummary> summarize(const std::vector<NamedChain>& chains) {
  std::vector<ParameterSummary> out;
  out.reserve(chains.size());
  for (const auto& c : chains) out.push_back(summarize_chain(c.name, c.values));
  return out;
}

std::vector<ParameterSummary> summarize(const std::vector<InferentialDraw>& draws, const FactorStructure& structure) {
  if (draws.empty()) throw ValidationError("cannot summarize an empty draw sequence");
  return summarize(parameter_chains(draws, structure));
}

nlohmann::json summary_to_json(const std::vector<ParameterSummary>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"parameter", r.name}, {"mean", r.mean}, {"median", r.median}, {"q2.5", r.q025}, {"q97.5", r.q975}});
  }
  return out;
}

std::string summary_to_text(const std::vector<ParameterSummary>& rows) {
  std::size_t width = std::string("parameter").size();
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "parameter" << std::right;
  for (const char* h : {"mean", "median", "q2.5", "q97.5"}) os << std::setw(11) << h;
  os << '\n' << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(width)) << r.name << std::right << std::setw(11) << r.mean
       << std::setw(11) << r.median << std::setw(11) << r.q025 << std::setw(11) << r.q975 << '\n';
  }
  return os.str();
}

}  // namespace splvm
