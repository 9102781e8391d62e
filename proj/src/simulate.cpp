#include "splvm/simulate.hpp"

#include <algorithm>

#include "splvm/error.hpp"

namespace splvm {

SimulatedData generate_bifactor_data(const SimulationSettings& s) {
  const Index I = s.individuals;
  const Index J = s.structure.outcomes();
  const Index Q = s.structure.factors();
  if (I < 2) throw ValidationError("I must be at least 2");
  check_mask(s.structure, s.loadings);
  if (static_cast<Index>(s.cutoff_counts.size()) != J) throw ValidationError("one cutoff count per outcome is required");
  for (int c : s.cutoff_counts)
    if (c < 1) throw ValidationError("cutoff counts must be at least 1");
  const bool regression = s.beta.size() > 0;
  if (regression && (s.covariates.rows() != I || s.covariates.cols() != s.beta.size())) {
    throw ValidationError("covariates must be I x P with P = length of beta");
  }

  RngStream rng(s.seed);
  GroundTruth truth;
  truth.Lambda = s.loadings;
  truth.H.resize(I, Q);
  for (Index i = 0; i < I; ++i)
    for (Index q = 0; q < Q; ++q) truth.H(i, q) = rng.normal();
  if (regression) {
    truth.X = s.covariates;
    truth.beta = s.beta;
    truth.H.col(0) += s.covariates * s.beta;
  }
  truth.Z = truth.H * s.loadings.transpose();
  for (Index i = 0; i < I; ++i)
    for (Index j = 0; j < J; ++j) truth.Z(i, j) += rng.normal();

  Eigen::MatrixXd codes(I, J);
  truth.cutoffs.resize(static_cast<std::size_t>(J));
  for (Index j = 0; j < J; ++j) {
    const double lo = truth.Z.col(j).minCoeff();
    const double hi = truth.Z.col(j).maxCoeff();
    auto& cuts = truth.cutoffs[static_cast<std::size_t>(j)];
    for (int c = 0; c < s.cutoff_counts[static_cast<std::size_t>(j)]; ++c) cuts.push_back(lo + (hi - lo) * rng.uniform());
    std::sort(cuts.begin(), cuts.end());
    for (Index i = 0; i < I; ++i) {
      codes(i, j) = static_cast<double>(std::lower_bound(cuts.begin(), cuts.end(), truth.Z(i, j)) - cuts.begin());
    }
  }
  std::vector<std::string> names;
  for (Index j = 0; j < J; ++j) names.push_back("y" + std::to_string(j + 1));
  return SimulatedData{MixedOutcomeMatrix(std::move(codes), std::move(names)), std::move(truth)};
}

SimulationLayout paper_sim_structure(double loading) {
  constexpr Index J = 15;
  constexpr Index Q = 3;
  SimulationLayout out;
  out.structure.mask = BoolMatrix::Constant(J, Q, false);
  out.structure.mask.col(0).setConstant(true);
  out.structure.bifactor = true;
  for (Index j : {1, 13, 14, 15}) out.structure.mask(j - 1, 1) = true;
  for (Index j : {3, 4, 6, 8}) out.structure.mask(j - 1, 2) = true;
  out.loadings = out.structure.mask.cast<double>().matrix() * loading;
  out.cutoff_counts = {1, 3, 5, 2, 8, 4, 11, 6, 29, 9, 3, 14, 7, 2, 19};
  return out;
}

Eigen::MatrixXd simulate_covariates(Index individuals, Index covariates, RngStream& rng) {
  Eigen::MatrixXd x(individuals, covariates);
  for (Index i = 0; i < individuals; ++i)
    for (Index p = 0; p < covariates; ++p) x(i, p) = rng.normal();
  return standardize_columns(x);
}

nlohmann::json truth_to_json(const GroundTruth& t) {
  auto matrix = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < m.rows(); ++i) {
      std::vector<double> r(static_cast<std::size_t>(m.cols()));
      for (Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
      rows.push_back(r);
    }
    return rows;
  };
  nlohmann::json out;
  out["Lambda"] = matrix(t.Lambda);
  out["cutoffs"] = t.cutoffs;
  out["eta"] = matrix(t.H);
  out["z"] = matrix(t.Z);
  if (t.beta.size() > 0) out["beta"] = std::vector<double>(t.beta.data(), t.beta.data() + t.beta.size());
  return out;
}

}  // namespace splvm
