#include "splvm/sampler.hpp"

#include <cmath>
#include <iostream>

#include "splvm/error.hpp"

namespace splvm {
namespace {

constexpr int kMaxRetries = 8;
constexpr std::size_t kMaxLoggedRepairs = 10;

Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& precision, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericalError(std::string(what) + ": precision is not positive definite");
  return llt;
}

// mean + L^{-T} eps where precision = L L^T, i.e. a draw with covariance precision^{-1}.
Eigen::VectorXd draw_from_precision(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXd& mean,
                                    RngStream& rng) {
  Eigen::VectorXd eps(mean.size());
  for (Index k = 0; k < eps.size(); ++k) eps(k) = rng.normal();
  return mean + llt.matrixU().solve(eps);
}

// Prior mean of eta*_{i, primary}; zero without regression.
Eigen::VectorXd primary_prior_mean(const WorkingState& state, const RegressionSpec& regression) {
  const Index n = state.H_star.rows();
  if (!regression.enabled) return Eigen::VectorXd::Zero(n);
  return (regression.X * state.beta_star).array() + state.alpha;
}

// Shared step-2 quantities: the precision Psi^{-1} + L*^T Sigma^{-1} L* is common to all i.
struct FactorPosterior {
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::MatrixXd means;  // I x Q

  FactorPosterior(const WorkingState& s, const RegressionSpec& regression) {
    const Eigen::VectorXd sigma_inv = s.sigma2.cwiseInverse();
    const Eigen::VectorXd psi_inv = s.psi2.cwiseInverse();
    const Eigen::MatrixXd weighted = sigma_inv.asDiagonal() * s.Lambda_star;  // J x Q
    Eigen::MatrixXd precision = s.Lambda_star.transpose() * weighted;
    precision.diagonal() += psi_inv;
    llt = checked_llt(precision, "factor update");
    Eigen::MatrixXd rhs = s.Z_star * weighted;  // I x Q
    if (regression.enabled) rhs.col(0) += psi_inv(0) * primary_prior_mean(s, regression);
    means = llt.solve(rhs.transpose()).transpose();
  }
};

struct LoadingMoments {
  Eigen::MatrixXd HtH;  // Q x Q
  Eigen::MatrixXd HtZ;  // Q x J
};

GaussianConditional loading_from_moments(const LoadingMoments& m, const std::vector<Index>& free, double sigma2,
                                         const Hyperparameters& hyper, Index j,
                                         Eigen::LLT<Eigen::MatrixXd>* llt_out = nullptr) {
  const auto k = static_cast<Index>(free.size());
  Eigen::MatrixXd precision(k, k);
  Eigen::VectorXd rhs(k);
  const double prior_precision = 1.0 / hyper.s_lambda;
  for (Index a = 0; a < k; ++a) {
    for (Index b = 0; b < k; ++b) precision(a, b) = m.HtH(free[a], free[b]) / sigma2;
    precision(a, a) += prior_precision;
    rhs(a) = prior_precision * hyper.m_lambda + m.HtZ(free[a], j) / sigma2;
  }
  Eigen::LLT<Eigen::MatrixXd> llt = checked_llt(precision, "loading update");
  GaussianConditional out;
  out.mean = llt.solve(rhs);
  if (llt_out) {
    *llt_out = llt;
  } else {
    out.covariance = llt.solve(Eigen::MatrixXd::Identity(k, k));
  }
  return out;
}

}  // namespace

std::string to_string(Algorithm algorithm) {
  return algorithm == Algorithm::parameter_expanded ? "px" : "standard";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "px" || name == "parameter_expanded") return Algorithm::parameter_expanded;
  if (name == "standard" || name == "standard_gibbs") return Algorithm::standard_gibbs;
  throw ValidationError("unknown algorithm '" + name + "' (expected px or standard)");
}

void SamplerConfig::validate() const {
  if (n_iterations == 0) throw ValidationError("n_iterations must be positive");
  if (burn_in >= n_iterations) throw ValidationError("burn_in must be smaller than n_iterations");
  if (thin == 0) throw ValidationError("thin must be positive");
}

WorkingState initial_state(const MixedOutcomeMatrix& y, const FactorStructure& structure,
                           const RegressionSpec& regression, RngStream& rng) {
  WorkingState s;
  s.Z_star = normal_score_init(y, rng).z;
  s.H_star = Eigen::MatrixXd::Zero(y.rows(), structure.factors());
  s.Lambda_star = structure.mask.cast<double>().matrix() * 0.5;
  s.sigma2 = Eigen::VectorXd::Ones(y.cols());
  s.psi2 = Eigen::VectorXd::Ones(structure.factors());
  s.beta_star = Eigen::VectorXd::Zero(regression.covariates());
  s.alpha = 0.0;
  return s;
}

std::size_t draw_latent_responses(WorkingState& state, const MixedOutcomeMatrix& y, RankIndex& index,
                                  RngStream& rng) {
  std::size_t repairs = 0;
  Eigen::MatrixXd& z = state.Z_star;
  const Eigen::MatrixXd means = state.H_star * state.Lambda_star.transpose();  // I x J
  for (Index j = 0; j < y.cols(); ++j) {
    const double sd = std::sqrt(state.sigma2(j));
    for (Index i = 0; i < y.rows(); ++i) {
      const double mean = means(i, j);
      if (y.is_missing(i, j)) {
        z(i, j) = mean + sd * rng.normal();
        continue;
      }
      const RankBounds b = index.bounds(i, j);
      double value = 0.5 * (b.lower + b.upper);
      bool ok = false;
      if (b.nonempty()) {
        for (int attempt = 0; attempt < kMaxRetries && !ok; ++attempt) {
          value = truncated_normal(rng, mean, sd, b.lower, b.upper);
          ok = b.contains(value);
        }
        if (!ok) value = 0.5 * (b.lower + b.upper);
      }
      if (!ok) {
        if (!std::isfinite(value)) value = std::isfinite(b.lower) ? b.lower : (std::isfinite(b.upper) ? b.upper : mean);
        if (repairs < kMaxLoggedRepairs) {
          std::clog << "warning: empty truncation interval at cell (" << i + 1 << ", " << j + 1 << ") bounds ["
                    << b.lower << ", " << b.upper << "]; placed at midpoint\n";
        }
        ++repairs;
      }
      index.update(z, i, j, value);
    }
  }
  return repairs;
}

std::size_t draw_latent_responses(WorkingState& state, const MixedOutcomeMatrix& y, RngStream& rng) {
  RankIndex index(y, state.Z_star);
  return draw_latent_responses(state, y, index, rng);
}

GaussianConditional factor_conditional(const WorkingState& state, const RegressionSpec& regression, Index i) {
  FactorPosterior post(state, regression);
  const Index q = state.Lambda_star.cols();
  return {post.means.row(i).transpose(), post.llt.solve(Eigen::MatrixXd::Identity(q, q))};
}

void draw_factors(WorkingState& state, const RegressionSpec& regression, RngStream& rng) {
  FactorPosterior post(state, regression);
  const Index n = state.H_star.rows();
  const Index q = state.H_star.cols();
  Eigen::MatrixXd eps(q, n);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < q; ++k) eps(k, i) = rng.normal();
  state.H_star = post.means + post.llt.matrixU().solve(eps).transpose();
}

GaussianConditional loading_conditional(const WorkingState& state, const FactorStructure& structure,
                                        const Hyperparameters& hyper, Index j) {
  const auto free = structure.free_factors(j);
  LoadingMoments m{state.H_star.transpose() * state.H_star, state.H_star.transpose() * state.Z_star};
  return loading_from_moments(m, free, state.sigma2(j), hyper, j);
}

void draw_loadings(WorkingState& state, const FactorStructure& structure, const Hyperparameters& hyper,
                   RngStream& rng) {
  LoadingMoments m{state.H_star.transpose() * state.H_star, state.H_star.transpose() * state.Z_star};
  for (Index j = 0; j < structure.outcomes(); ++j) {
    const auto free = structure.free_factors(j);
    if (free.empty()) continue;
    Eigen::LLT<Eigen::MatrixXd> llt;
    const GaussianConditional c = loading_from_moments(m, free, state.sigma2(j), hyper, j, &llt);
    const Eigen::VectorXd draw = draw_from_precision(llt, c.mean, rng);
    for (std::size_t a = 0; a < free.size(); ++a) state.Lambda_star(j, free[a]) = draw(static_cast<Index>(a));
  }
}

GammaConditional psi_conditional(const WorkingState& state, const Hyperparameters& hyper,
                                 const RegressionSpec& regression, Index q) {
  const double n = static_cast<double>(state.H_star.rows());
  double ss = 0.0;
  if (q == 0 && regression.enabled) {
    // Centered at the hierarchical prior mean alpha + x_i^T beta*; the
    // zero-mean form only applies without covariates.
    ss = (state.H_star.col(0) - primary_prior_mean(state, regression)).squaredNorm();
  } else {
    ss = state.H_star.col(q).squaredNorm();
  }
  return {hyper.phi_psi + n / 2.0, hyper.nu_psi + 0.5 * ss};
}

void draw_psi_inverse(WorkingState& state, const Hyperparameters& hyper, const RegressionSpec& regression,
                      RngStream& rng) {
  for (Index q = 0; q < state.psi2.size(); ++q) {
    const GammaConditional c = psi_conditional(state, hyper, regression, q);
    state.psi2(q) = 1.0 / rng.gamma(c.shape, c.rate);
  }
}

GammaConditional sigma_conditional(const WorkingState& state, const Hyperparameters& hyper, Index j) {
  const double n = static_cast<double>(state.Z_star.rows());
  const double ss = (state.Z_star.col(j) - state.H_star * state.Lambda_star.row(j).transpose()).squaredNorm();
  return {hyper.phi_sigma + n / 2.0, hyper.nu_sigma + 0.5 * ss};
}

void draw_sigma_inverse(WorkingState& state, const Hyperparameters& hyper, RngStream& rng) {
  for (Index j = 0; j < state.sigma2.size(); ++j) {
    const GammaConditional c = sigma_conditional(state, hyper, j);
    state.sigma2(j) = 1.0 / rng.gamma(c.shape, c.rate);
  }
}

GaussianConditional beta_conditional(const WorkingState& state, const RegressionSpec& regression,
                                     const Hyperparameters& hyper) {
  const Index p = regression.X.cols();
  const double psi_inv = 1.0 / state.psi2(0);
  Eigen::MatrixXd precision = psi_inv * regression.X.transpose() * regression.X;
  precision.diagonal().array() += 1.0 / hyper.s_beta;
  const Eigen::VectorXd centered = state.H_star.col(0).array() - state.alpha;
  const Eigen::VectorXd rhs = psi_inv * regression.X.transpose() * centered +
                              Eigen::VectorXd::Constant(p, hyper.m_beta / hyper.s_beta);
  auto llt = checked_llt(precision, "regression update");
  return {llt.solve(rhs), llt.solve(Eigen::MatrixXd::Identity(p, p))};
}

GaussianConditional alpha_conditional(const WorkingState& state, const RegressionSpec& regression,
                                      const Hyperparameters& hyper) {
  const double psi_inv = 1.0 / state.psi2(0);
  const double n = static_cast<double>(state.H_star.rows());
  const double precision = psi_inv * n + 1.0 / hyper.s_alpha2;
  const double rhs = psi_inv * (state.H_star.col(0) - regression.X * state.beta_star).sum() +
                     hyper.m_alpha / hyper.s_alpha2;
  GaussianConditional out;
  out.mean = Eigen::VectorXd::Constant(1, rhs / precision);
  out.covariance = Eigen::MatrixXd::Constant(1, 1, 1.0 / precision);
  return out;
}

void draw_regression(WorkingState& state, const RegressionSpec& regression, const Hyperparameters& hyper,
                     RngStream& rng, bool draw_alpha) {
  {
    const GaussianConditional c = beta_conditional(state, regression, hyper);
    Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
    Eigen::VectorXd eps(c.mean.size());
    for (Index k = 0; k < eps.size(); ++k) eps(k) = rng.normal();
    state.beta_star = c.mean + llt.matrixL() * eps;
  }
  if (draw_alpha) {
    const GaussianConditional c = alpha_conditional(state, regression, hyper);
    state.alpha = c.mean(0) + std::sqrt(c.covariance(0, 0)) * rng.normal();
  }
}

ChainOutput run_chain(const MixedOutcomeMatrix& y, const FactorStructure& structure, const Hyperparameters& hyper,
                      const RegressionSpec& regression, const SamplerConfig& config,
                      const IterationObserver& observer) {
  config.validate();
  validate_hyperparameters(hyper);
  const ValidationReport report = validate_structure(structure);
  if (!report.ok()) throw ValidationError("invalid factor structure:\n" + report.to_string());
  if (structure.outcomes() != y.cols()) throw ValidationError("factor structure rows do not match outcome columns");
  regression.validate(y.rows());

  const bool expanded = config.algorithm == Algorithm::parameter_expanded;
  RngStream rng(config.seed);
  WorkingState state = initial_state(y, structure, regression, rng);
  RankIndex index(y, state.Z_star);

  ChainOutput out;
  out.config = config;
  out.hyper = hyper;
  out.regression_enabled = regression.enabled;
  const std::size_t total = config.snapshot_count();
  std::size_t latent_stride = 0;
  if (config.keep_latent > 0) latent_stride = (total + config.keep_latent - 1) / config.keep_latent;
  if (latent_stride == 0 && config.keep_latent > 0) latent_stride = 1;
  out.snapshots.reserve(total);
  out.iterations.reserve(total);

  for (std::size_t iter = 1; iter <= config.n_iterations; ++iter) {
    try {
      out.interval_repairs += draw_latent_responses(state, y, index, rng);
      draw_factors(state, regression, rng);
      draw_loadings(state, structure, hyper, rng);
      if (expanded) {
        draw_psi_inverse(state, hyper, regression, rng);
        draw_sigma_inverse(state, hyper, rng);
      }
      if (regression.enabled) draw_regression(state, regression, hyper, rng, expanded);
    } catch (const Error& e) {
      throw NumericalError("iteration " + std::to_string(iter) + ": " + e.what());
    }
    if (observer) observer(iter, state);
    if (iter > config.burn_in && (iter - config.burn_in) % config.thin == 0) {
      const std::size_t s = out.snapshots.size();
      out.snapshots.push_back(state);
      if (latent_stride == 0 || s % latent_stride != 0) out.snapshots.back().Z_star.resize(0, 0);
      out.iterations.push_back(iter);
    }
  }
  return out;
}

ChainOutput run_chain_standard(const MixedOutcomeMatrix& y, const FactorStructure& structure,
                               const Hyperparameters& hyper, const RegressionSpec& regression,
                               SamplerConfig config, const IterationObserver& observer) {
  config.algorithm = Algorithm::standard_gibbs;
  return run_chain(y, structure, hyper, regression, config, observer);
}

}  // namespace splvm
