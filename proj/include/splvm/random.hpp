#pragma once

#include <cstdint>
#include <random>

namespace splvm {

/// Deterministic pseudo-random stream. Two streams built from the same
/// (seed, stream id) pair produce identical sequences on the same build.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  /// Independent child stream, e.g. one per chain or per replicate.
  RngStream split(std::uint64_t stream_id) const;

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  /// Gamma with (shape, rate) parameterization; mean shape / rate.
  double gamma(double shape, double rate);
  /// Exponential with the given rate.
  double exponential(double rate);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Standard normal CDF, survival function and quantile.
double normal_cdf(double x);
double normal_ccdf(double x);
double normal_quantile(double p);

/// Standardized boundary beyond which the truncated normal sampler switches
/// from inverse-CDF to exponential rejection.
inline constexpr double kTruncatedNormalTail = 5.0;

/// Draw from N(mean, sd^2) truncated to the open interval (lower, upper).
/// Either bound may be infinite. Requires lower < upper.
double truncated_normal(RngStream& rng, double mean, double sd, double lower, double upper);

}  // namespace splvm
