#include "splvm/random.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace splvm {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32)};
  return std::mt19937_64(seq);
}

constexpr double kSqrt2 = 1.41421356237309504880;

// Inverse-CDF draw from the standard normal restricted to (a, b), a <= 0.
// Working on the lower half keeps Phi(a) and Phi(b) away from 1.
double inverse_cdf_draw(RngStream& rng, double a, double b) {
  const double pa = normal_cdf(a);
  const double pb = normal_cdf(b);
  const double u = pa + (pb - pa) * rng.uniform();
  return normal_quantile(u);
}

// Draw from the standard normal restricted to (a, b) with a >= kTruncatedNormalTail.
double tail_draw(RngStream& rng, double a, double b) {
  if (std::isfinite(b) && (b - a) * a < 1.0) {
    // Narrow slab: uniform proposal, density ratio exp(-(x^2 - a^2) / 2) <= 1.
    for (;;) {
      const double x = a + (b - a) * rng.uniform();
      if (std::log(rng.uniform()) <= -0.5 * (x - a) * (x + a)) return x;
    }
  }
  // Robert (1995) translated-exponential proposal.
  const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double x = a + rng.exponential(alpha);
    if (x >= b) continue;
    const double d = x - alpha;
    if (rng.uniform() <= std::exp(-0.5 * d * d)) return x;
  }
}

double standard_truncated(RngStream& rng, double a, double b) {
  if (a >= kTruncatedNormalTail) return tail_draw(rng, a, b);
  if (b <= -kTruncatedNormalTail) return -tail_draw(rng, -b, -a);
  if (a > 0.0) return -inverse_cdf_draw(rng, -b, -a);
  return inverse_cdf_draw(rng, a, b);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

RngStream RngStream::split(std::uint64_t stream_id) const {
  return RngStream(seed_, splitmix64(stream_id_ ^ splitmix64(stream_id + 1)));
}

double RngStream::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() { return normal_(engine_); }

double RngStream::gamma(double shape, double rate) {
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(engine_);
}

double RngStream::exponential(double rate) { return -std::log(uniform()) / rate; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_ccdf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

double truncated_normal(RngStream& rng, double mean, double sd, double lower, double upper) {
  if (!(lower < upper)) throw std::invalid_argument("truncated_normal: empty interval");
  const double a = (lower - mean) / sd;
  const double b = (upper - mean) / sd;
  return mean + sd * standard_truncated(rng, a, b);
}

}  // namespace splvm
