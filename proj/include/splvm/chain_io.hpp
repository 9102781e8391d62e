#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "splvm/model.hpp"
#include "splvm/sampler.hpp"

namespace splvm {

inline constexpr const char* kToolVersion = "0.1.0";

/// 64-bit FNV-1a digest as 16 lowercase hex digits.
std::string config_hash(const std::string& text);

/// Metadata comment lines carried by every output file.
std::vector<std::string> metadata_lines(std::uint64_t seed, const std::string& hash);

/// Append-only draw log, format "splvm-draws v1":
///
///   # splvm-draws v1
///   # <metadata lines>
///   # layout J=<J> Q=<Q> P=<P> algorithm=<px|standard>
///   iteration,block,values
///   <iteration>,lambda_star,<J*Q values, row-major>
///   <iteration>,sigma2,<J values>
///   <iteration>,psi2,<Q values>
///   <iteration>,beta_star,<P values>      (only when P > 0)
///   <iteration>,alpha,<1 value>           (only when P > 0)
///
/// Values use the shortest decimal form that round-trips exactly.
class DrawLogWriter {
 public:
  DrawLogWriter(const std::string& path, const std::vector<std::string>& metadata, Index outcomes, Index factors,
                Index covariates, Algorithm algorithm);
  void append(std::size_t iteration, const WorkingState& state);
  void flush();

 private:
  std::ofstream out_;
  std::string path_;
  Index covariates_;
};

/// Serializes the same blocks to a string (used for reproducibility checks).
std::string format_draw_rows(std::size_t iteration, const WorkingState& state, bool regression);

struct DrawLog {
  Index outcomes = 0;
  Index factors = 0;
  Index covariates = 0;
  Algorithm algorithm = Algorithm::parameter_expanded;
  std::vector<std::size_t> iterations;
  /// Z_star and H_star are empty; all other fields are filled.
  std::vector<WorkingState> states;
};

/// Throws IoError on a missing or malformed file.
DrawLog read_draw_log(const std::string& path);

/// Binary latent-response snapshots, format:
///   "SPLVMLAT" | u32 version = 1 | u64 metadata length | metadata bytes (UTF-8) |
///   u64 count | u64 rows | u64 cols |
///   count x (u64 iteration | rows*cols f64, column-major)
/// All integers and doubles in host (little-endian) byte order.
void write_latent_snapshots(const std::string& path, const std::vector<std::size_t>& iterations,
                            const std::vector<Eigen::MatrixXd>& snapshots, const std::string& metadata = {});

struct LatentSnapshots {
  std::string metadata;
  std::vector<std::size_t> iterations;
  std::vector<Eigen::MatrixXd> z;
};

LatentSnapshots read_latent_snapshots(const std::string& path);

}  // namespace splvm
