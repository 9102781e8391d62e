#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "splvm/data.hpp"
#include "splvm/model.hpp"
#include "splvm/random.hpp"

namespace splvm {

/// Replicated responses on the observed scale. Cells missing in the observed
/// data are NaN in the replicate as well.
struct ReplicatedDataset {
  Eigen::MatrixXd y_rep;
  std::size_t draw_index = 0;
};

/// Columns with more than 0.9 * I distinct observed values are continuous.
std::vector<bool> default_continuous_flags(const MixedOutcomeMatrix& y);

/// Monotone map from the latent scale of one snapshot back to observed
/// values. A latent value between two responses with equal observed value
/// takes that value; between different values it takes the nearest
/// response's value, or the linear interpolation for continuous columns.
/// Values beyond the extreme latent responses clamp to the extreme observed values.
class ObservedScaleMap {
 public:
  ObservedScaleMap(const MixedOutcomeMatrix& y, const Eigen::MatrixXd& z_snapshot, std::vector<bool> continuous);
  double operator()(Index j, double z) const;

 private:
  struct Column {
    std::vector<double> z;
    std::vector<double> y;
    bool continuous = false;
  };
  std::vector<Column> columns_;
};

/// One replicated row: z ~ N(0, I + Lambda Lambda^T), mapped column-wise
/// through the snapshot's latent responses.
Eigen::RowVectorXd replicate_observation(const InferentialDraw& draw, const LatentResponseMatrix& z_snapshot,
                                         const MixedOutcomeMatrix& y, const std::vector<bool>& continuous,
                                         RngStream& rng);

/// I independent replicated rows from one posterior draw.
ReplicatedDataset replicate_dataset(const InferentialDraw& draw, const LatentResponseMatrix& z_snapshot,
                                    const MixedOutcomeMatrix& y, const std::vector<bool>& continuous,
                                    RngStream& rng, std::size_t draw_index = 0);

/// Tie-corrected Kendall tau-b over pairwise-complete entries (NaN = missing).
/// Returns NaN when the tie-corrected denominator is zero.
double kendall_tau_b(std::span<const double> x, std::span<const double> y);

/// Pairwise tau-b for all column pairs; undefined entries are NaN.
Eigen::MatrixXd kendall_tau_matrix(const Eigen::MatrixXd& y);

/// Spearman correlation (average ranks for ties, pairwise-complete rows).
/// Throws NumericalError when a column pair has a constant rank vector.
Eigen::MatrixXd spearman_matrix(const Eigen::MatrixXd& y);

/// Descending eigenvalues of the Spearman matrix, first top_k.
std::vector<double> rank_correlation_eigenvalues(const Eigen::MatrixXd& y, Index top_k);

enum class PpcStatistic { marginals, eigenvalues, tau };
PpcStatistic parse_statistic(const std::string& name);

struct PpcOptions {
  std::vector<PpcStatistic> statistics{PpcStatistic::marginals, PpcStatistic::eigenvalues, PpcStatistic::tau};
  std::size_t n_replicates = 100;
  Index top_k = 10;
  std::vector<bool> continuous;  // defaults from the data when empty
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct PpcRow {
  std::string stat_id;
  double observed = 0.0;
  double rep_mean = 0.0;
  double rep_q025 = 0.0;
  double rep_q975 = 0.0;
  bool flagged = false;
  /// Replicates in which the statistic was defined.
  std::size_t n_valid = 0;
};

struct PpcReport {
  std::vector<PpcRow> rows;
  std::size_t replicates = 0;
  /// Replicates whose rank correlation matrix was undefined.
  std::size_t skipped_eigenvalue_replicates = 0;
};

/// Replicates are taken from n_replicates draws evenly spaced over the
/// sequence; draws[m] and z_snapshots[m] must come from the same iteration.
/// Throws ValidationError if n_replicates exceeds the available draws.
PpcReport ppc_report(const std::vector<InferentialDraw>& draws, const std::vector<LatentResponseMatrix>& z_snapshots,
                     const MixedOutcomeMatrix& y, const PpcOptions& options);

nlohmann::json ppc_to_json(const PpcReport& report);
/// Plot-ready CSV: stat_id, observed, rep_mean, rep_q025, rep_q975, flagged.
void write_ppc_csv(const std::string& path, const PpcReport& report, const std::vector<std::string>& comment_lines = {});

}  // namespace splvm
