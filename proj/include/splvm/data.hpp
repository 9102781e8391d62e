#pragma once

#include <Eigen/Dense>

#include <limits>
#include <string>
#include <vector>

#include "splvm/random.hpp"

namespace splvm {

using Index = Eigen::Index;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Observed responses Y (I x J) of arbitrary ordered numeric codes per column.
///
/// Only the within-column ordering of the values is ever used by the model.
/// Each non-missing cell is assigned a level: its position in the column's
/// sorted distinct values. Missing cells have level -1.
class MixedOutcomeMatrix {
 public:
  MixedOutcomeMatrix() = default;
  /// Throws ValidationError if a column has fewer than two distinct observed
  /// values or a non-missing entry is not finite.
  MixedOutcomeMatrix(Eigen::MatrixXd values, BoolMatrix missing, std::vector<std::string> column_names = {});
  /// Complete data, no missing cells.
  explicit MixedOutcomeMatrix(Eigen::MatrixXd values, std::vector<std::string> column_names = {});

  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }

  double value(Index i, Index j) const { return values_(i, j); }
  bool is_missing(Index i, Index j) const { return missing_(i, j); }
  int level(Index i, Index j) const { return levels_(i, j); }
  Index observed_count(Index j) const;

  const Eigen::MatrixXd& values() const { return values_; }
  const BoolMatrix& missing() const { return missing_; }
  const std::vector<std::string>& column_names() const { return names_; }
  const std::vector<double>& distinct_values(Index j) const { return distinct_[static_cast<std::size_t>(j)]; }

  /// Values with NaN in missing cells.
  Eigen::MatrixXd values_with_nan() const;

 private:
  Eigen::MatrixXd values_;
  BoolMatrix missing_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> distinct_;
  Eigen::ArrayXXi levels_;
};

/// Latent responses Z on the standard-normal scale, one per cell of Y.
struct LatentResponseMatrix {
  Eigen::MatrixXd z;
};

/// Open truncation interval for one latent response.
struct RankBounds {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool contains(double x) const { return lower < x && x < upper; }
  bool nonempty() const { return lower < upper; }
};

/// Parse a comma-delimited file with a header row. Cells equal to
/// `missing_token` are missing; lines starting with '#' are skipped.
MixedOutcomeMatrix load_csv(const std::string& path, const std::string& missing_token = "NA");

/// Raw table reader shared by the data and covariate loaders. Missing cells
/// hold NaN.
struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};
CsvTable read_csv_table(const std::string& path, const std::string& missing_token = "NA");

void write_csv(const std::string& path, const Eigen::MatrixXd& values, const std::vector<std::string>& header,
               const std::vector<std::string>& comment_lines = {}, const std::string& missing_token = "NA");

/// Truncation points for z_ij implied by the current values of the other
/// latent responses in column j. Ties and missing cells impose no constraint.
RankBounds rank_bounds(const MixedOutcomeMatrix& y, const LatentResponseMatrix& z, Index i, Index j);

/// Van der Waerden scores: z_ij = Phi^{-1}(average rank / (n_j + 1)), with n_j
/// the number of observed cells of column j. Missing cells get N(0, 1) draws.
LatentResponseMatrix normal_score_init(const MixedOutcomeMatrix& y, RngStream& rng);

/// True iff Z respects the strict within-column ordering of Y.
bool in_rank_set(const MixedOutcomeMatrix& y, const Eigen::MatrixXd& z);

/// Incrementally maintained per-level minimum and maximum of the latent
/// responses in each column. Given Z in D(Y), the bounds of a cell at level c
/// are (max of level c-1, min of level c+1), so lookups are O(1).
class RankIndex {
 public:
  RankIndex(const MixedOutcomeMatrix& y, const Eigen::MatrixXd& z);

  RankBounds bounds(Index i, Index j) const;
  /// Set z(i, j) = value and refresh the level extremes.
  void update(Eigen::MatrixXd& z, Index i, Index j, double value);

 private:
  struct Column {
    std::vector<std::vector<Index>> members;
    std::vector<double> lowest;
    std::vector<double> highest;
  };
  const MixedOutcomeMatrix* y_;
  std::vector<Column> columns_;
};

}  // namespace splvm
