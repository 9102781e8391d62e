#include "splvm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "splvm/error.hpp"

namespace splvm {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  std::string out(s.substr(b, e - b));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

bool skip_line(const std::string& line) {
  const std::string t = trim(line);
  return t.empty() || t.front() == '#';
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

MixedOutcomeMatrix::MixedOutcomeMatrix(Eigen::MatrixXd values, BoolMatrix missing,
                                       std::vector<std::string> column_names)
    : values_(std::move(values)), missing_(std::move(missing)), names_(std::move(column_names)) {
  const Index n = values_.rows();
  const Index p = values_.cols();
  if (missing_.rows() != n || missing_.cols() != p) {
    throw ValidationError("missing mask dimensions do not match the data");
  }
  if (names_.empty()) {
    for (Index j = 0; j < p; ++j) names_.push_back("y" + std::to_string(j + 1));
  }
  if (static_cast<Index>(names_.size()) != p) throw ValidationError("column name count does not match the data");

  distinct_.resize(static_cast<std::size_t>(p));
  levels_ = Eigen::ArrayXXi::Constant(n, p, -1);
  std::vector<std::string> constant;
  for (Index j = 0; j < p; ++j) {
    auto& d = distinct_[static_cast<std::size_t>(j)];
    for (Index i = 0; i < n; ++i) {
      if (missing_(i, j)) continue;
      if (!std::isfinite(values_(i, j))) {
        throw ValidationError("non-finite value at row " + std::to_string(i + 1) + ", column " + names_[j]);
      }
      d.push_back(values_(i, j));
    }
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    if (d.size() < 2) {
      constant.push_back(names_[j]);
      continue;
    }
    for (Index i = 0; i < n; ++i) {
      if (missing_(i, j)) continue;
      levels_(i, j) = static_cast<int>(std::lower_bound(d.begin(), d.end(), values_(i, j)) - d.begin());
    }
  }
  if (!constant.empty()) {
    std::string msg = "constant column (fewer than 2 distinct observed values):";
    for (const auto& c : constant) msg += " " + c;
    throw ValidationError(msg);
  }
}

MixedOutcomeMatrix::MixedOutcomeMatrix(Eigen::MatrixXd values, std::vector<std::string> column_names)
    : MixedOutcomeMatrix(values, BoolMatrix::Constant(values.rows(), values.cols(), false),
                         std::move(column_names)) {}

Index MixedOutcomeMatrix::observed_count(Index j) const {
  return missing_.rows() - missing_.col(j).count();
}

Eigen::MatrixXd MixedOutcomeMatrix::values_with_nan() const {
  Eigen::MatrixXd out = values_;
  for (Index j = 0; j < out.cols(); ++j)
    for (Index i = 0; i < out.rows(); ++i)
      if (missing_(i, j)) out(i, j) = std::numeric_limits<double>::quiet_NaN();
  return out;
}

CsvTable read_csv_table(const std::string& path, const std::string& missing_token) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  CsvTable table;
  std::string line;
  bool have_header = false;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    auto cells = split_line(line);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(table.header.size()) + " cells, found " +
                            std::to_string(cells.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      if (cell.empty() || cell == missing_token) {
        row[c] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ValidationError(path + ": unparseable cell '" + cell + "' at data row " +
                              std::to_string(rows.size() + 1) + ", column " + table.header[c]);
      }
      row[c] = v;
    }
    rows.push_back(std::move(row));
  }
  if (!have_header || rows.empty()) throw ValidationError(path + ": empty file");

  table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) table.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return table;
}

MixedOutcomeMatrix load_csv(const std::string& path, const std::string& missing_token) {
  CsvTable table = read_csv_table(path, missing_token);
  BoolMatrix missing = table.values.array().isNaN();
  Eigen::MatrixXd values = table.values;
  for (Index j = 0; j < values.cols(); ++j)
    for (Index i = 0; i < values.rows(); ++i)
      if (missing(i, j)) values(i, j) = 0.0;
  return MixedOutcomeMatrix(std::move(values), std::move(missing), std::move(table.header));
}

void write_csv(const std::string& path, const Eigen::MatrixXd& values, const std::vector<std::string>& header,
               const std::vector<std::string>& comment_lines, const std::string& missing_token) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& c : comment_lines) out << "# " << c << '\n';
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      if (j) out << ',';
      const double v = values(i, j);
      out << (std::isnan(v) ? missing_token : format_double(v));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

RankBounds rank_bounds(const MixedOutcomeMatrix& y, const LatentResponseMatrix& z, Index i, Index j) {
  RankBounds b;
  if (y.is_missing(i, j)) return b;
  const double yij = y.value(i, j);
  for (Index k = 0; k < y.rows(); ++k) {
    if (k == i || y.is_missing(k, j)) continue;
    const double ykj = y.value(k, j);
    if (ykj < yij) b.lower = std::max(b.lower, z.z(k, j));
    else if (ykj > yij) b.upper = std::min(b.upper, z.z(k, j));
  }
  return b;
}

LatentResponseMatrix normal_score_init(const MixedOutcomeMatrix& y, RngStream& rng) {
  const Index n = y.rows();
  LatentResponseMatrix out{Eigen::MatrixXd::Zero(n, y.cols())};
  for (Index j = 0; j < y.cols(); ++j) {
    const auto levels = static_cast<Index>(y.distinct_values(j).size());
    // average rank of level c = (count below) + (count at c + 1) / 2
    std::vector<double> count(static_cast<std::size_t>(levels), 0.0);
    for (Index i = 0; i < n; ++i)
      if (!y.is_missing(i, j)) count[static_cast<std::size_t>(y.level(i, j))] += 1.0;
    std::vector<double> score(count.size());
    const double denom = static_cast<double>(y.observed_count(j)) + 1.0;
    double below = 0.0;
    for (std::size_t c = 0; c < count.size(); ++c) {
      score[c] = normal_quantile((below + (count[c] + 1.0) / 2.0) / denom);
      below += count[c];
    }
    for (Index i = 0; i < n; ++i) {
      out.z(i, j) = y.is_missing(i, j) ? rng.normal() : score[static_cast<std::size_t>(y.level(i, j))];
    }
  }
  return out;
}

bool in_rank_set(const MixedOutcomeMatrix& y, const Eigen::MatrixXd& z) {
  for (Index j = 0; j < y.cols(); ++j) {
    const auto levels = y.distinct_values(j).size();
    std::vector<double> lo(levels, std::numeric_limits<double>::infinity());
    std::vector<double> hi(levels, -std::numeric_limits<double>::infinity());
    for (Index i = 0; i < y.rows(); ++i) {
      if (y.is_missing(i, j)) continue;
      const auto c = static_cast<std::size_t>(y.level(i, j));
      if (!std::isfinite(z(i, j))) return false;
      lo[c] = std::min(lo[c], z(i, j));
      hi[c] = std::max(hi[c], z(i, j));
    }
    for (std::size_t c = 1; c < levels; ++c)
      if (!(hi[c - 1] < lo[c])) return false;
  }
  return true;
}

RankIndex::RankIndex(const MixedOutcomeMatrix& y, const Eigen::MatrixXd& z) : y_(&y) {
  columns_.resize(static_cast<std::size_t>(y.cols()));
  for (Index j = 0; j < y.cols(); ++j) {
    auto& col = columns_[static_cast<std::size_t>(j)];
    const auto levels = y.distinct_values(j).size();
    col.members.assign(levels, {});
    col.lowest.assign(levels, std::numeric_limits<double>::infinity());
    col.highest.assign(levels, -std::numeric_limits<double>::infinity());
    for (Index i = 0; i < y.rows(); ++i) {
      if (y.is_missing(i, j)) continue;
      const auto c = static_cast<std::size_t>(y.level(i, j));
      col.members[c].push_back(i);
      col.lowest[c] = std::min(col.lowest[c], z(i, j));
      col.highest[c] = std::max(col.highest[c], z(i, j));
    }
  }
}

RankBounds RankIndex::bounds(Index i, Index j) const {
  RankBounds b;
  const int level = y_->level(i, j);
  if (level < 0) return b;
  const auto& col = columns_[static_cast<std::size_t>(j)];
  const auto c = static_cast<std::size_t>(level);
  if (c > 0) b.lower = col.highest[c - 1];
  if (c + 1 < col.lowest.size()) b.upper = col.lowest[c + 1];
  return b;
}

void RankIndex::update(Eigen::MatrixXd& z, Index i, Index j, double value) {
  const double old = z(i, j);
  z(i, j) = value;
  const int level = y_->level(i, j);
  if (level < 0) return;
  auto& col = columns_[static_cast<std::size_t>(j)];
  const auto c = static_cast<std::size_t>(level);
  const auto& members = col.members[c];
  if (value <= col.lowest[c]) {
    col.lowest[c] = value;
  } else if (old == col.lowest[c]) {
    double m = std::numeric_limits<double>::infinity();
    for (Index k : members) m = std::min(m, z(k, j));
    col.lowest[c] = m;
  }
  if (value >= col.highest[c]) {
    col.highest[c] = value;
  } else if (old == col.highest[c]) {
    double m = -std::numeric_limits<double>::infinity();
    for (Index k : members) m = std::max(m, z(k, j));
    col.highest[c] = m;
  }
}

}  // namespace splvm
