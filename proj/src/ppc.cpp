#include "splvm/ppc.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "splvm/error.hpp"
#include "splvm/postprocess.hpp"

namespace splvm {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_value(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Merge sort on v counting inversions (pairs i < j with v[i] > v[j]).
std::int64_t count_inversions(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
  std::size_t a = lo;
  std::size_t b = mid;
  std::size_t k = lo;
  while (a < mid && b < hi) {
    if (v[b] < v[a]) {
      swaps += static_cast<std::int64_t>(mid - a);
      buf[k++] = v[b++];
    } else {
      buf[k++] = v[a++];
    }
  }
  while (a < mid) buf[k++] = v[a++];
  while (b < hi) buf[k++] = v[b++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

// Sum over runs of equal consecutive values of t(t-1)/2.
template <typename Eq>
std::int64_t tied_pairs(std::size_t n, Eq equal) {
  std::int64_t total = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && equal(i - 1, i)) {
      ++run;
    } else {
      total += static_cast<std::int64_t>(run) * static_cast<std::int64_t>(run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

// Average ranks (1-based) of v.
std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t k = i;
    while (k + 1 < n && v[order[k + 1]] == v[order[i]]) ++k;
    const double r = 0.5 * static_cast<double>(i + k) + 1.0;
    for (std::size_t m = i; m <= k; ++m) ranks[order[m]] = r;
    i = k + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw NumericalError("rank correlation undefined: constant column");
  return sab / std::sqrt(saa * sbb);
}

struct StatLayout {
  std::vector<std::string> ids;
  // marginal entries: (column, value)
  std::vector<std::pair<Index, double>> marginals;
  Index top_k = 0;
  bool eigen = false;
  bool tau = false;
};

// Statistics of one dataset in StatLayout order; NaN where undefined.
std::vector<double> compute_stats(const Eigen::MatrixXd& data, const StatLayout& layout, bool* eigen_skipped) {
  std::vector<double> out;
  out.reserve(layout.ids.size());
  for (const auto& [j, v] : layout.marginals) {
    double count = 0.0;
    for (Index i = 0; i < data.rows(); ++i)
      if (data(i, j) == v) count += 1.0;
    out.push_back(count);
  }
  if (layout.eigen) {
    try {
      for (double e : rank_correlation_eigenvalues(data, layout.top_k)) out.push_back(e);
    } catch (const NumericalError&) {
      if (eigen_skipped) *eigen_skipped = true;
      for (Index k = 0; k < layout.top_k; ++k) out.push_back(kNaN);
    }
  }
  if (layout.tau) {
    const Eigen::MatrixXd tau = kendall_tau_matrix(data);
    for (Index a = 0; a < data.cols(); ++a)
      for (Index b = a + 1; b < data.cols(); ++b) out.push_back(tau(a, b));
  }
  return out;
}

}  // namespace

std::vector<bool> default_continuous_flags(const MixedOutcomeMatrix& y) {
  std::vector<bool> flags(static_cast<std::size_t>(y.cols()));
  for (Index j = 0; j < y.cols(); ++j) {
    flags[static_cast<std::size_t>(j)] =
        static_cast<double>(y.distinct_values(j).size()) > 0.9 * static_cast<double>(y.rows());
  }
  return flags;
}

ObservedScaleMap::ObservedScaleMap(const MixedOutcomeMatrix& y, const Eigen::MatrixXd& z_snapshot,
                                   std::vector<bool> continuous) {
  if (continuous.empty()) continuous = default_continuous_flags(y);
  if (static_cast<Index>(continuous.size()) != y.cols()) throw ValidationError("continuity flags do not match columns");
  if (z_snapshot.rows() != y.rows() || z_snapshot.cols() != y.cols()) {
    throw ValidationError("latent snapshot shape does not match the data");
  }
  columns_.resize(static_cast<std::size_t>(y.cols()));
  for (Index j = 0; j < y.cols(); ++j) {
    std::vector<std::pair<double, double>> pairs;
    for (Index i = 0; i < y.rows(); ++i)
      if (!y.is_missing(i, j)) pairs.emplace_back(z_snapshot(i, j), y.value(i, j));
    std::sort(pairs.begin(), pairs.end());
    auto& col = columns_[static_cast<std::size_t>(j)];
    col.continuous = continuous[static_cast<std::size_t>(j)];
    for (const auto& [z, v] : pairs) {
      col.z.push_back(z);
      col.y.push_back(v);
    }
  }
}

double ObservedScaleMap::operator()(Index j, double z) const {
  const auto& col = columns_[static_cast<std::size_t>(j)];
  if (z <= col.z.front()) return col.y.front();
  if (z >= col.z.back()) return col.y.back();
  const auto k = static_cast<std::size_t>(std::upper_bound(col.z.begin(), col.z.end(), z) - col.z.begin());
  const double z_lo = col.z[k - 1];
  const double z_hi = col.z[k];
  const double y_lo = col.y[k - 1];
  const double y_hi = col.y[k];
  if (y_lo == y_hi) return y_lo;
  if (col.continuous) return y_lo + (y_hi - y_lo) * (z - z_lo) / (z_hi - z_lo);
  return (z - z_lo <= z_hi - z) ? y_lo : y_hi;
}

namespace {

Eigen::MatrixXd replicate_covariance_factor(const InferentialDraw& draw) {
  Eigen::MatrixXd cov = draw.Lambda * draw.Lambda.transpose();
  cov.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("replicate covariance is not positive definite");
  return llt.matrixL();
}

Eigen::RowVectorXd replicate_row(const Eigen::MatrixXd& chol, const ObservedScaleMap& map, RngStream& rng) {
  const Index J = chol.rows();
  Eigen::VectorXd eps(J);
  for (Index j = 0; j < J; ++j) eps(j) = rng.normal();
  const Eigen::VectorXd z = chol * eps;
  Eigen::RowVectorXd row(J);
  for (Index j = 0; j < J; ++j) row(j) = map(j, z(j));
  return row;
}

}  // namespace

Eigen::RowVectorXd replicate_observation(const InferentialDraw& draw, const LatentResponseMatrix& z_snapshot,
                                         const MixedOutcomeMatrix& y, const std::vector<bool>& continuous,
                                         RngStream& rng) {
  const ObservedScaleMap map(y, z_snapshot.z, continuous);
  return replicate_row(replicate_covariance_factor(draw), map, rng);
}

ReplicatedDataset replicate_dataset(const InferentialDraw& draw, const LatentResponseMatrix& z_snapshot,
                                    const MixedOutcomeMatrix& y, const std::vector<bool>& continuous,
                                    RngStream& rng, std::size_t draw_index) {
  ReplicatedDataset out;
  out.draw_index = draw_index;
  out.y_rep.resize(y.rows(), y.cols());
  if (y.rows() == 0) return out;
  const ObservedScaleMap map(y, z_snapshot.z, continuous);
  const Eigen::MatrixXd chol = replicate_covariance_factor(draw);
  for (Index i = 0; i < y.rows(); ++i) {
    out.y_rep.row(i) = replicate_row(chol, map, rng);
    for (Index j = 0; j < y.cols(); ++j)
      if (y.is_missing(i, j)) out.y_rep(i, j) = kNaN;
  }
  return out;
}

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("kendall_tau_b: length mismatch");
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isnan(x[i]) && !std::isnan(y[i])) pairs.emplace_back(x[i], y[i]);
  const std::size_t n = pairs.size();
  if (n < 2) return kNaN;
  std::sort(pairs.begin(), pairs.end());
  const auto n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t n1 = tied_pairs(n, [&](std::size_t a, std::size_t b) { return pairs[a].first == pairs[b].first; });
  const std::int64_t n3 = tied_pairs(n, [&](std::size_t a, std::size_t b) { return pairs[a] == pairs[b]; });
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = pairs[i].second;
  std::vector<double> buf(n);
  const std::int64_t discordant = count_inversions(ys, buf, 0, n);
  const std::int64_t n2 = tied_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });
  const double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  if (!(denom > 0.0)) return kNaN;
  return static_cast<double>(n0 - n1 - n2 + n3 - 2 * discordant) / denom;
}

Eigen::MatrixXd kendall_tau_matrix(const Eigen::MatrixXd& y) {
  const Index J = y.cols();
  if (y.rows() < 2) throw ValidationError("kendall_tau_matrix needs at least two rows");
  Eigen::MatrixXd tau = Eigen::MatrixXd::Identity(J, J);
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(J));
  for (Index j = 0; j < J; ++j) cols[static_cast<std::size_t>(j)].assign(y.col(j).data(), y.col(j).data() + y.rows());
  for (Index a = 0; a < J; ++a) {
    for (Index b = a + 1; b < J; ++b) {
      tau(a, b) = tau(b, a) = kendall_tau_b(cols[static_cast<std::size_t>(a)], cols[static_cast<std::size_t>(b)]);
    }
  }
  return tau;
}

Eigen::MatrixXd spearman_matrix(const Eigen::MatrixXd& y) {
  const Index J = y.cols();
  Eigen::MatrixXd rho = Eigen::MatrixXd::Identity(J, J);
  const bool complete = !y.array().isNaN().any();
  std::vector<std::vector<double>> ranks;
  if (complete) {
    for (Index j = 0; j < J; ++j) ranks.push_back(average_ranks(std::vector<double>(y.col(j).data(), y.col(j).data() + y.rows())));
  }
  for (Index a = 0; a < J; ++a) {
    for (Index b = a + 1; b < J; ++b) {
      double r = 0.0;
      if (complete) {
        r = pearson(ranks[static_cast<std::size_t>(a)], ranks[static_cast<std::size_t>(b)]);
      } else {
        std::vector<double> xa;
        std::vector<double> xb;
        for (Index i = 0; i < y.rows(); ++i) {
          if (std::isnan(y(i, a)) || std::isnan(y(i, b))) continue;
          xa.push_back(y(i, a));
          xb.push_back(y(i, b));
        }
        if (xa.size() < 2) throw NumericalError("rank correlation undefined: fewer than two complete rows");
        r = pearson(average_ranks(xa), average_ranks(xb));
      }
      rho(a, b) = rho(b, a) = r;
    }
  }
  return rho;
}

std::vector<double> rank_correlation_eigenvalues(const Eigen::MatrixXd& y, Index top_k) {
  if (top_k < 1 || top_k > y.cols()) throw ValidationError("top_k must lie in [1, J]");
  const Eigen::MatrixXd rho = spearman_matrix(y);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(rho, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("eigen decomposition failed");
  std::vector<double> values(solver.eigenvalues().data(), solver.eigenvalues().data() + solver.eigenvalues().size());
  std::sort(values.begin(), values.end(), std::greater<>());
  values.resize(static_cast<std::size_t>(top_k));
  return values;
}

PpcStatistic parse_statistic(const std::string& name) {
  if (name == "marginals") return PpcStatistic::marginals;
  if (name == "eigenvalues") return PpcStatistic::eigenvalues;
  if (name == "tau") return PpcStatistic::tau;
  throw ValidationError("unknown statistic '" + name + "' (expected marginals, eigenvalues or tau)");
}

PpcReport ppc_report(const std::vector<InferentialDraw>& draws, const std::vector<LatentResponseMatrix>& z_snapshots,
                     const MixedOutcomeMatrix& y, const PpcOptions& options) {
  if (draws.size() != z_snapshots.size()) throw ValidationError("draws and latent snapshots are not aligned");
  if (options.n_replicates == 0) throw ValidationError("at least one replicate is required");
  if (options.n_replicates > draws.size()) {
    throw ValidationError("requested " + std::to_string(options.n_replicates) + " replicates but only " +
                          std::to_string(draws.size()) + " draws are available");
  }
  const std::vector<bool> continuous = options.continuous.empty() ? default_continuous_flags(y) : options.continuous;
  auto wants = [&](PpcStatistic s) {
    return std::find(options.statistics.begin(), options.statistics.end(), s) != options.statistics.end();
  };

  StatLayout layout;
  const auto& names = y.column_names();
  if (wants(PpcStatistic::marginals)) {
    for (Index j = 0; j < y.cols(); ++j) {
      if (continuous[static_cast<std::size_t>(j)]) continue;
      for (double v : y.distinct_values(j)) {
        layout.marginals.emplace_back(j, v);
        layout.ids.push_back("marginal:" + names[static_cast<std::size_t>(j)] + ":" + format_value(v));
      }
    }
  }
  if (wants(PpcStatistic::eigenvalues)) {
    if (options.top_k < 1 || options.top_k > y.cols()) throw ValidationError("top_k must lie in [1, J]");
    layout.eigen = true;
    layout.top_k = options.top_k;
    for (Index k = 0; k < options.top_k; ++k) layout.ids.push_back("eigenvalue:" + std::to_string(k + 1));
  }
  if (wants(PpcStatistic::tau)) {
    layout.tau = true;
    for (Index a = 0; a < y.cols(); ++a)
      for (Index b = a + 1; b < y.cols(); ++b)
        layout.ids.push_back("tau:" + names[static_cast<std::size_t>(a)] + ":" + names[static_cast<std::size_t>(b)]);
  }

  const Eigen::MatrixXd observed_data = y.values_with_nan();
  const std::vector<double> observed = compute_stats(observed_data, layout, nullptr);

  const std::size_t R = options.n_replicates;
  std::vector<std::vector<double>> rep_stats(R);
  std::vector<char> eigen_skipped(R, 0);
  const RngStream base(options.seed);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t r = next++; r < R; r = next++) {
      const std::size_t m = r * draws.size() / R;
      RngStream rng = base.split(r);
      const ReplicatedDataset rep = replicate_dataset(draws[m], z_snapshots[m], y, continuous, rng, m);
      bool skipped = false;
      rep_stats[r] = compute_stats(rep.y_rep, layout, &skipped);
      eigen_skipped[r] = skipped ? 1 : 0;
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(R)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  PpcReport report;
  report.replicates = R;
  report.skipped_eigenvalue_replicates = static_cast<std::size_t>(std::count(eigen_skipped.begin(), eigen_skipped.end(), 1));
  for (std::size_t s = 0; s < layout.ids.size(); ++s) {
    PpcRow row;
    row.stat_id = layout.ids[s];
    row.observed = observed[s];
    std::vector<double> values;
    for (std::size_t r = 0; r < R; ++r)
      if (!std::isnan(rep_stats[r][s])) values.push_back(rep_stats[r][s]);
    row.n_valid = values.size();
    if (values.empty()) {
      row.rep_mean = row.rep_q025 = row.rep_q975 = kNaN;
    } else {
      row.rep_mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
      row.rep_q025 = sample_quantile(values, 0.025);
      row.rep_q975 = sample_quantile(std::move(values), 0.975);
      row.flagged = !std::isnan(row.observed) && (row.observed < row.rep_q025 || row.observed > row.rep_q975);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

nlohmann::json ppc_to_json(const PpcReport& report) {
  auto num = [](double v) -> nlohmann::json { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"stat_id", r.stat_id},
                    {"observed", num(r.observed)},
                    {"rep_mean", num(r.rep_mean)},
                    {"rep_q025", num(r.rep_q025)},
                    {"rep_q975", num(r.rep_q975)},
                    {"flagged", r.flagged},
                    {"n_valid", r.n_valid}});
  }
  return {{"replicates", report.replicates},
          {"skipped_eigenvalue_replicates", report.skipped_eigenvalue_replicates},
          {"statistics", rows}};
}

void write_ppc_csv(const std::string& path, const PpcReport& report, const std::vector<std::string>& comment_lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& c : comment_lines) out << "# " << c << '\n';
  out << "stat_id,observed,rep_mean,rep_q025,rep_q975,flagged\n";
  auto num = [](double v) { return std::isnan(v) ? std::string("NA") : format_value(v); };
  for (const auto& r : report.rows) {
    out << r.stat_id << ',' << num(r.observed) << ',' << num(r.rep_mean) << ',' << num(r.rep_q025) << ','
        << num(r.rep_q975) << ',' << (r.flagged ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace splvm
