#include "splvm/chain_io.hpp"

#include <charconv>
#include <cstring>
#include <sstream>

#include "splvm/error.hpp"

namespace splvm {
namespace {

constexpr char kLatentMagic[8] = {'S', 'P', 'L', 'V', 'M', 'L', 'A', 'T'};
constexpr std::uint32_t kLatentVersion = 1;

void append_value(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.push_back(',');
  out.append(buf, res.ptr);
}

void append_block(std::string& out, std::size_t iteration, const char* name, const double* data, Index n) {
  out += std::to_string(iteration);
  out.push_back(',');
  out += name;
  for (Index k = 0; k < n; ++k) append_value(out, data[k]);
  out.push_back('\n');
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated latent snapshot file " + path);
  return v;
}

}  // namespace

std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> metadata_lines(std::uint64_t seed, const std::string& hash) {
  return {std::string("tool=splvm version=") + kToolVersion + " seed=" + std::to_string(seed) + " config=" + hash};
}

std::string format_draw_rows(std::size_t iteration, const WorkingState& s, bool regression) {
  std::string out;
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> lambda = s.Lambda_star;
  append_block(out, iteration, "lambda_star", lambda.data(), lambda.size());
  append_block(out, iteration, "sigma2", s.sigma2.data(), s.sigma2.size());
  append_block(out, iteration, "psi2", s.psi2.data(), s.psi2.size());
  if (regression) {
    append_block(out, iteration, "beta_star", s.beta_star.data(), s.beta_star.size());
    append_block(out, iteration, "alpha", &s.alpha, 1);
  }
  return out;
}

DrawLogWriter::DrawLogWriter(const std::string& path, const std::vector<std::string>& metadata, Index outcomes,
                             Index factors, Index covariates, Algorithm algorithm)
    : out_(path, std::ios::binary), path_(path), covariates_(covariates) {
  if (!out_) throw IoError("cannot write " + path);
  out_ << "# splvm-draws v1\n";
  for (const auto& m : metadata) out_ << "# " << m << '\n';
  out_ << "# layout J=" << outcomes << " Q=" << factors << " P=" << covariates << " algorithm=" << to_string(algorithm)
       << '\n';
  out_ << "iteration,block,values\n";
}

void DrawLogWriter::append(std::size_t iteration, const WorkingState& state) {
  out_ << format_draw_rows(iteration, state, covariates_ > 0);
  if (!out_) throw IoError("write failed for " + path_);
}

void DrawLogWriter::flush() {
  out_.flush();
  if (!out_) throw IoError("write failed for " + path_);
}

DrawLog read_draw_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open draw log " + path);
  DrawLog log;
  std::string line;
  bool layout = false;
  bool version = false;
  while (std::getline(in, line)) {
    if (line.rfind("# splvm-draws v1", 0) == 0) {
      version = true;
      continue;
    }
    if (line.rfind("# layout ", 0) == 0) {
      std::istringstream is(line.substr(9));
      std::string token;
      while (is >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (key == "J") log.outcomes = std::stol(value);
        if (key == "Q") log.factors = std::stol(value);
        if (key == "P") log.covariates = std::stol(value);
        if (key == "algorithm") log.algorithm = parse_algorithm(value);
      }
      layout = true;
      continue;
    }
    if (line.empty() || line[0] == '#' || line.rfind("iteration,", 0) == 0) continue;
    if (!version || !layout) throw IoError(path + ": missing draw log header");

    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto pos = line.find(',', start);
      cells.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (cells.size() < 2) throw IoError(path + ": malformed row");
    const std::size_t iteration = std::stoull(cells[0]);
    const std::string& block = cells[1];
    std::vector<double> values(cells.size() - 2);
    for (std::size_t k = 2; k < cells.size(); ++k) {
      const auto& c = cells[k];
      auto res = std::from_chars(c.data(), c.data() + c.size(), values[k - 2]);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size()) throw IoError(path + ": bad value '" + c + "'");
    }
    auto expect = [&](Index n) {
      if (static_cast<Index>(values.size()) != n) throw IoError(path + ": block " + block + " has wrong length");
    };
    if (block == "lambda_star") {
      expect(log.outcomes * log.factors);
      WorkingState s;
      s.Lambda_star.resize(log.outcomes, log.factors);
      for (Index j = 0; j < log.outcomes; ++j)
        for (Index q = 0; q < log.factors; ++q) s.Lambda_star(j, q) = values[static_cast<std::size_t>(j * log.factors + q)];
      log.states.push_back(std::move(s));
      log.iterations.push_back(iteration);
      continue;
    }
    if (log.iterations.empty() || log.iterations.back() != iteration) throw IoError(path + ": block out of order");
    WorkingState& s = log.states.back();
    const Eigen::Map<const Eigen::VectorXd> v(values.data(), static_cast<Index>(values.size()));
    if (block == "sigma2") {
      expect(log.outcomes);
      s.sigma2 = v;
    } else if (block == "psi2") {
      expect(log.factors);
      s.psi2 = v;
    } else if (block == "beta_star") {
      expect(log.covariates);
      s.beta_star = v;
    } else if (block == "alpha") {
      expect(1);
      s.alpha = values[0];
    } else {
      throw IoError(path + ": unknown block '" + block + "'");
    }
  }
  if (!version) throw IoError(path + ": not a splvm draw log");
  for (const auto& s : log.states) {
    if (s.sigma2.size() != log.outcomes || s.psi2.size() != log.factors || s.beta_star.size() != log.covariates) {
      throw IoError(path + ": incomplete snapshot");
    }
  }
  return log;
}

void write_latent_snapshots(const std::string& path, const std::vector<std::size_t>& iterations,
                            const std::vector<Eigen::MatrixXd>& snapshots, const std::string& metadata) {
  if (iterations.size() != snapshots.size()) throw ValidationError("latent snapshot count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kLatentMagic, sizeof(kLatentMagic));
  write_pod(out, kLatentVersion);
  write_pod(out, static_cast<std::uint64_t>(metadata.size()));
  out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  const std::uint64_t rows = snapshots.empty() ? 0 : static_cast<std::uint64_t>(snapshots.front().rows());
  const std::uint64_t cols = snapshots.empty() ? 0 : static_cast<std::uint64_t>(snapshots.front().cols());
  write_pod(out, static_cast<std::uint64_t>(snapshots.size()));
  write_pod(out, rows);
  write_pod(out, cols);
  for (std::size_t s = 0; s < snapshots.size(); ++s) {
    write_pod(out, static_cast<std::uint64_t>(iterations[s]));
    out.write(reinterpret_cast<const char*>(snapshots[s].data()),
              static_cast<std::streamsize>(sizeof(double) * rows * cols));
  }
  if (!out) throw IoError("write failed for " + path);
}

LatentSnapshots read_latent_snapshots(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open latent snapshots " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kLatentMagic, sizeof(magic)) != 0) throw IoError(path + ": not a latent snapshot file");
  if (read_pod<std::uint32_t>(in, path) != kLatentVersion) throw IoError(path + ": unsupported version");
  LatentSnapshots out;
  const auto meta_len = read_pod<std::uint64_t>(in, path);
  if (meta_len > (1u << 20)) throw IoError(path + ": corrupt metadata length");
  out.metadata.resize(meta_len);
  in.read(out.metadata.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw IoError("truncated latent snapshot file " + path);
  const auto count = read_pod<std::uint64_t>(in, path);
  const auto rows = read_pod<std::uint64_t>(in, path);
  const auto cols = read_pod<std::uint64_t>(in, path);
  for (std::uint64_t s = 0; s < count; ++s) {
    out.iterations.push_back(read_pod<std::uint64_t>(in, path));
    Eigen::MatrixXd z(static_cast<Index>(rows), static_cast<Index>(cols));
    in.read(reinterpret_cast<char*>(z.data()), static_cast<std::streamsize>(sizeof(double) * rows * cols));
    if (!in) throw IoError("truncated latent snapshot file " + path);
    out.z.push_back(std::move(z));
  }
  return out;
}

}  // namespace splvm
