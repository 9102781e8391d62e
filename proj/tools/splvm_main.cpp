// splvm command-line interface: simulate, fit, ppc, diagnose.
//
// Exit codes: 0 success, 2 validation failure, 3 I/O failure, 4 numerical failure.

#include <fnmatch.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "splvm/chain_io.hpp"
#include "splvm/data.hpp"
#include "splvm/diagnostics.hpp"
#include "splvm/error.hpp"
#include "splvm/model.hpp"
#include "splvm/model_config.hpp"
#include "splvm/postprocess.hpp"
#include "splvm/ppc.hpp"
#include "splvm/sampler.hpp"
#include "splvm/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace splvm;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw IoError("cannot parse " + path + ": " + e.what());
  }
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << contents;
  if (!out) throw IoError("write failed for " + path);
}

void write_json(const std::string& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

std::string commented(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += "# " + l + "\n";
  return out;
}

json meta_object(std::uint64_t seed, const std::string& hash) {
  return {{"tool", "splvm"}, {"version", kToolVersion}, {"seed", seed}, {"config_hash", hash}};
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir);
}

std::string join_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

double json_or_nan(const json& j) { return j.is_number() ? j.get<double>() : std::nan(""); }

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string out;
  std::string spec;
  long long individuals = 500;
  std::uint64_t seed = 1;
  std::string cutoffs;
};

std::vector<int> parse_cutoffs(const std::string& text, Index J) {
  std::vector<int> counts;
  for (const auto& item : split_list(text)) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      counts.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError("--cutoffs must be a comma-separated list of integers");
    }
  }
  if (counts.size() == 1) counts.assign(static_cast<std::size_t>(J), counts.front());
  if (static_cast<Index>(counts.size()) != J) {
    throw ValidationError("--cutoffs needs 1 or " + std::to_string(J) + " values");
  }
  return counts;
}

int cmd_simulate(const SimulateArgs& a) {
  if (a.individuals <= 0) throw ValidationError("I must be positive");
  const json raw = read_json(a.spec);
  const ModelConfig config = parse_model_config(raw);
  const json& sim = config.simulation;
  const bool preset = raw.contains("preset");

  Index J = 0;
  if (config.structure) {
    J = config.structure->outcomes();
  } else if (sim.contains("loadings")) {
    J = static_cast<Index>(sim["loadings"].size());
  } else if (sim.contains("outcomes")) {
    J = sim["outcomes"].get<Index>();
  } else {
    throw ValidationError("simulation needs a mask, simulation.loadings or simulation.outcomes");
  }
  if (J < 2) throw ValidationError("simulation needs at least two outcomes");
  const FactorStructure structure = config.resolve_structure(J);
  const ValidationReport report = validate_structure(structure);
  if (!report.ok()) throw ValidationError(report.to_string());
  const Index Q = structure.factors();

  SimulationSettings settings;
  settings.individuals = static_cast<Index>(a.individuals);
  settings.structure = structure;
  settings.seed = a.seed;
  try {
    if (sim.contains("loadings")) {
      const auto& rows = sim["loadings"];
      settings.loadings.resize(J, Q);
      for (Index j = 0; j < J; ++j) {
        if (static_cast<Index>(rows[static_cast<std::size_t>(j)].size()) != Q) {
          throw ValidationError("simulation.loadings row " + std::to_string(j + 1) + " must have Q entries");
        }
        for (Index q = 0; q < Q; ++q) settings.loadings(j, q) = rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(q)].get<double>();
      }
    } else {
      const double value = sim.value("loading", 0.6);
      settings.loadings = structure.mask.cast<double>().matrix() * value;
    }

    if (!a.cutoffs.empty()) {
      settings.cutoff_counts = parse_cutoffs(a.cutoffs, J);
    } else if (sim.contains("cutoffs")) {
      const auto& c = sim["cutoffs"];
      settings.cutoff_counts = c.is_array() ? c.get<std::vector<int>>() : std::vector<int>(static_cast<std::size_t>(J), c.get<int>());
    } else if (preset) {
      settings.cutoff_counts = paper_sim_structure().cutoff_counts;
    } else {
      settings.cutoff_counts.assign(static_cast<std::size_t>(J), 4);
    }

    if (config.regression_enabled) {
      if (!sim.contains("beta")) throw ValidationError("regression is enabled but simulation.beta is missing");
      const auto beta = sim["beta"].get<std::vector<double>>();
      if (beta.empty()) throw ValidationError("simulation.beta must not be empty");
      settings.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Index>(beta.size()));
      RngStream rng = RngStream(a.seed).split(1);
      settings.covariates = simulate_covariates(settings.individuals, settings.beta.size(), rng);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed simulation block: ") + e.what());
  }

  const SimulatedData data = generate_bifactor_data(settings);

  json resolved = {{"model", config.to_json()},
                   {"I", a.individuals},
                   {"cutoffs", settings.cutoff_counts},
                   {"loadings", std::vector<std::vector<double>>()}};
  for (Index j = 0; j < J; ++j) {
    std::vector<double> row(static_cast<std::size_t>(Q));
    for (Index q = 0; q < Q; ++q) row[static_cast<std::size_t>(q)] = settings.loadings(j, q);
    resolved["loadings"].push_back(row);
  }
  const std::string hash = config_hash(resolved.dump());
  const auto meta = metadata_lines(a.seed, hash);

  const fs::path out(a.out);
  if (out.has_parent_path()) ensure_dir(out.parent_path().string());
  const fs::path stem = out.parent_path() / out.stem();
  write_csv(a.out, data.y.values(), data.y.column_names(), meta);

  json truth = truth_to_json(data.truth);
  truth["meta"] = meta_object(a.seed, hash);
  truth["resolved_config"] = resolved;
  std::cout << "wrote " << a.out << " (" << data.y.rows() << " x " << data.y.cols() << ")\n";
  if (config.regression_enabled) {
    std::vector<std::string> names = config.covariate_columns;
    if (static_cast<Index>(names.size()) != settings.beta.size()) {
      names.clear();
      for (Index p = 0; p < settings.beta.size(); ++p) names.push_back("x" + std::to_string(p + 1));
    }
    const std::string cov_path = stem.string() + ".covariates.csv";
    write_csv(cov_path, settings.covariates, names, meta);
    truth["covariates_file"] = cov_path;
    std::cout << "wrote " << cov_path << "\n";
  }
  const std::string truth_path = stem.string() + ".truth.json";
  write_json(truth_path, truth);
  std::cout << "wrote " << truth_path << "\n";
  return 0;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string data;
  std::string spec;
  std::string covariates;
  std::string out_dir = "fit";
  std::string missing_token = "NA";
  std::optional<std::size_t> iters, burnin, thin, keep_latent;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> algorithm;
  unsigned threads = 1;
};

RegressionSpec load_covariates(const ModelConfig& config, const std::string& path, Index individuals,
                               const std::string& missing_token) {
  const CsvTable table = read_csv_table(path, missing_token);
  std::vector<Index> cols;
  RegressionSpec spec;
  spec.enabled = true;
  if (config.covariate_columns.empty()) {
    for (Index c = 0; c < table.values.cols(); ++c) cols.push_back(c);
    spec.covariate_names = table.header;
  } else {
    for (const auto& name : config.covariate_columns) {
      const auto it = std::find(table.header.begin(), table.header.end(), name);
      if (it == table.header.end()) throw ValidationError("covariate column '" + name + "' not found in " + path);
      cols.push_back(static_cast<Index>(it - table.header.begin()));
      spec.covariate_names.push_back(name);
    }
  }
  if (cols.empty()) throw ValidationError("no covariate columns in " + path);
  if (table.values.rows() != individuals) {
    throw ValidationError("covariate file has " + std::to_string(table.values.rows()) + " rows but the data has " +
                          std::to_string(individuals));
  }
  spec.X.resize(table.values.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) spec.X.col(static_cast<Index>(k)) = table.values.col(cols[k]);
  spec.validate(individuals);
  if (config.standardize_covariates) spec.X = standardize_columns(spec.X);
  return spec;
}

int cmd_fit(const FitArgs& a) {
  const json raw = read_json(a.spec);
  const ModelConfig config = parse_model_config(raw);

  // Spec "sampler" block first, command-line flags on top.
  SamplerConfig sc;
  unsigned threads = a.threads;
  if (raw.contains("sampler")) {
    const json& s = raw["sampler"];
    try {
      sc.n_iterations = s.value("iters", sc.n_iterations);
      sc.burn_in = s.value("burnin", sc.burn_in);
      sc.thin = s.value("thin", sc.thin);
      sc.seed = s.value("seed", sc.seed);
      if (s.contains("algorithm")) sc.algorithm = parse_algorithm(s["algorithm"].get<std::string>());
      sc.keep_latent = s.value("keep_latent", std::size_t{200});
    } catch (const json::exception& e) {
      throw ValidationError(std::string("malformed sampler block: ") + e.what());
    }
  } else {
    sc.keep_latent = 200;
  }
  if (a.iters) sc.n_iterations = *a.iters;
  if (a.burnin) sc.burn_in = *a.burnin;
  if (a.thin) sc.thin = *a.thin;
  if (a.seed) sc.seed = *a.seed;
  if (a.algorithm) sc.algorithm = parse_algorithm(*a.algorithm);
  if (a.keep_latent) sc.keep_latent = *a.keep_latent;
  sc.validate();

  const MixedOutcomeMatrix y = load_csv(a.data, a.missing_token);
  const FactorStructure structure = config.resolve_structure(y.cols());
  const ValidationReport report = validate_structure(structure);
  if (!report.ok()) throw ValidationError("factor structure is not identified:\n" + report.to_string());

  RegressionSpec regression;
  if (config.regression_enabled) {
    if (a.covariates.empty()) throw ValidationError("regression is enabled but no --covariates file was given");
    if (!fs::exists(a.covariates)) throw IoError("covariate file " + a.covariates + " does not exist");
    regression = load_covariates(config, a.covariates, y.rows(), a.missing_token);
  } else if (!a.covariates.empty()) {
    std::cerr << "warning: --covariates ignored, regression is disabled in the model specification\n";
  }
  if (config.continuous_columns) {
    for (const auto& name : *config.continuous_columns) {
      const auto& names = y.column_names();
      if (std::find(names.begin(), names.end(), name) == names.end()) {
        throw ValidationError("continuous column '" + name + "' not found in the data");
      }
    }
  }
  if (sc.too_short()) {
    std::cerr << "warning: only " << sc.snapshot_count() << " retained draws; diagnostics need at least 100\n";
  }

  json resolved = {{"model", config.to_json()},
                   {"sampler",
                    {{"iters", sc.n_iterations},
                     {"burnin", sc.burn_in},
                     {"thin", sc.thin},
                     {"seed", sc.seed},
                     {"algorithm", to_string(sc.algorithm)},
                     {"keep_latent", sc.keep_latent}}},
                   {"missing_token", a.missing_token}};
  const std::string hash = config_hash(resolved.dump());
  const auto meta_lines = metadata_lines(sc.seed, hash);
  const json meta = meta_object(sc.seed, hash);

  ensure_dir(a.out_dir);
  DrawLogWriter log(join_path(a.out_dir, "draws.csv"), meta_lines, y.cols(), structure.factors(),
                    regression.covariates(), sc.algorithm);
  const auto observer = [&](std::size_t iter, const WorkingState& state) {
    if (iter > sc.burn_in && (iter - sc.burn_in) % sc.thin == 0) log.append(iter, state);
  };
  const ChainOutput chain = run_chain(y, structure, config.hyper, regression, sc, observer);
  log.flush();

  std::vector<std::size_t> latent_iters;
  std::vector<Eigen::MatrixXd> latent;
  for (std::size_t s = 0; s < chain.snapshots.size(); ++s) {
    if (!chain.has_latent(s)) continue;
    latent_iters.push_back(chain.iterations[s]);
    latent.push_back(inferential_latent(chain.snapshots[s], chain.regression_enabled));
  }
  write_latent_snapshots(join_path(a.out_dir, "latent.bin"), latent_iters, latent, meta_lines.front());

  const RelabelResult relabeled = relabel_signs(to_inferential(chain), &structure);
  const std::vector<NamedChain> chains = parameter_chains(relabeled.draws, structure);
  const std::vector<ParameterSummary> summary = summarize(chains);

  write_json(join_path(a.out_dir, "summary.json"),
             {{"meta", meta}, {"draws", relabeled.draws.size()}, {"parameters", summary_to_json(summary)}});
  write_file(join_path(a.out_dir, "summary.txt"), commented(meta_lines) + summary_to_text(summary));

  write_json(join_path(a.out_dir, "signs.json"), {{"meta", meta},
                                                  {"iterations", chain.iterations},
                                                  {"signs", relabeled.signs},
                                                  {"convention_flips", relabeled.convention_flips},
                                                  {"loss_trace", relabeled.loss_trace},
                                                  {"passes", relabeled.iterations}});

  const auto diag = diagnose(chains);
  write_json(join_path(a.out_dir, "diagnostics.json"),
             {{"meta", meta}, {"max_lag", 20}, {"parameters", diagnostics_to_json(diag)}});
  write_file(join_path(a.out_dir, "diagnostics.txt"), commented(meta_lines) + diagnostics_to_text(diag));

  write_json(join_path(a.out_dir, "meta.json"),
             {{"meta", meta},
              {"command", "fit"},
              {"data", a.data},
              {"covariates", a.covariates.empty() ? json(nullptr) : json(a.covariates)},
              {"columns", y.column_names()},
              {"individuals", y.rows()},
              {"snapshots", chain.snapshots.size()},
              {"latent_snapshots", latent.size()},
              {"interval_repairs", chain.interval_repairs},
              {"config", resolved}});

  std::cout << "fit " << y.rows() << " x " << y.cols() << ", Q=" << structure.factors() << ", "
            << to_string(sc.algorithm) << ", " << chain.snapshots.size() << " draws -> " << a.out_dir << "\n";
  std::cout << summary_to_text(summary);
  if (threads > 1) std::cerr << "note: the Gibbs scan is sequential; --threads only affects ppc\n";
  return 0;
}

// ---------------------------------------------------------------- ppc / diagnose shared

struct FitArtifacts {
  json meta;
  ModelConfig config;
  DrawLog log;
  FactorStructure structure;
};

FitArtifacts load_fit(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("fit directory " + dir + " does not exist");
  FitArtifacts f;
  f.meta = read_json(join_path(dir, "meta.json"));
  try {
    f.config = parse_model_config(f.meta.at("config").at("model"));
  } catch (const json::exception& e) {
    throw IoError(join_path(dir, "meta.json") + " is malformed: " + e.what());
  }
  f.log = read_draw_log(join_path(dir, "draws.csv"));
  if (f.log.states.empty()) throw IoError(join_path(dir, "draws.csv") + " holds no draws");
  f.structure = f.config.resolve_structure(f.log.outcomes);
  return f;
}

std::vector<InferentialDraw> relabeled_draws(const FitArtifacts& f, const std::string& dir) {
  const json signs = read_json(join_path(dir, "signs.json"));
  std::vector<std::vector<int>> s;
  std::vector<std::size_t> iters;
  try {
    s = signs.at("signs").get<std::vector<std::vector<int>>>();
    iters = signs.at("iterations").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw IoError(join_path(dir, "signs.json") + " is malformed: " + e.what());
  }
  if (s.size() != f.log.states.size() || iters != f.log.iterations) {
    throw IoError("signs.json does not match the draw log in " + dir);
  }
  const bool regression = f.log.covariates > 0;
  std::vector<InferentialDraw> draws;
  draws.reserve(s.size());
  for (std::size_t m = 0; m < s.size(); ++m) {
    InferentialDraw d = to_inferential(f.log.states[m], regression);
    for (Index q = 0; q < d.Lambda.cols(); ++q) {
      if (s[m][static_cast<std::size_t>(q)] >= 0) continue;
      d.Lambda.col(q) *= -1.0;
      if (q == 0 && d.beta.size() > 0) d.beta *= -1.0;
    }
    draws.push_back(std::move(d));
  }
  return draws;
}

// ---------------------------------------------------------------- ppc

struct PpcArgs {
  std::string fit_dir;
  std::string data;
  std::string stats = "marginals,eigenvalues,tau";
  std::size_t replicates = 100;
  std::optional<long long> top_k;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

int cmd_ppc(const PpcArgs& a) {
  const FitArtifacts f = load_fit(a.fit_dir);
  const std::string data_path = a.data.empty() ? f.meta.value("data", std::string()) : a.data;
  if (data_path.empty()) throw ValidationError("no --data given and the fit records no data path");
  const std::string token = f.meta["config"].value("missing_token", std::string("NA"));
  const MixedOutcomeMatrix y = load_csv(data_path, token);
  if (y.cols() != f.log.outcomes) {
    throw ValidationError("data has " + std::to_string(y.cols()) + " columns but the fit has " +
                          std::to_string(f.log.outcomes));
  }

  const LatentSnapshots latent = read_latent_snapshots(join_path(a.fit_dir, "latent.bin"));
  std::map<std::size_t, std::size_t> by_iteration;
  for (std::size_t m = 0; m < f.log.iterations.size(); ++m) by_iteration[f.log.iterations[m]] = m;
  const bool regression = f.log.covariates > 0;
  std::vector<InferentialDraw> draws;
  std::vector<LatentResponseMatrix> z;
  for (std::size_t k = 0; k < latent.iterations.size(); ++k) {
    const auto it = by_iteration.find(latent.iterations[k]);
    if (it == by_iteration.end()) throw IoError("latent.bin refers to an iteration missing from the draw log");
    if (latent.z[k].rows() != y.rows() || latent.z[k].cols() != y.cols()) {
      throw ValidationError("data dimensions do not match the stored latent responses");
    }
    draws.push_back(to_inferential(f.log.states[it->second], regression));
    z.push_back({latent.z[k]});
  }
  if (a.replicates > draws.size()) {
    throw ValidationError("--replicates " + std::to_string(a.replicates) + " exceeds the " +
                          std::to_string(draws.size()) + " stored draws with latent responses");
  }

  PpcOptions options;
  options.statistics.clear();
  for (const auto& s : split_list(a.stats)) options.statistics.push_back(parse_statistic(s));
  if (options.statistics.empty()) throw ValidationError("--stats selects no statistic");
  options.n_replicates = a.replicates;
  options.top_k = a.top_k ? static_cast<Index>(*a.top_k) : std::min<Index>(10, y.cols());
  options.seed = a.seed;
  options.threads = a.threads;
  options.continuous = default_continuous_flags(y);
  if (f.config.continuous_columns) {
    options.continuous.assign(static_cast<std::size_t>(y.cols()), false);
    for (const auto& name : *f.config.continuous_columns) {
      const auto& names = y.column_names();
      const auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) throw ValidationError("continuous column '" + name + "' not found in the data");
      options.continuous[static_cast<std::size_t>(it - names.begin())] = true;
    }
  }

  const PpcReport report = ppc_report(draws, z, y, options);

  const json resolved = {{"fit_hash", f.meta["meta"].value("config_hash", std::string())},
                         {"stats", split_list(a.stats)},
                         {"replicates", a.replicates},
                         {"top_k", options.top_k}};
  const std::string hash = config_hash(resolved.dump());
  json out = ppc_to_json(report);
  out["meta"] = meta_object(a.seed, hash);
  out["options"] = resolved;
  out["data"] = data_path;
  write_json(join_path(a.fit_dir, "ppc.json"), out);
  write_ppc_csv(join_path(a.fit_dir, "ppc_plot.csv"), report, metadata_lines(a.seed, hash));

  std::size_t flagged = 0;
  for (const auto& r : report.rows) flagged += r.flagged ? 1 : 0;
  std::cout << report.rows.size() << " statistics, " << flagged << " outside their 95% replicate interval ("
            << report.replicates << " replicates)\n";
  return 0;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
  std::string fit_dir;
  std::string params = "*";
  std::string compare;
  std::string out_dir;
  std::size_t max_lag = 20;
};

std::vector<NamedChain> select_chains(const std::vector<NamedChain>& all, const std::vector<std::string>& patterns) {
  std::vector<bool> keep(all.size(), false);
  for (const auto& p : patterns) {
    bool any = false;
    for (std::size_t k = 0; k < all.size(); ++k) {
      if (fnmatch(p.c_str(), all[k].name.c_str(), 0) == 0) {
        keep[k] = true;
        any = true;
      }
    }
    if (!any) throw ValidationError("unknown parameter '" + p + "'");
  }
  std::vector<NamedChain> out;
  for (std::size_t k = 0; k < all.size(); ++k)
    if (keep[k]) out.push_back(all[k]);
  return out;
}

std::vector<ParameterDiagnostics> diagnose_dir(const std::string& dir, const std::vector<std::string>& patterns,
                                               std::size_t max_lag, json* meta) {
  const FitArtifacts f = load_fit(dir);
  if (meta) *meta = f.meta;
  const auto draws = relabeled_draws(f, dir);
  return diagnose(select_chains(parameter_chains(draws, f.structure), patterns), max_lag);
}

int cmd_diagnose(const DiagnoseArgs& a) {
  if (a.max_lag < 1) throw ValidationError("--max-lag must be at least 1");
  const auto patterns = split_list(a.params);
  if (patterns.empty()) throw ValidationError("--params selects nothing");
  json fit_meta;
  const auto rows = diagnose_dir(a.fit_dir, patterns, a.max_lag, &fit_meta);
  std::map<std::string, double> other;
  if (!a.compare.empty()) {
    for (const auto& r : diagnose_dir(a.compare, patterns, a.max_lag, nullptr)) other[r.name] = r.ess;
  }

  const std::uint64_t seed = fit_meta["meta"].value("seed", std::uint64_t{0});
  const json resolved = {{"fit_hash", fit_meta["meta"].value("config_hash", std::string())},
                         {"params", patterns},
                         {"compare", a.compare},
                         {"max_lag", a.max_lag}};
  const std::string hash = config_hash(resolved.dump());
  const auto meta_lines = metadata_lines(seed, hash);

  json table = diagnostics_to_json(rows);
  std::ostringstream text;
  std::size_t width = 9;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  text << std::left << std::setw(static_cast<int>(width)) << "parameter" << std::right << std::setw(11) << "ess"
       << std::setw(11) << "geweke_z";
  if (!a.compare.empty()) text << std::setw(12) << "ess_compare" << std::setw(11) << "ess_ratio";
  text << '\n';
  std::size_t zero_variance = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    text << std::left << std::setw(static_cast<int>(width)) << r.name << std::right;
    if (!r.error.empty()) {
      zero_variance += r.error.find("zero variance") != std::string::npos ? 1 : 0;
      text << "  " << r.error << '\n';
      continue;
    }
    text << std::fixed << std::setprecision(1) << std::setw(11) << r.ess << std::setprecision(3) << std::setw(11)
         << r.geweke_z;
    if (!a.compare.empty()) {
      const auto it = other.find(r.name);
      const double ess_other = it == other.end() ? std::nan("") : it->second;
      const double ratio = r.ess / ess_other;
      table[k]["ess_compare"] = number_or_null(ess_other);
      table[k]["ess_ratio"] = number_or_null(ratio);
      text << std::setprecision(1) << std::setw(12) << ess_other << std::setprecision(2) << std::setw(11) << ratio;
    }
    text << '\n';
  }

  const std::string out_dir = a.out_dir.empty() ? a.fit_dir : a.out_dir;
  ensure_dir(out_dir);
  write_json(join_path(out_dir, "diagnose.json"),
             {{"meta", meta_object(seed, hash)}, {"options", resolved}, {"parameters", table}});
  write_file(join_path(out_dir, "diagnose.txt"), commented(meta_lines) + text.str());

  std::ostringstream acf;
  acf << commented(meta_lines) << "parameter,lag,rho\n";
  for (const auto& r : rows) {
    for (std::size_t l = 0; l < r.rho.size(); ++l) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.17g", r.rho[l]);
      acf << r.name << ',' << l << ',' << buf << '\n';
    }
  }
  write_file(join_path(out_dir, "acf.csv"), acf.str());

  std::cout << text.str();
  if (zero_variance > 0) std::cout << zero_variance << " parameter(s) flagged: zero variance\n";
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Semiparametric latent variable models for mixed outcomes"};
  app.set_version_flag("--version", std::string("splvm ") + kToolVersion);
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate data from a factor model");
  simulate->add_option("--out", sim.out, "Output CSV for Y")->required();
  simulate->add_option("--spec", sim.spec, "Model specification JSON")->required();
  simulate->add_option("--i", sim.individuals, "Number of individuals")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  simulate->add_option("--cutoffs", sim.cutoffs, "Cutoff count per outcome (one value or a comma list)");

  FitArgs fit;
  auto* fitc = app.add_subcommand("fit", "Run the Gibbs sampler");
  fitc->add_option("--data", fit.data, "Outcome CSV")->required();
  fitc->add_option("--spec", fit.spec, "Model specification JSON")->required();
  fitc->add_option("--covariates", fit.covariates, "Covariate CSV (regression)");
  fitc->add_option("--iters", fit.iters, "Total iterations");
  fitc->add_option("--burnin", fit.burnin, "Burn-in iterations");
  fitc->add_option("--thin", fit.thin, "Thinning interval");
  fitc->add_option("--seed", fit.seed, "Random seed");
  fitc->add_option("--algorithm", fit.algorithm, "px or standard")->check(CLI::IsMember({"px", "standard"}));
  fitc->add_option("--out-dir", fit.out_dir, "Output directory")->capture_default_str();
  fitc->add_option("--keep-latent", fit.keep_latent, "Snapshots that store latent responses (default 200)");
  fitc->add_option("--missing-token", fit.missing_token, "Cell text marking a missing value")->capture_default_str();
  fitc->add_option("--threads", fit.threads, "Worker thread cap")->capture_default_str();

  PpcArgs ppc;
  auto* ppcc = app.add_subcommand("ppc", "Posterior predictive checks");
  ppcc->add_option("--fit-dir", ppc.fit_dir, "Directory written by fit")->required();
  ppcc->add_option("--data", ppc.data, "Outcome CSV (defaults to the fitted data)");
  ppcc->add_option("--stats", ppc.stats, "Comma list of marginals, eigenvalues, tau")->capture_default_str();
  ppcc->add_option("--replicates", ppc.replicates, "Number of replicated datasets")->capture_default_str();
  ppcc->add_option("--top-k", ppc.top_k, "Eigenvalues to report (default min(10, J))");
  ppcc->add_option("--seed", ppc.seed, "Random seed")->capture_default_str();
  ppcc->add_option("--threads", ppc.threads, "Worker thread cap")->capture_default_str();

  DiagnoseArgs diag;
  auto* diagc = app.add_subcommand("diagnose", "ESS, Geweke and autocorrelation report");
  diagc->add_option("--fit-dir", diag.fit_dir, "Directory written by fit")->required();
  diagc->add_option("--params", diag.params, "Comma list of parameter globs, e.g. 'lambda.*'")->capture_default_str();
  diagc->add_option("--compare", diag.compare, "Second fit directory; adds an ESS ratio column");
  diagc->add_option("--out-dir", diag.out_dir, "Output directory (defaults to --fit-dir)");
  diagc->add_option("--max-lag", diag.max_lag, "Largest autocorrelation lag")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*simulate) return cmd_simulate(sim);
  if (*fitc) return cmd_fit(fit);
  if (*ppcc) return cmd_ppc(ppc);
  return cmd_diagnose(diag);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}
