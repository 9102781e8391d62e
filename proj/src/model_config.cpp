#include "splvm/model_config.hpp"

#include <fstream>

#include "splvm/error.hpp"
#include "splvm/simulate.hpp"

namespace splvm {
namespace {

double read_number(const nlohmann::json& h, const char* key, double fallback) {
  if (!h.contains(key)) return fallback;
  if (!h[key].is_number()) throw ValidationError(std::string("hyperparameter ") + key + " must be a number");
  return h[key].get<double>();
}

}  // namespace

FactorStructure ModelConfig::resolve_structure(Index outcomes) const {
  if (!structure) {
    FactorStructure s = FactorStructure::single_factor(outcomes);
    return s;
  }
  if (structure->outcomes() != outcomes) {
    throw ValidationError("mask has " + std::to_string(structure->outcomes()) + " rows but the data has " +
                          std::to_string(outcomes) + " outcomes");
  }
  return *structure;
}

ModelConfig parse_model_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("model specification must be a JSON object");
  ModelConfig c;
  try {
    if (j.contains("preset")) {
      const std::string preset = j["preset"].get<std::string>();
      if (preset != "paper_sim") throw ValidationError("unknown preset '" + preset + "'");
      c.structure = paper_sim_structure().structure;
      c.factors = c.structure->factors();
    }
    if (j.contains("Q")) c.factors = j["Q"].get<Index>();
    if (c.factors < 1) throw ValidationError("Q must be at least 1");
    if (j.contains("mask")) {
      const auto& rows = j["mask"];
      if (!rows.is_array() || rows.empty()) throw ValidationError("mask must be a non-empty array of rows");
      FactorStructure s;
      s.mask = BoolMatrix::Constant(static_cast<Index>(rows.size()), c.factors, false);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!rows[r].is_array() || static_cast<Index>(rows[r].size()) != c.factors) {
          throw ValidationError("mask row " + std::to_string(r + 1) + " must have Q entries");
        }
        for (Index q = 0; q < c.factors; ++q) {
          const int v = rows[r][static_cast<std::size_t>(q)].get<int>();
          if (v != 0 && v != 1) throw ValidationError("mask entries must be 0 or 1");
          s.mask(static_cast<Index>(r), q) = v == 1;
        }
      }
      c.structure = s;
    }
    if (c.structure && c.structure->factors() != c.factors) throw ValidationError("mask width does not match Q");
    if (!c.structure && c.factors != 1) throw ValidationError("a mask is required when Q > 1");
    if (j.contains("bifactor") && c.structure) c.structure->bifactor = j["bifactor"].get<bool>();

    if (j.contains("hyperparameters")) {
      const auto& h = j["hyperparameters"];
      Hyperparameters& p = c.hyper;
      p.phi_psi = read_number(h, "phi_psi", p.phi_psi);
      p.nu_psi = read_number(h, "nu_psi", p.nu_psi);
      p.phi_sigma = read_number(h, "phi_sigma", p.phi_sigma);
      p.nu_sigma = read_number(h, "nu_sigma", p.nu_sigma);
      p.m_lambda = read_number(h, "m_lambda", p.m_lambda);
      p.s_lambda = read_number(h, "s_lambda", p.s_lambda);
      p.m_beta = read_number(h, "m_beta", p.m_beta);
      p.s_beta = read_number(h, "s_beta", p.s_beta);
      p.m_alpha = read_number(h, "m_alpha", p.m_alpha);
      p.s_alpha2 = read_number(h, "s_alpha2", p.s_alpha2);
    }
    validate_hyperparameters(c.hyper);

    if (j.contains("regression")) {
      const auto& r = j["regression"];
      c.regression_enabled = r.value("enabled", false);
      if (r.contains("covariates")) c.covariate_columns = r["covariates"].get<std::vector<std::string>>();
      c.standardize_covariates = r.value("standardize", true);
    }
    if (j.contains("continuous")) c.continuous_columns = j["continuous"].get<std::vector<std::string>>();
    if (j.contains("simulation")) c.simulation = j["simulation"];
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model specification: ") + e.what());
  }
  return c;
}

ModelConfig load_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model specification " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse " + path + ": " + e.what());
  }
  return parse_model_config(j);
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j;
  j["Q"] = factors;
  if (structure) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index r = 0; r < structure->outcomes(); ++r) {
      std::vector<int> row;
      for (Index q = 0; q < structure->factors(); ++q) row.push_back(structure->mask(r, q) ? 1 : 0);
      rows.push_back(row);
    }
    j["mask"] = rows;
    j["bifactor"] = structure->bifactor;
  }
  j["hyperparameters"] = {{"phi_psi", hyper.phi_psi},   {"nu_psi", hyper.nu_psi},     {"phi_sigma", hyper.phi_sigma},
                          {"nu_sigma", hyper.nu_sigma}, {"m_lambda", hyper.m_lambda}, {"s_lambda", hyper.s_lambda},
                          {"m_beta", hyper.m_beta},     {"s_beta", hyper.s_beta},     {"m_alpha", hyper.m_alpha},
                          {"s_alpha2", hyper.s_alpha2}};
  j["regression"] = {{"enabled", regression_enabled},
                     {"covariates", covariate_columns},
                     {"standardize", standardize_covariates}};
  if (continuous_columns) j["continuous"] = *continuous_columns;
  if (!simulation.empty()) j["simulation"] = simulation;
  return j;
}

}  // namespace splvm
