#pragma once

// Experiment configuration: JSON (de)serialization of experiments, model
// specs and constants, plus resolution of "calibrated:<run-id>" references.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spectral_screener/error.hpp"
#include "spectral_screener/estimate.hpp"
#include "spectral_screener/fpca.hpp"
#include "spectral_screener/models.hpp"

namespace spectral::harness {

using nlohmann::json;

enum class Experiment {
  NormBounds,
  TraceBound,
  EffRankBound,
  JumpMinimal,
  JumpPoly,
  EigenvalueSelect,
  EigenvectorCertify,
  CombinedPoly,
  FpcaApprox,
  FpcaJump,
  FpcaSelect,
  Calibrate,
};

inline const std::vector<std::pair<Experiment, std::string>>& experiment_names() {
  static const std::vector<std::pair<Experiment, std::string>> names = {
      {Experiment::NormBounds, "norm_bounds"},
      {Experiment::TraceBound, "trace_bound"},
      {Experiment::EffRankBound, "effrank_bound"},
      {Experiment::JumpMinimal, "jump_minimal"},
      {Experiment::JumpPoly, "jump_poly"},
      {Experiment::EigenvalueSelect, "eigenvalue_select"},
      {Experiment::EigenvectorCertify, "eigenvector_certify"},
      {Experiment::CombinedPoly, "combined_poly"},
      {Experiment::FpcaApprox, "fpca_approx"},
      {Experiment::FpcaJump, "fpca_jump"},
      {Experiment::FpcaSelect, "fpca_select"},
      {Experiment::Calibrate, "calibrate"},
  };
  return names;
}

inline std::string to_string(Experiment e) {
  for (const auto& [tag, name] : experiment_names())
    if (tag == e) return name;
  return "unknown";
}

inline Experiment experiment_from_string(const std::string& s) {
  for (const auto& [tag, name] : experiment_names())
    if (name == s) return tag;
  throw ConfigError("unknown experiment tag '" + s + "'");
}

enum class SamplerKind { Gaussian, Rademacher, Uniform };

// Model description. `kind` is one of explicit, planted, factor, poly,
// operator; only the fields relevant to that kind are read.
struct ModelSpec {
  std::string kind = "poly";
  SamplerKind sampler = SamplerKind::Gaussian;
  Index p = 100;
  std::optional<std::uint64_t> rotation_seed;

  // explicit
  std::vector<double> spectrum;

  // poly / planted: lambda_k = scale k^-beta (planted: for k <= head, then tail_value)
  double beta = 2.0;
  double beta3 = 3.0;
  double c1l = 1.0;
  double c2l = 1.0;
  double c3l = 0.75;
  double scale = 1.0;
  Index head = 5;
  double tail_value = 1e-6;

  // factor
  std::vector<double> strengths{3.0, 2.0, 1.0};
  double noise_var = 1.0;
  std::uint64_t loading_seed = 7;

  // operator
  std::string base = "brownian_motion";
  Index planted_s = 0;  // 0: no planted jump
  double planted_factor = 1e-4;
  double sigma2 = 0.0;
  double grid_offset = 0.5;
  std::vector<Index> m_list{100};
  Index depth = 10;

  // Index s of the jump the experiment expects to recover; 0 means derive
  // it from the model (factor: R, planted: head / planted_s).
  Index target_s = 0;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::NormBounds;
  ModelSpec model;
  std::vector<Index> n_list{1000};
  Index reps = 100;
  std::uint64_t base_seed = 1;
  double alpha = 0.5;
  Regime regime = Regime::Two;
  ConstantsConfig constants;
  std::optional<std::string> constants_ref;  // "calibrated:<run-id>"
  std::string output_dir = "out";
  std::string calibration_dir;  // defaults to <output_dir>/calibration
  unsigned workers = 0;         // 0: hardware concurrency
  std::string run_id = "run";
  // Minimum frequency per flag checked by `run --assert`; empty means every
  // flag must hold in every trial.
  std::map<std::string, double> assertions;

  std::string resolved_calibration_dir() const {
    return calibration_dir.empty() ? output_dir + "/calibration" : calibration_dir;
  }

  void validate() const {
    if (reps < 1) throw ConfigError("config: reps must be >= 1");
    if (n_list.empty()) throw ConfigError("config: n_list must be nonempty");
    for (Index n : n_list)
      if (n < 2) throw ConfigError("config: every n must be >= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("config: alpha must lie in (0, 1)");
    if (model.kind == "operator" && model.m_list.empty()) throw ConfigError("config: m_list must be nonempty");
    if (run_id.empty() || run_id.find_first_of("/\\ ") != std::string::npos) {
      throw ConfigError("config: run_id must be a nonempty token without slashes or spaces");
    }
    constants.validate();
  }
};

// ------------------------------------------------------------- constants ---

inline json constants_to_json(const ConstantsConfig& c) {
  json j;
  j["C"] = c.C;
  j["c0"] = c.c0;
  j["c1"] = c.c1;
  j["C1_regime"] = c.C1_regime;
  j["C2_regime"] = c.C2_regime;
  j["gamma"] = c.gamma;
  const auto opt = [&](const char* key, const std::optional<double>& v) {
    j[key] = v ? json(*v) : json(nullptr);
  };
  opt("c3", c.c3);
  opt("c4l", c.c4l);
  j["c4l_formula"] = c.c4l_formula;
  opt("c7l", c.c7l);
  opt("c9l", c.c9l);
  opt("c10l", c.c10l);
  j["lambda0"] = c.lambda0 == ConstantsConfig::Lambda0Reading::Rho0 ? "rho0" : "rho1";
  j["source"] = c.source == ConstantsConfig::Source::Calibrated ? "calibrated" : "default";
  j["run_id"] = c.run_id;
  return j;
}

inline ConstantsConfig constants_from_json(const json& j) {
  ConstantsConfig c;
  if (!j.is_object()) throw ConfigError("constants must be an object or \"calibrated:<run-id>\"");
  const auto num = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = j.at(key).get<double>();
  };
  const auto opt = [&](const char* key, std::optional<double>& dst) {
    if (j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<double>();
  };
  num("C", c.C);
  num("c0", c.c0);
  num("c1", c.c1);
  num("C1_regime", c.C1_regime);
  num("C2_regime", c.C2_regime);
  num("gamma", c.gamma);
  opt("c3", c.c3);
  opt("c4l", c.c4l);
  opt("c7l", c.c7l);
  opt("c9l", c.c9l);
  opt("c10l", c.c10l);
  if (j.contains("c4l_formula")) c.c4l_formula = j.at("c4l_formula").get<std::string>();
  if (j.contains("lambda0")) {
    const auto v = j.at("lambda0").get<std::string>();
    if (v == "rho0") c.lambda0 = ConstantsConfig::Lambda0Reading::Rho0;
    else if (v == "rho1") c.lambda0 = ConstantsConfig::Lambda0Reading::Rho1;
    else throw ConfigError("constants: lambda0 must be rho0 or rho1");
  }
  if (j.contains("source")) {
    const auto v = j.at("source").get<std::string>();
    if (v != "default" && v != "calibrated") throw ConfigError("constants: source must be default or calibrated");
    c.source = v == "calibrated" ? ConstantsConfig::Source::Calibrated : ConstantsConfig::Source::Default;
  }
  if (j.contains("run_id")) c.run_id = j.at("run_id").get<std::string>();
  c.validate();
  return c;
}

// ----------------------------------------------------------- calibration ---

// One calibrated pair of constants, keyed by (model kind, n, p).
struct CalibrationEntry {
  std::string model_kind;
  Index n = 0;
  Index p = 0;
  Index reps = 0;
  double c1 = 0.0;
  double C = 0.0;
  double level_c1 = 0.0;
  double level_C = 0.0;
};

inline json to_json(const CalibrationEntry& e) {
  return json{{"model_kind", e.model_kind}, {"n", e.n},       {"p", e.p},
              {"reps", e.reps},             {"c1", e.c1},     {"C", e.C},
              {"level_c1", e.level_c1},     {"level_C", e.level_C}};
}

inline CalibrationEntry calibration_entry_from_json(const json& j) {
  CalibrationEntry e;
  e.model_kind = j.at("model_kind").get<std::string>();
  e.n = j.at("n").get<Index>();
  e.p = j.at("p").get<Index>();
  e.reps = j.at("reps").get<Index>();
  e.c1 = j.at("c1").get<double>();
  e.C = j.at("C").get<double>();
  e.level_c1 = j.value("level_c1", 0.0);
  e.level_C = j.value("level_C", 0.0);
  return e;
}

inline std::string sidecar_path(const std::string& dir, const std::string& run_id) {
  return dir + "/" + run_id + ".json";
}

inline std::vector<CalibrationEntry> read_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("calibration sidecar not found: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("calibration sidecar " + path + " is not valid JSON: " + e.what());
  }
  std::vector<CalibrationEntry> out;
  for (const auto& e : j.at("entries")) out.push_back(calibration_entry_from_json(e));
  return out;
}

// Adds or replaces the entry with the same (model kind, n, p).
inline void write_sidecar(const std::string& dir, const std::string& run_id, const CalibrationEntry& entry) {
  std::filesystem::create_directories(dir);
  const std::string path = sidecar_path(dir, run_id);
  std::vector<CalibrationEntry> entries;
  if (std::filesystem::exists(path)) entries = read_sidecar(path);
  bool replaced = false;
  for (auto& e : entries) {
    if (e.model_kind == entry.model_kind && e.n == entry.n && e.p == entry.p) {
      e = entry;
      replaced = true;
    }
  }
  if (!replaced) entries.push_back(entry);
  json j;
  j["run_id"] = run_id;
  j["procedure"] = "empirical quantiles of the trace and operator-norm errors (stand-in for cross validation)";
  j["entries"] = json::array();
  for (const auto& e : entries) j["entries"].push_back(to_json(e));
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write calibration sidecar " + path);
  out << j.dump(2) << '\n';
}

// Calibrated constants for (kind, n, p): the exact entry when present, else
// the first entry of the run (constants transfer across models).
inline ConstantsConfig calibrated_constants(const std::vector<CalibrationEntry>& entries, const std::string& run_id,
                                            const std::string& kind, Index n, Index p,
                                            ConstantsConfig base = {}) {
  if (entries.empty()) throw ConfigError("calibration run " + run_id + " has no entries");
  const CalibrationEntry* pick = &entries.front();
  for (const auto& e : entries)
    if (e.model_kind == kind && e.n == n && e.p == p) pick = &e;
  base.c1 = pick->c1;
  base.C = pick->C;
  base.source = ConstantsConfig::Source::Calibrated;
  base.run_id = run_id;
  return base;
}

// ----------------------------------------------------------------- model ---

inline const char* to_string(SamplerKind s) {
  switch (s) {
    case SamplerKind::Gaussian: return "gaussian";
    case SamplerKind::Rademacher: return "rademacher";
    case SamplerKind::Uniform: return "uniform";
  }
  return "unknown";
}

inline SamplerKind sampler_from_string(const std::string& s) {
  if (s == "gaussian") return SamplerKind::Gaussian;
  if (s == "rademacher") return SamplerKind::Rademacher;
  if (s == "uniform") return SamplerKind::Uniform;
  throw ConfigError("unknown sampler '" + s + "'");
}

inline json model_to_json(const ModelSpec& m) {
  json j;
  j["kind"] = m.kind;
  j["sampler"] = to_string(m.sampler);
  j["p"] = m.p;
  j["rotation_seed"] = m.rotation_seed ? json(*m.rotation_seed) : json(nullptr);
  j["spectrum"] = m.spectrum;
  j["beta"] = m.beta;
  j["beta3"] = m.beta3;
  j["c1l"] = m.c1l;
  j["c2l"] = m.c2l;
  j["c3l"] = m.c3l;
  j["scale"] = m.scale;
  j["head"] = m.head;
  j["tail_value"] = m.tail_value;
  j["strengths"] = m.strengths;
  j["noise_var"] = m.noise_var;
  j["loading_seed"] = m.loading_seed;
  j["base"] = m.base;
  j["planted_s"] = m.planted_s;
  j["planted_factor"] = m.planted_factor;
  j["sigma2"] = m.sigma2;
  j["grid_offset"] = m.grid_offset;
  j["m_list"] = m.m_list;
  j["depth"] = m.depth;
  j["target_s"] = m.target_s;
  return j;
}

inline ModelSpec model_from_json(const json& j) {
  ModelSpec m;
  const auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
  };
  get("kind", m.kind);
  if (j.contains("sampler")) m.sampler = sampler_from_string(j.at("sampler").get<std::string>());
  get("p", m.p);
  if (j.contains("rotation_seed") && !j.at("rotation_seed").is_null()) {
    m.rotation_seed = j.at("rotation_seed").get<std::uint64_t>();
  }
  get("spectrum", m.spectrum);
  get("beta", m.beta);
  get("beta3", m.beta3);
  get("c1l", m.c1l);
  get("c2l", m.c2l);
  get("c3l", m.c3l);
  get("scale", m.scale);
  get("head", m.head);
  get("tail_value", m.tail_value);
  get("strengths", m.strengths);
  get("noise_var", m.noise_var);
  get("loading_seed", m.loading_seed);
  get("base", m.base);
  get("planted_s", m.planted_s);
  get("planted_factor", m.planted_factor);
  get("sigma2", m.sigma2);
  get("grid_offset", m.grid_offset);
  get("m_list", m.m_list);
  get("depth", m.depth);
  get("target_s", m.target_s);
  static const std::vector<std::string> kinds{"explicit", "planted", "factor", "poly", "operator"};
  if (std::find(kinds.begin(), kinds.end(), m.kind) == kinds.end()) {
    throw ConfigError("unknown model kind '" + m.kind + "'");
  }
  return m;
}

// Decay parameters used by the polynomial-decay rules. For a planted model
// these are the nominal envelope of its head.
inline PolyDecayParams poly_params(const ModelSpec& m) {
  PolyDecayParams out;
  out.p = m.p;
  out.beta1 = m.beta;
  out.beta2 = m.beta;
  out.beta3 = m.beta3;
  out.c1l = m.c1l;
  out.c2l = m.c2l;
  out.c3l = m.c3l;
  out.scale = m.scale;
  out.rotation_seed = m.rotation_seed;
  return out;
}

inline PopulationModel build_population(const ModelSpec& m) {
  if (m.kind == "explicit") {
    return build_explicit(Eigen::Map<const Vector>(m.spectrum.data(), static_cast<Index>(m.spectrum.size())),
                          m.rotation_seed);
  }
  if (m.kind == "planted") {
    Vector spectrum(m.p);
    for (Index k = 1; k <= m.p; ++k) {
      spectrum(k - 1) = k <= m.head ? m.scale * std::pow(static_cast<double>(k), -m.beta) : m.tail_value;
    }
    return build_explicit(spectrum, m.rotation_seed);
  }
  if (m.kind == "factor") {
    FactorParams f;
    f.p = m.p;
    f.factor_strengths = m.strengths;
    f.noise_var = m.noise_var;
    f.loading_seed = m.loading_seed;
    return build_factor(f);
  }
  if (m.kind == "poly") return build_poly_decay(poly_params(m));
  throw ConfigError("model kind '" + m.kind + "' has no population matrix");
}

inline CovarianceOperator build_operator(const ModelSpec& m) {
  CovarianceOperator base;
  if (m.base == "brownian_motion") base = brownian_motion();
  else if (m.base == "brownian_bridge") base = brownian_bridge();
  else throw ConfigError("unknown operator base '" + m.base + "'");
  if (m.planted_s > 0) return planted_jump(base, m.planted_s, m.planted_factor);
  return base;
}

inline Index target_index(const ModelSpec& m) {
  if (m.target_s > 0) return m.target_s;
  if (m.kind == "factor") return static_cast<Index>(m.strengths.size());
  if (m.kind == "planted") return m.head;
  if (m.kind == "operator") return m.planted_s;
  return 0;
}

// ---------------------------------------------------------------- config ---

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.experiment);
  j["model"] = model_to_json(c.model);
  j["n_list"] = c.n_list;
  j["reps"] = c.reps;
  j["base_seed"] = c.base_seed;
  j["alpha"] = c.alpha;
  j["regime"] = to_int(c.regime);
  j["constants"] = c.constants_ref ? json(*c.constants_ref) : constants_to_json(c.constants);
  j["output_dir"] = c.output_dir;
  j["calibration_dir"] = c.calibration_dir;
  j["workers"] = c.workers;
  j["run_id"] = c.run_id;
  j["assert"] = c.assertions;
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  try {
    ExperimentConfig c;
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (j.contains("experiment")) c.experiment = experiment_from_string(j.at("experiment").get<std::string>());
    if (j.contains("model")) c.model = model_from_json(j.at("model"));
    if (j.contains("n_list")) c.n_list = j.at("n_list").get<std::vector<Index>>();
    if (j.contains("reps")) c.reps = j.at("reps").get<Index>();
    if (j.contains("base_seed")) c.base_seed = j.at("base_seed").get<std::uint64_t>();
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
    if (j.contains("regime")) c.regime = regime_from_int(j.at("regime").get<int>());
    if (j.contains("constants")) {
      const json& k = j.at("constants");
      if (k.is_string()) {
        const auto ref = k.get<std::string>();
        if (ref.rfind("calibrated:", 0) != 0 || ref.size() == 11) {
          throw ConfigError("constants reference must look like calibrated:<run-id>");
        }
        c.constants_ref = ref;
      } else {
        c.constants = constants_from_json(k);
      }
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("calibration_dir")) c.calibration_dir = j.at("calibration_dir").get<std::string>();
    if (j.contains("workers")) c.workers = j.at("workers").get<unsigned>();
    if (j.contains("run_id")) c.run_id = j.at("run_id").get<std::string>();
    if (j.contains("assert")) c.assertions = j.at("assert").get<std::map<std::string, double>>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

// Applies SPECTRAL_SCREENER_OUT when set.
inline void apply_environment(ExperimentConfig& c) {
  if (const char* out = std::getenv("SPECTRAL_SCREENER_OUT"); out != nullptr && *out != '\0') {
    c.output_dir = out;
  }
}

// Constants for a given (n, p): explicit values, or the calibrated entry.
inline ConstantsConfig resolve_constants(const ExperimentConfig& c, Index n, Index p) {
  if (!c.constants_ref) return c.constants;
  const std::string run_id = c.constants_ref->substr(11);
  const auto entries = read_sidecar(sidecar_path(c.resolved_calibration_dir(), run_id));
  return calibrated_constants(entries, run_id, c.model.kind, n, p, c.constants);
}

}  // namespace spectral::harness
