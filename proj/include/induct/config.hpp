#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "induct/error.hpp"
#include "induct/finite_chain.hpp"
#include "induct/lindley.hpp"

namespace induct::config {

using nlohmann::json;

[[noreturn]] inline void bad_field(const std::string& path, const std::string& why) {
  fail(ErrorCode::ConfigInvalid, path + ": " + why);
}

inline double require_number(const json& j, const std::string& path) {
  if (!j.is_number()) bad_field(path, "expected a number");
  return j.get<double>();
}

inline const json& require_field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) bad_field(path + "." + key, "missing required field");
  return j.at(key);
}

/// Finite-chain model: { "n": int, "P": [[...]], "Y": [state indices] }.
struct ChainModel {
  finite_chain::StochasticMatrix p;
  finite_chain::ReturnSet y;
};

inline ChainModel parse_chain(const json& j, const std::string& path = "model") {
  const auto& jn = require_field(j, "n", path);
  if (!jn.is_number_integer() || jn.get<int>() <= 0) bad_field(path + ".n", "expected a positive integer");
  const int n = jn.get<int>();
  const auto& jp = require_field(j, "P", path);
  if (!jp.is_array() || static_cast<int>(jp.size()) != n)
    bad_field(path + ".P", "expected " + std::to_string(n) + " rows");
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    const auto& row = jp.at(i);
    if (!row.is_array() || static_cast<int>(row.size()) != n)
      bad_field(path + ".P[" + std::to_string(i) + "]", "expected " + std::to_string(n) + " entries");
    for (int c = 0; c < n; ++c)
      m(i, c) = require_number(row.at(c), path + ".P[" + std::to_string(i) + "][" + std::to_string(c) + "]");
  }
  const auto& jy = require_field(j, "Y", path);
  if (!jy.is_array() || jy.empty()) bad_field(path + ".Y", "expected a nonempty index array");
  std::vector<Eigen::Index> idx;
  for (std::size_t k = 0; k < jy.size(); ++k) {
    const auto& e = jy.at(k);
    if (!e.is_number_integer()) bad_field(path + ".Y[" + std::to_string(k) + "]", "expected an integer");
    const auto i = e.get<Eigen::Index>();
    if (i < 0 || i >= n) bad_field(path + ".Y[" + std::to_string(k) + "]", "state index out of range");
    idx.push_back(i);
  }
  return {finite_chain::StochasticMatrix::validate(m),
          finite_chain::ReturnSet::from_indices(n, idx)};
}

/// Step law: {"kind":"mixture","atoms":[[y,p],...]} or
/// {"kind":"normal","mean":m,"sd":s} or {"kind":"uniform","a":a,"b":b},
/// with optional "moment_order" (defaults to infinite).
inline lindley::StepDistribution parse_rho(const json& j, const std::string& path = "model") {
  const auto& jk = require_field(j, "kind", path);
  if (!jk.is_string()) bad_field(path + ".kind", "expected a string");
  const std::string kind = jk.get<std::string>();
  double order = std::numeric_limits<double>::infinity();
  if (j.contains("moment_order")) order = require_number(j.at("moment_order"), path + ".moment_order");

  if (kind == "mixture") {
    const auto& ja = require_field(j, "atoms", path);
    if (!ja.is_array() || ja.empty()) bad_field(path + ".atoms", "expected a nonempty array");
    std::vector<lindley::StepDistribution::Atom> atoms;
    for (std::size_t k = 0; k < ja.size(); ++k) {
      const auto& e = ja.at(k);
      const std::string p_k = path + ".atoms[" + std::to_string(k) + "]";
      if (!e.is_array() || e.size() != 2) bad_field(p_k, "expected [y, p]");
      atoms.push_back({require_number(e.at(0), p_k + "[0]"), require_number(e.at(1), p_k + "[1]")});
    }
    return lindley::StepDistribution::mixture(std::move(atoms), order);
  }
  if (kind == "normal") {
    return lindley::StepDistribution::normal(require_number(require_field(j, "mean", path), path + ".mean"),
                                             require_number(require_field(j, "sd", path), path + ".sd"),
                                             order);
  }
  if (kind == "uniform") {
    return lindley::StepDistribution::uniform(require_number(require_field(j, "a", path), path + ".a"),
                                              require_number(require_field(j, "b", path), path + ".b"),
                                              order);
  }
  bad_field(path + ".kind", "unknown step law '" + kind + "'");
}

inline bool is_chain_model(const json& j) { return j.is_object() && j.contains("P"); }

/// Named scalar test functions used by the estimators.
struct FunctionSpec {
  enum class Kind { Identity, Constant, IndicatorZero, Power } kind = Kind::Identity;
  double param = 0.0;

  static FunctionSpec parse(const json& j, const std::string& path) {
    const auto& jk = require_field(j, "kind", path);
    if (!jk.is_string()) bad_field(path + ".kind", "expected a string");
    const std::string kind = jk.get<std::string>();
    FunctionSpec f;
    if (kind == "identity") {
      f.kind = Kind::Identity;
    } else if (kind == "constant") {
      f.kind = Kind::Constant;
      f.param = require_number(require_field(j, "c", path), path + ".c");
    } else if (kind == "indicator_zero") {
      f.kind = Kind::IndicatorZero;
    } else if (kind == "power") {
      f.kind = Kind::Power;
      f.param = require_number(require_field(j, "s", path), path + ".s");
      if (!(f.param >= 0.0)) bad_field(path + ".s", "expected s >= 0");
    } else {
      bad_field(path + ".kind", "unknown function '" + kind + "'");
    }
    return f;
  }

  double operator()(double x) const {
    switch (kind) {
      case Kind::Identity: return x;
      case Kind::Constant: return param;
      case Kind::IndicatorZero: return x == 0.0 ? 1.0 : 0.0;
      case Kind::Power: return std::pow(x, param);
    }
    return 0.0;
  }

  /// Exponent alpha with f in F^1_{u_alpha} (moment bookkeeping).
  double class_alpha() const {
    switch (kind) {
      case Kind::Identity: return 1.0;
      case Kind::Power: return param;
      default: return 0.0;
    }
  }

  std::string name() const {
    switch (kind) {
      case Kind::Identity: return "identity";
      case Kind::Constant: return "constant(" + std::to_string(param) + ")";
      case Kind::IndicatorZero: return "indicator_zero";
      case Kind::Power: return "power(" + std::to_string(param) + ")";
    }
    return "?";
  }

  json to_json() const {
    switch (kind) {
      case Kind::Identity: return {{"kind", "identity"}};
      case Kind::Constant: return {{"kind", "constant"}, {"c", param}};
      case Kind::IndicatorZero: return {{"kind", "indicator_zero"}};
      case Kind::Power: return {{"kind", "power"}, {"s", param}};
    }
    return {};
  }
};

/// Parsed experiment configuration (one JSON document per run).
struct ExperimentConfig {
  std::string command;
  json model;
  json parameters;  // per-command knobs, validated by the dispatcher
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
  std::string out_path;
  std::string format = "json";
};

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> cmds = {
      "verify-finite", "invariant", "kac", "bijection", "drift-check",
      "sandwich", "poisson", "clt", "phi-moment"};
  return cmds;
}

inline bool command_is_randomized(const std::string& command, const json& model) {
  if (command == "verify-finite" || command == "bijection" || command == "sandwich") return false;
  if ((command == "invariant" || command == "drift-check") && is_chain_model(model)) return false;
  return true;
}

inline ExperimentConfig parse_experiment(const json& j) {
  if (!j.is_object()) fail(ErrorCode::ConfigInvalid, "config: expected a JSON object");
  ExperimentConfig cfg;
  if (j.contains("command")) {
    if (!j.at("command").is_string()) bad_field("command", "expected a string");
    cfg.command = j.at("command").get<std::string>();
  }
  cfg.model = require_field(j, "model", "config");
  cfg.parameters = j.contains("parameters") ? j.at("parameters") : json::object();
  if (!cfg.parameters.is_object()) bad_field("parameters", "expected an object");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer() || j.at("seed").get<long long>() < 0)
      bad_field("seed", "expected a nonnegative integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("workers")) {
    if (!j.at("workers").is_number_integer() || j.at("workers").get<int>() < 1)
      bad_field("workers", "expected an integer >= 1");
    cfg.workers = j.at("workers").get<unsigned>();
  }
  if (j.contains("output")) {
    const auto& out = j.at("output");
    if (!out.is_object()) bad_field("output", "expected an object");
    if (out.contains("path")) cfg.out_path = out.at("path").get<std::string>();
    if (out.contains("format")) {
      cfg.format = out.at("format").get<std::string>();
      if (cfg.format != "json" && cfg.format != "csv")
        bad_field("output.format", "expected 'json' or 'csv'");
    }
  }
  return cfg;
}

// Parameter accessors with defaults and validation.
inline double param_number(const json& params, const char* key, double fallback) {
  if (!params.contains(key)) return fallback;
  return require_number(params.at(key), std::string("parameters.") + key);
}

inline std::size_t param_count(const json& params, const char* key, std::size_t fallback) {
  if (!params.contains(key)) return fallback;
  const auto& v = params.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 1)
    bad_field(std::string("parameters.") + key, "expected an integer >= 1");
  return v.get<std::size_t>();
}

}  // namespace induct::config
