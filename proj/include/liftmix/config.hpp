#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "liftmix/experiments.hpp"
#include "liftmix/model.hpp"
#include "liftmix/samplers.hpp"

namespace liftmix {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void flatten_json(const nlohmann::json& node, const std::string& prefix,
                         std::map<std::string, nlohmann::json>& out) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) {
      flatten_json(value, prefix.empty() ? key : prefix + "." + key, out);
    }
    return;
  }
  if (prefix.empty()) throw ConfigError("config must be a JSON object");
  if (!out.emplace(prefix, node).second) throw ConfigError("duplicate config key '" + prefix + "'");
}

class KeyReader {
 public:
  explicit KeyReader(std::map<std::string, nlohmann::json> values) : values_(std::move(values)) {}

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const nlohmann::json& require(const std::string& key) {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
  }

  template <class T>
  T get(const std::string& key) {
    const auto& v = require(key);
    try {
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("key '" + key + "' has the wrong type");
    }
  }

  template <class T>
  T get_or(const std::string& key, T fallback) {
    return has(key) ? get<T>(key) : fallback;
  }

  /// Number or array of numbers.
  std::vector<double> numbers(const std::string& key) {
    const auto& v = require(key);
    if (v.is_number()) return {v.get<double>()};
    if (v.is_array()) {
      std::vector<double> out;
      for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError("key '" + key + "' must contain numbers");
        out.push_back(e.get<double>());
      }
      return out;
    }
    throw ConfigError("key '" + key + "' must be a number or an array of numbers");
  }

  /// String or array of strings.
  std::vector<std::string> strings(const std::string& key) {
    const auto& v = require(key);
    if (v.is_string()) return {v.get<std::string>()};
    if (v.is_array()) {
      std::vector<std::string> out;
      for (const auto& e : v) {
        if (!e.is_string()) throw ConfigError("key '" + key + "' must contain strings");
        out.push_back(e.get<std::string>());
      }
      return out;
    }
    throw ConfigError("key '" + key + "' must be a string or an array of strings");
  }

  void reject_unknown() const {
    for (const auto& [key, value] : values_) {
      if (!used_.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }
  }

  void mark_used(const std::string& key) { used_.insert(key); }

 private:
  std::map<std::string, nlohmann::json> values_;
  std::set<std::string> used_;
};

}  // namespace detail

/// Builds an ExperimentConfig from a JSON object whose keys may be nested
/// ({"model": {"kind": ...}}) or dotted ({"model.kind": ...}).
///
/// Required: model.kind, model.alpha, data.source, sampler.kind,
/// run.replicates, run.sweeps, and data.n unless data.source = file.
/// model.alpha may be a scalar together with model.k for a symmetric prior.
/// sampler.kind may be a list to run several samplers on the same replicates.
inline ExperimentConfig parse_config(const nlohmann::json& doc) {
  std::map<std::string, nlohmann::json> flat;
  detail::flatten_json(doc, "", flat);
  detail::KeyReader r(std::move(flat));
  ExperimentConfig cfg;
  try {
    ModelSpec& m = cfg.model;
    m = ModelSpec{};
    m.kind = parse_model_kind(r.get<std::string>("model.kind"));
    m.alpha = r.numbers("model.alpha");
    if (r.has("model.k")) {
      const auto K = r.get<std::size_t>("model.k");
      if (m.alpha.size() == 1) {
        m.alpha.assign(K, m.alpha[0]);
      } else if (m.alpha.size() != K) {
        throw ConfigError("model.alpha has " + std::to_string(m.alpha.size()) + " entries but model.k = " +
                          std::to_string(K));
      }
    }
    if (m.kind == ModelKind::GaussianIso) {
      m.dim = r.get_or<std::size_t>("model.dim", 1);
      m.theta0 = r.has("model.theta0") ? r.numbers("model.theta0") : std::vector<double>{0.0};
      if (m.theta0.size() == 1 && m.dim > 1) m.theta0.assign(m.dim, m.theta0[0]);
      m.sigma2 = r.get_or<double>("model.sigma2", 1.0);
      m.sigma02 = r.get_or<double>("model.sigma02", 1.0);
    }
    if (m.kind == ModelKind::PoissonGamma) {
      m.beta1 = r.get_or<double>("model.beta1", 1.0);
      m.beta2 = r.get_or<double>("model.beta2", 1.0);
    }

    cfg.data.source = parse_data_source(r.get<std::string>("data.source"));
    if (cfg.data.source == DataSource::File) {
      cfg.data.path = r.get<std::string>("data.path");
      cfg.data.header = r.get_or<bool>("data.header", false);
      cfg.data.n = 1;
    } else {
      cfg.data.n = r.get<std::size_t>("data.n");
    }
    if (cfg.data.source == DataSource::Mixture) {
      if (r.has("data.mixture.weights")) cfg.data.mixture.weights = r.numbers("data.mixture.weights");
      if (r.has("data.mixture.means")) cfg.data.mixture.means = r.numbers("data.mixture.means");
      if (r.has("data.mixture.var")) cfg.data.mixture.variance = r.get<double>("data.mixture.var");
    }

    const double xi = r.get_or<double>("sampler.xi", 0.5);
    const double s = r.get_or<double>("sampler.s", 1.0);
    cfg.samplers.clear();
    for (const auto& name : r.strings("sampler.kind")) cfg.samplers.push_back({parse_sampler_kind(name), xi, s});

    cfg.replicates = r.get<std::size_t>("run.replicates");
    cfg.sweeps = r.get<std::size_t>("run.sweeps");
    cfg.seed = r.get_or<std::uint64_t>("run.seed", 1);
    cfg.init = parse_init_mode(r.get_or<std::string>("run.init", "uniform"));
    if (r.has("run.functionals")) cfg.functionals = r.strings("run.functionals");
    cfg.fresh_data = r.get_or<bool>("run.fresh_data", false);
    cfg.output_dir = r.get_or<std::string>("output.dir", "out");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  r.reject_unknown();
  if (cfg.data.source == DataSource::File) {
    // n comes from the file; validate() only needs it positive.
    cfg.data.n = 1;
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

/// Every resolved value, defaults included, as a nested JSON object.
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  const auto& m = cfg.model;
  j["model"]["kind"] = std::string(to_string(m.kind));
  j["model"]["alpha"] = m.alpha;
  j["model"]["k"] = m.num_components();
  if (m.kind == ModelKind::GaussianIso) {
    j["model"]["dim"] = m.dim;
    j["model"]["theta0"] = m.theta0;
    j["model"]["sigma2"] = m.sigma2;
    j["model"]["sigma02"] = m.sigma02;
  }
  if (m.kind == ModelKind::PoissonGamma) {
    j["model"]["beta1"] = m.beta1;
    j["model"]["beta2"] = m.beta2;
  }
  j["data"]["source"] = std::string(to_string(cfg.data.source));
  if (cfg.data.source == DataSource::File) {
    j["data"]["path"] = cfg.data.path;
    j["data"]["header"] = cfg.data.header;
  } else {
    j["data"]["n"] = cfg.data.n;
  }
  if (cfg.data.source == DataSource::Mixture) {
    j["data"]["mixture"]["weights"] = cfg.data.mixture.weights;
    j["data"]["mixture"]["means"] = cfg.data.mixture.means;
    j["data"]["mixture"]["var"] = cfg.data.mixture.variance;
  }
  std::vector<std::string> kinds;
  for (const auto& s : cfg.samplers) kinds.emplace_back(to_string(s.kind));
  j["sampler"]["kind"] = kinds;
  j["sampler"]["xi"] = cfg.samplers.front().xi;
  j["sampler"]["s"] = cfg.samplers.front().s;
  j["run"]["replicates"] = cfg.replicates;
  j["run"]["sweeps"] = cfg.sweeps;
  j["run"]["seed"] = cfg.seed;
  j["run"]["init"] = std::string(to_string(cfg.init));
  j["run"]["functionals"] = cfg.functionals;
  j["run"]["fresh_data"] = cfg.fresh_data;
  j["output"]["dir"] = cfg.output_dir;
  return j;
}

}  // namespace liftmix
