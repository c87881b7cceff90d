#pragma once
// Plain-text key=value configuration files with command-line overrides.
// Keys mirror the TrainConfig / ModelConfig / ThresholdConfig field names
// exactly; precedence is CLI > file > default.

#include <sedkit/model.hpp>
#include <sedkit/postprocess.hpp>
#include <sedkit/training.hpp>

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sedkit {

using KeyValues = std::map<std::string, std::string>;

inline KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string stripped = strip(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(line_no) + ": expected key=value");
    kv[strip(stripped.substr(0, eq))] = strip(stripped.substr(eq + 1));
  }
  return kv;
}

namespace detail {

inline double kv_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "': '" + value + "' is not a number");
  }
}

inline std::uint64_t kv_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "': '" + value + "' is not an integer");
  }
}

inline bool kv_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::runtime_error("config: key '" + key + "': '" + value + "' is not a boolean");
}

inline std::vector<std::size_t> kv_size_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string tok;
  while (std::getline(ss, tok, ','))
    out.push_back(static_cast<std::size_t>(kv_u64(key, tok)));
  if (out.empty()) throw std::runtime_error("config: key '" + key + "': empty list");
  return out;
}

}  // namespace detail

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  ThresholdConfig threshold;
};

// Applies key=value pairs onto the defaults. Unknown keys are errors so
// typos surface instead of silently using defaults.
inline RunConfig apply_config(const KeyValues& kv, RunConfig cfg = {}) {
  using detail::kv_bool;
  using detail::kv_double;
  using detail::kv_size_list;
  using detail::kv_u64;
  for (const auto& [key, value] : kv) {
    if (key == "alpha")
      cfg.train.alpha = kv_double(key, value);
    else if (key == "epochs")
      cfg.train.epochs = static_cast<std::size_t>(kv_u64(key, value));
    else if (key == "learning_rate")
      cfg.train.learning_rate = kv_double(key, value);
    else if (key == "beta1")
      cfg.train.beta1 = kv_double(key, value);
    else if (key == "beta2")
      cfg.train.beta2 = kv_double(key, value);
    else if (key == "epsilon")
      cfg.train.epsilon = kv_double(key, value);
    else if (key == "batch_size")
      cfg.train.batch_size = static_cast<std::size_t>(kv_u64(key, value));
    else if (key == "seed")
      cfg.train.seed = kv_u64(key, value);
    else if (key == "glr_enabled")
      cfg.train.glr_enabled = kv_bool(key, value);
    else if (key == "input_bands")
      cfg.model.input_bands = static_cast<std::size_t>(kv_u64(key, value));
    else if (key == "conv_channels")
      cfg.model.conv_channels = kv_size_list(key, value);
    else if (key == "kernel")
      cfg.model.kernel = static_cast<std::size_t>(kv_u64(key, value));
    else if (key == "pool")
      cfg.model.pool = static_cast<std::size_t>(kv_u64(key, value));
    else if (key == "gru_units")
      cfg.model.gru_units = static_cast<std::size_t>(kv_u64(key, value));
    else if (key == "mode") {
      if (value == "fixed")
        cfg.threshold.mode = ThresholdConfig::Mode::Fixed;
      else if (value == "adaptive")
        cfg.threshold.mode = ThresholdConfig::Mode::Adaptive;
      else
        throw std::runtime_error("config: key 'mode': expected fixed or adaptive, got '" + value + "'");
    } else if (key == "fixed_value")
      cfg.threshold.fixed_value = kv_double(key, value);
    else if (key == "adaptive_lambda")
      cfg.threshold.adaptive_lambda = kv_double(key, value);
    else if (key == "floor")
      cfg.threshold.floor = kv_double(key, value);
    else if (key == "ceiling")
      cfg.threshold.ceiling = kv_double(key, value);
    else if (key == "min_duration")
      cfg.threshold.min_duration = kv_double(key, value);
    else
      throw std::runtime_error("config: unknown key '" + key + "'");
  }
  return cfg;
}

// Serializes the effective configuration for manifests and logs.
inline KeyValues config_snapshot(const RunConfig& cfg) {
  KeyValues kv;
  char buf[64];
  const auto put_double = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    kv[key] = buf;
  };
  put_double("alpha", cfg.train.alpha);
  kv["epochs"] = std::to_string(cfg.train.epochs);
  put_double("learning_rate", cfg.train.learning_rate);
  put_double("beta1", cfg.train.beta1);
  put_double("beta2", cfg.train.beta2);
  put_double("epsilon", cfg.train.epsilon);
  kv["batch_size"] = std::to_string(cfg.train.batch_size);
  kv["seed"] = std::to_string(cfg.train.seed);
  kv["glr_enabled"] = cfg.train.glr_enabled ? "true" : "false";
  kv["input_bands"] = std::to_string(cfg.model.input_bands);
  std::string channels;
  for (std::size_t i = 0; i < cfg.model.conv_channels.size(); ++i)
    channels += (i ? "," : "") + std::to_string(cfg.model.conv_channels[i]);
  kv["conv_channels"] = channels;
  kv["kernel"] = std::to_string(cfg.model.kernel);
  kv["pool"] = std::to_string(cfg.model.pool);
  kv["gru_units"] = std::to_string(cfg.model.gru_units);
  kv["mode"] = cfg.threshold.mode == ThresholdConfig::Mode::Fixed ? "fixed" : "adaptive";
  put_double("fixed_value", cfg.threshold.fixed_value);
  put_double("adaptive_lambda", cfg.threshold.adaptive_lambda);
  put_double("floor", cfg.threshold.floor);
  put_double("ceiling", cfg.threshold.ceiling);
  put_double("min_duration", cfg.threshold.min_duration);
  return kv;
}

}  // namespace sedkit
