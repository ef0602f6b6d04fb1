#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "maxrank/conformal.hpp"
#include "maxrank/errors.hpp"
#include "maxrank/io.hpp"
#include "maxrank/simulation.hpp"

namespace maxrank {

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Converts `key = value` lines (comments start with #) into a JSON object
// so both config syntaxes share one loading path. Values that parse as
// numbers or booleans become typed; comma lists become arrays.
inline nlohmann::json kv_to_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::object();
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(lineno) +
                            " is not `key = value`");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto parse_scalar = [](const std::string& v) -> nlohmann::json {
      if (v == "true") return true;
      if (v == "false") return false;
      try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) {
          if (d == static_cast<double>(static_cast<long long>(d)) &&
              v.find_first_of(".eE") == std::string::npos) {
            return static_cast<long long>(d);
          }
          return d;
        }
      } catch (...) {
      }
      return v;
    };
    if (value.find(',') != std::string::npos) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& item : split_list(value)) arr.push_back(parse_scalar(item));
      j[key] = arr;
    } else {
      j[key] = parse_scalar(value);
    }
  }
  return j;
}

inline nlohmann::json load_config_json(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& ex) {
      throw ValidationError("bad JSON in " + path.string() + ": " + ex.what());
    }
  }
  return kv_to_json(text);
}

template <typename T>
inline T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("config key '" + key + "' has the wrong type");
  }
}

template <typename T>
inline std::vector<T> get_list(const nlohmann::json& j,
                               const std::string& key) {
  if (!j.contains(key)) {
    throw ValidationError("config is missing required key '" + key + "'");
  }
  const auto& node = j.at(key);
  std::vector<T> out;
  try {
    if (node.is_array()) {
      for (const auto& v : node) out.push_back(v.get<T>());
    } else {
      out.push_back(node.get<T>());
    }
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("config key '" + key + "' has the wrong type");
  }
  if (out.empty()) {
    throw ValidationError("config key '" + key + "' must not be empty");
  }
  return out;
}

}  // namespace config_detail

inline ExperimentGrid grid_from_json(const nlohmann::json& j) {
  ExperimentGrid grid;
  grid.rho_list = config_detail::get_list<double>(j, "rho_list");
  grid.m_list = config_detail::get_list<int>(j, "m_list");
  grid.n_list = config_detail::get_list<int>(j, "n_list");
  grid.alpha = config_detail::get_or<double>(j, "alpha", 0.05);
  grid.trials = config_detail::get_or<int>(j, "trials", 100);
  grid.fresh_draws = config_detail::get_or<int>(j, "fresh_draws", 1000);
  grid.seed = config_detail::get_or<std::uint64_t>(j, "seed", 0);
  grid.allow_negative_rho =
      config_detail::get_or<bool>(j, "allow_negative_rho", false);
  for (const auto& name : config_detail::get_list<std::string>(j, "methods")) {
    grid.methods.push_back(method_from_string(name));
  }
  return grid;
}

inline nlohmann::json grid_to_json(const ExperimentGrid& grid) {
  nlohmann::json j;
  j["rho_list"] = grid.rho_list;
  j["m_list"] = grid.m_list;
  j["n_list"] = grid.n_list;
  j["alpha"] = grid.alpha;
  j["trials"] = grid.trials;
  j["fresh_draws"] = grid.fresh_draws;
  j["seed"] = grid.seed;
  j["allow_negative_rho"] = grid.allow_negative_rho;
  j["methods"] = nlohmann::json::array();
  for (Method m : grid.methods) j["methods"].push_back(to_string(m));
  return j;
}

inline ExperimentGrid load_grid_config(const std::filesystem::path& path) {
  return grid_from_json(config_detail::load_config_json(path));
}

inline SyntheticTask task_from_json(const nlohmann::json& j) {
  SyntheticTask task;
  task.m = config_detail::get_or<int>(j, "m", 1);
  task.shared_weight = config_detail::get_or<double>(j, "shared_weight", 0.0);
  task.noise_scale = config_detail::get_or<double>(j, "noise_scale", 1.0);
  task.n_train = config_detail::get_or<int>(j, "n_train", 100);
  task.n_cal = config_detail::get_or<int>(j, "n_cal", 1000);
  task.n_test = config_detail::get_or<int>(j, "n_test", 100);
  return task;
}

inline nlohmann::json task_to_json(const SyntheticTask& task) {
  nlohmann::json j;
  j["m"] = task.m;
  j["shared_weight"] = task.shared_weight;
  j["noise_scale"] = task.noise_scale;
  j["n_train"] = task.n_train;
  j["n_cal"] = task.n_cal;
  j["n_test"] = task.n_test;
  return j;
}

inline SyntheticTask load_task_config(const std::filesystem::path& path) {
  return task_from_json(config_detail::load_config_json(path));
}

}  // namespace maxrank
