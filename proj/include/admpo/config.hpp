#pragma once

#include <map>
#include <string>

#include "json.hpp"

#include "admpo/loops.hpp"
#include "admpo/model.hpp"
#include "admpo/sac.hpp"

namespace admpo {

// section -> key -> raw value
using ConfigMap = std::map<std::string, std::map<std::string, std::string>>;

// Parses the key-value-with-sections config format:
//   [section]
//   key = value   # comment
ConfigMap parse_config_text(const std::string& text, const std::string& origin);
ConfigMap load_config_file(const std::string& path);

// Built-in defaults for an (env, mode) pair; mode is "online" or "offline".
// Every key a config file may set is present here.
ConfigMap builtin_defaults(const std::string& env_name, const std::string& mode);

// Overlays src on top of dst (src wins).
void merge_config(ConfigMap& dst, const ConfigMap& src);

// Rejects keys that no built-in default defines (catches typos), naming the
// offending section.key.
void check_known_keys(const ConfigMap& cfg, const ConfigMap& known);

struct ResolvedConfig {
  std::string env_name;
  std::string dataset;  // offline only
  AdmConfig model;
  SacConfig sac;
  OnlineLoopConfig online;
  OfflineLoopConfig offline;
  int64_t eval_max_len = 50;        // compounding-error curve length
  int64_t eval_starts = 100;
  int64_t scatter_points = 300;     // per policy tag
  int64_t scatter_horizon = 10;
  std::string sweep_m_values = "2,3,5";
  int64_t sweep_seeds = 3;

  nlohmann::ordered_json to_json(const std::string& mode) const;
};

ResolvedConfig resolve_config(const ConfigMap& merged, const std::string& mode);

}  // namespace admpo
