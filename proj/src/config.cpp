#include "admpo/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "admpo/errors.hpp"

namespace admpo {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

int64_t get_i64(const ConfigMap& cfg, const std::string& section, const std::string& key) {
  const std::string& raw = cfg.at(section).at(key);
  try {
    size_t pos = 0;
    const int64_t v = std::stoll(raw, &pos);
    if (pos != raw.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + section + "." + key + " expects an integer, got '" + raw + "'");
  }
}

double get_f64(const ConfigMap& cfg, const std::string& section, const std::string& key) {
  const std::string& raw = cfg.at(section).at(key);
  try {
    size_t pos = 0;
    const double v = std::stod(raw, &pos);
    if (pos != raw.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + section + "." + key + " expects a number, got '" + raw + "'");
  }
}

bool get_bool(const ConfigMap& cfg, const std::string& section, const std::string& key) {
  const std::string& raw = cfg.at(section).at(key);
  if (raw == "true" || raw == "1") return true;
  if (raw == "false" || raw == "0") return false;
  throw ConfigError("config: " + section + "." + key + " expects true/false, got '" + raw + "'");
}

std::string get_str(const ConfigMap& cfg, const std::string& section, const std::string& key) {
  return cfg.at(section).at(key);
}

}  // namespace

ConfigMap parse_config_text(const std::string& text, const std::string& origin) {
  ConfigMap cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config: malformed section header at " + origin + ":" +
                          std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("config: empty section name at " + origin + ":" + std::to_string(lineno));
      cfg[section];
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos || section.empty())
      throw ConfigError("config: expected 'key = value' at " + origin + ":" +
                        std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config: empty key or value at " + origin + ":" + std::to_string(lineno));
    cfg[section][key] = value;
  }
  return cfg;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text, path);
}

ConfigMap builtin_defaults(const std::string& env_name, const std::string& mode) {
  if (env_name != "pendulum" && env_name != "pointmass")
    throw ConfigError("config: no built-in defaults for env '" + env_name + "'");
  if (mode != "online" && mode != "offline")
    throw ConfigError("config: no built-in defaults for mode '" + mode + "'");

  ConfigMap cfg;
  cfg["run"]["env"] = env_name;
  cfg["run"]["dataset"] = "";

  // model: desk-scale network sizes; the clamp bounds, learning rate, batch,
  // holdout fraction and patience are the standard settings
  auto& model = cfg["model"];
  model["m"] = env_name == "pendulum" ? "5" : "3";
  model["gru_hidden"] = "64";
  model["head_hidden"] = "64";
  model["head_layers"] = "2";
  model["logstd_min"] = "-10";
  model["logstd_max"] = "0.5";
  model["lr"] = "0.001";
  model["batch"] = "256";
  model["holdout_fraction"] = "0.1";
  model["patience"] = mode == "online" ? "3" : "5";
  model["max_epochs"] = mode == "online" ? "15" : "100";
  model["bound_reg_weight"] = "0.0001";

  // sac: tau/gamma/optimizer family are the standard published settings;
  // network width, batch and learning rates are desk-scale substitutes
  auto& sac = cfg["sac"];
  sac["hidden"] = "64";
  sac["layers"] = "2";
  sac["tau"] = "0.005";
  sac["gamma"] = "0.99";
  sac["lr_actor"] = "0.0003";
  sac["lr_critic"] = "0.0003";
  sac["lr_alpha"] = "0.0003";
  sac["batch"] = "128";
  sac["target_entropy"] = env_name == "pendulum" ? "-1" : "-2";
  sac["real_fraction"] = "0.05";
  sac["auto_alpha"] = "true";
  sac["init_alpha"] = "1.0";
  sac["actor_logstd_min"] = "-5";
  sac["actor_logstd_max"] = "2";

  auto& online = cfg["online"];
  online["warmup"] = "1000";
  online["epochs"] = "14";
  online["steps_per_epoch"] = "1000";
  online["retrain_interval"] = "250";
  online["rollouts_per_step"] = "2";
  online["utd"] = "4";
  online["schedule_x"] = "1";
  online["schedule_y"] = "15";
  online["schedule_a"] = "0";
  online["schedule_b"] = "50000";
  online["eval_interval"] = "1000";
  online["eval_episodes"] = "10";
  online["model_buffer_capacity"] = "100000";
  online["env_buffer_capacity"] = "1000000";

  auto& offline = cfg["offline"];
  offline["iterations"] = "60";
  offline["rollouts_per_iter"] = "50";
  offline["horizon"] = "5";
  offline["beta"] = "1.0";
  offline["updates_per_iter"] = "150";
  offline["eval_interval"] = "15";
  offline["eval_episodes"] = "10";
  offline["model_buffer_capacity"] = "100000";

  auto& eval = cfg["eval"];
  eval["max_len"] = "50";
  eval["starts"] = "100";
  eval["scatter_points"] = "300";
  eval["scatter_horizon"] = "10";
  eval["sweep_m_values"] = "2,3,5";
  eval["sweep_seeds"] = "3";

  return cfg;
}

void merge_config(ConfigMap& dst, const ConfigMap& src) {
  for (const auto& [section, kv] : src)
    for (const auto& [key, value] : kv) dst[section][key] = value;
}

void check_known_keys(const ConfigMap& cfg, const ConfigMap& known) {
  for (const auto& [section, kv] : cfg) {
    const auto sit = known.find(section);
    if (sit == known.end()) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : kv) {
      (void)value;
      if (sit->second.find(key) == sit->second.end())
        throw ConfigError("config: unknown key " + section + "." + key);
    }
  }
}

ResolvedConfig resolve_config(const ConfigMap& cfg, const std::string& mode) {
  ResolvedConfig r;
  r.env_name = get_str(cfg, "run", "env");
  r.dataset = get_str(cfg, "run", "dataset");

  r.model.m = get_i64(cfg, "model", "m");
  r.model.gru_hidden = get_i64(cfg, "model", "gru_hidden");
  r.model.head_hidden = get_i64(cfg, "model", "head_hidden");
  r.model.head_layers = get_i64(cfg, "model", "head_layers");
  r.model.logstd_min = get_f64(cfg, "model", "logstd_min");
  r.model.logstd_max = get_f64(cfg, "model", "logstd_max");
  r.model.lr = get_f64(cfg, "model", "lr");
  r.model.batch = get_i64(cfg, "model", "batch");
  r.model.holdout_fraction = get_f64(cfg, "model", "holdout_fraction");
  r.model.patience = get_i64(cfg, "model", "patience");
  r.model.max_epochs = get_i64(cfg, "model", "max_epochs");
  r.model.bound_reg_weight = get_f64(cfg, "model", "bound_reg_weight");
  r.model.validate();

  r.sac.hidden = get_i64(cfg, "sac", "hidden");
  r.sac.layers = get_i64(cfg, "sac", "layers");
  r.sac.tau = get_f64(cfg, "sac", "tau");
  r.sac.gamma = get_f64(cfg, "sac", "gamma");
  r.sac.lr_actor = get_f64(cfg, "sac", "lr_actor");
  r.sac.lr_critic = get_f64(cfg, "sac", "lr_critic");
  r.sac.lr_alpha = get_f64(cfg, "sac", "lr_alpha");
  r.sac.batch = get_i64(cfg, "sac", "batch");
  r.sac.target_entropy = get_f64(cfg, "sac", "target_entropy");
  r.sac.real_fraction = get_f64(cfg, "sac", "real_fraction");
  r.sac.auto_alpha = get_bool(cfg, "sac", "auto_alpha");
  r.sac.init_alpha = get_f64(cfg, "sac", "init_alpha");
  r.sac.actor_logstd_min = get_f64(cfg, "sac", "actor_logstd_min");
  r.sac.actor_logstd_max = get_f64(cfg, "sac", "actor_logstd_max");
  r.sac.validate();

  r.online.warmup = get_i64(cfg, "online", "warmup");
  r.online.epochs = get_i64(cfg, "online", "epochs");
  r.online.steps_per_epoch = get_i64(cfg, "online", "steps_per_epoch");
  r.online.retrain_interval = get_i64(cfg, "online", "retrain_interval");
  r.online.rollouts_per_step = get_i64(cfg, "online", "rollouts_per_step");
  r.online.utd = get_i64(cfg, "online", "utd");
  r.online.h_schedule.x = get_f64(cfg, "online", "schedule_x");
  r.online.h_schedule.y = get_f64(cfg, "online", "schedule_y");
  r.online.h_schedule.a = get_i64(cfg, "online", "schedule_a");
  r.online.h_schedule.b = get_i64(cfg, "online", "schedule_b");
  r.online.eval_interval = get_i64(cfg, "online", "eval_interval");
  r.online.eval_episodes = get_i64(cfg, "online", "eval_episodes");
  r.online.model_buffer_capacity = static_cast<size_t>(get_i64(cfg, "online", "model_buffer_capacity"));
  r.online.env_buffer_capacity = static_cast<size_t>(get_i64(cfg, "online", "env_buffer_capacity"));

  r.offline.iterations = get_i64(cfg, "offline", "iterations");
  r.offline.rollouts_per_iter = get_i64(cfg, "offline", "rollouts_per_iter");
  r.offline.horizon = get_i64(cfg, "offline", "horizon");
  r.offline.beta = get_f64(cfg, "offline", "beta");
  r.offline.updates_per_iter = get_i64(cfg, "offline", "updates_per_iter");
  r.offline.eval_interval = get_i64(cfg, "offline", "eval_interval");
  r.offline.eval_episodes = get_i64(cfg, "offline", "eval_episodes");
  r.offline.model_buffer_capacity = static_cast<size_t>(get_i64(cfg, "offline", "model_buffer_capacity"));

  r.eval_max_len = get_i64(cfg, "eval", "max_len");
  r.eval_starts = get_i64(cfg, "eval", "starts");
  r.scatter_points = get_i64(cfg, "eval", "scatter_points");
  r.scatter_horizon = get_i64(cfg, "eval", "scatter_horizon");
  r.sweep_m_values = get_str(cfg, "eval", "sweep_m_values");
  r.sweep_seeds = get_i64(cfg, "eval", "sweep_seeds");

  if (mode == "online") r.online.validate();
  if (mode == "offline") r.offline.validate();
  return r;
}

nlohmann::ordered_json ResolvedConfig::to_json(const std::string& mode) const {
  nlohmann::ordered_json j;
  j["run"]["env"] = env_name;
  j["run"]["dataset"] = dataset;
  j["run"]["mode"] = mode;
  auto& m = j["model"];
  m["m"] = model.m;
  m["gru_hidden"] = model.gru_hidden;
  m["head_hidden"] = model.head_hidden;
  m["head_layers"] = model.head_layers;
  m["logstd_min"] = model.logstd_min;
  m["logstd_max"] = model.logstd_max;
  m["lr"] = model.lr;
  m["batch"] = model.batch;
  m["holdout_fraction"] = model.holdout_fraction;
  m["patience"] = model.patience;
  m["max_epochs"] = model.max_epochs;
  m["bound_reg_weight"] = model.bound_reg_weight;
  auto& s = j["sac"];
  s["hidden"] = sac.hidden;
  s["layers"] = sac.layers;
  s["tau"] = sac.tau;
  s["gamma"] = sac.gamma;
  s["lr_actor"] = sac.lr_actor;
  s["lr_critic"] = sac.lr_critic;
  s["lr_alpha"] = sac.lr_alpha;
  s["batch"] = sac.batch;
  s["target_entropy"] = sac.target_entropy;
  s["real_fraction"] = sac.real_fraction;
  s["auto_alpha"] = sac.auto_alpha;
  s["init_alpha"] = sac.init_alpha;
  s["actor_logstd_min"] = sac.actor_logstd_min;
  s["actor_logstd_max"] = sac.actor_logstd_max;
  auto& on = j["online"];
  on["warmup"] = online.warmup;
  on["epochs"] = online.epochs;
  on["steps_per_epoch"] = online.steps_per_epoch;
  on["retrain_interval"] = online.retrain_interval;
  on["rollouts_per_step"] = online.rollouts_per_step;
  on["utd"] = online.utd;
  on["schedule_x"] = online.h_schedule.x;
  on["schedule_y"] = online.h_schedule.y;
  on["schedule_a"] = online.h_schedule.a;
  on["schedule_b"] = online.h_schedule.b;
  on["eval_interval"] = online.eval_interval;
  on["eval_episodes"] = online.eval_episodes;
  on["model_buffer_capacity"] = online.model_buffer_capacity;
  on["env_buffer_capacity"] = online.env_buffer_capacity;
  auto& off = j["offline"];
  off["iterations"] = offline.iterations;
  off["rollouts_per_iter"] = offline.rollouts_per_iter;
  off["horizon"] = offline.horizon;
  off["beta"] = offline.beta;
  off["updates_per_iter"] = offline.updates_per_iter;
  off["eval_interval"] = offline.eval_interval;
  off["eval_episodes"] = offline.eval_episodes;
  off["model_buffer_capacity"] = offline.model_buffer_capacity;
  auto& ev = j["eval"];
  ev["max_len"] = eval_max_len;
  ev["starts"] = eval_starts;
  ev["scatter_points"] = scatter_points;
  ev["scatter_horizon"] = scatter_horizon;
  ev["sweep_m_values"] = sweep_m_values;
  ev["sweep_seeds"] = sweep_seeds;
  return j;
}

}  // namespace admpo
