#include "admpo/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "admpo/config.hpp"
#include "admpo/data.hpp"
#include "admpo/env.hpp"
#include "admpo/errors.hpp"
#include "admpo/evalkit.hpp"
#include "admpo/loops.hpp"
#include "admpo/model.hpp"
#include "admpo/rollout.hpp"
#include "admpo/sac.hpp"
#include "admpo/uncertainty.hpp"
#include "admpo/util.hpp"

namespace admpo {

namespace {

constexpr int kRunManifestVersion = 1;

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  uint64_t seed = 0;
  std::optional<std::string> env_name;
  std::optional<std::string> dataset;
  std::optional<int64_t> m;
  std::optional<double> beta;
  std::optional<int64_t> horizon;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool dataset_required) {
  cmd->add_option("--config", args.config_path, "config file (key = value with [sections])");
  cmd->add_option("--seed", args.seed, "global seed; all randomness derives from it");
  cmd->add_option("--out", args.out_dir, "run directory for all artifacts")->required();
  cmd->add_option("--env", args.env_name, "environment name (pendulum or pointmass)");
  auto* ds = cmd->add_option("--dataset", args.dataset, "dataset file path");
  if (dataset_required) ds->required();
  cmd->add_option("--m", args.m, "maximum backtracking length override");
  cmd->add_option("--beta", args.beta, "uncertainty penalty coefficient override");
  cmd->add_option("--horizon", args.horizon, "roll-out horizon override");
}

// defaults <- config file <- flag overrides
ResolvedConfig build_config(const CommonArgs& args, const std::string& mode) {
  ConfigMap file_cfg;
  if (!args.config_path.empty()) file_cfg = load_config_file(args.config_path);

  std::string env_name = "pendulum";
  if (auto it = file_cfg.find("run"); it != file_cfg.end()) {
    if (auto kit = it->second.find("env"); kit != it->second.end()) env_name = kit->second;
  }
  if (args.env_name) env_name = *args.env_name;

  ConfigMap merged = builtin_defaults(env_name, mode);
  check_known_keys(file_cfg, merged);
  merge_config(merged, file_cfg);

  ConfigMap overrides;
  overrides["run"]["env"] = env_name;
  if (args.dataset) overrides["run"]["dataset"] = *args.dataset;
  if (args.m) overrides["model"]["m"] = std::to_string(*args.m);
  if (args.beta) overrides["offline"]["beta"] = std::to_string(*args.beta);
  if (args.horizon) overrides["offline"]["horizon"] = std::to_string(*args.horizon);
  merge_config(merged, overrides);

  return resolve_config(merged, mode);
}

class RunDir {
 public:
  RunDir(const std::string& out_dir, const std::string& command, uint64_t seed,
         const nlohmann::ordered_json& resolved)
      : dir_(out_dir) {
    std::filesystem::create_directories(dir_);
    manifest_["format_version"] = kRunManifestVersion;
    manifest_["command"] = command;
    manifest_["seed"] = seed;
    manifest_["resolved_config"] = resolved;
    manifest_["started_at"] = timestamp();
    manifest_["artifacts"] = nlohmann::ordered_json::array();
  }

  std::string path(const std::string& name) {
    manifest_["artifacts"].push_back(name);
    return dir_ + "/" + name;
  }

  void extra(const std::string& key, const nlohmann::ordered_json& value) {
    manifest_[key] = value;
  }

  void finish() {
    manifest_["finished_at"] = timestamp();
    std::ofstream out(dir_ + "/manifest.json", std::ios::trunc);
    if (!out) throw IoError("manifest: cannot open '" + dir_ + "/manifest.json'");
    out << manifest_.dump(2) << "\n";
  }

 private:
  std::string dir_;
  nlohmann::ordered_json manifest_;
};

Dataset load_dataset_checked(const std::string& path, const Env& env) {
  Dataset ds = read_dataset(path);
  if (ds.buffer.state_dim() != env.spec().state_dim ||
      ds.buffer.action_dim() != env.spec().action_dim)
    throw ConfigError("dataset: dims of '" + path + "' do not match env '" + env.spec().name + "'");
  return ds;
}

int cmd_train_online(const CommonArgs& args) {
  ResolvedConfig cfg = build_config(args, "online");
  auto env = make_env(cfg.env_name);
  RunDir run(args.out_dir, "train-online", args.seed, cfg.to_json("online"));
  auto result = run_online(*env, cfg.model, cfg.sac, cfg.online, args.seed, args.out_dir);
  run.path("metrics.jsonl");
  run.path("agent.admp");
  run.path("agent.json");
  if (cfg.online.rollouts_per_step > 0) {
    run.path("model.admp");
    run.path("model.json");
  }
  if (!result.metrics.empty())
    run.extra("final_mean_return", result.metrics.back()["mean_return"]);
  run.finish();
  return 0;
}

int cmd_train_offline(const CommonArgs& args) {
  ResolvedConfig cfg = build_config(args, "offline");
  if (cfg.dataset.empty())
    throw ConfigError("train-offline: required option 'dataset' is missing (--dataset)");
  auto env = make_env(cfg.env_name);
  Dataset ds = load_dataset_checked(cfg.dataset, *env);
  RunDir run(args.out_dir, "train-offline", args.seed, cfg.to_json("offline"));
  auto result = run_offline(*env, ds.buffer, cfg.model, cfg.sac, cfg.offline, args.seed,
                            args.out_dir);
  run.path("metrics.jsonl");
  run.path("agent.admp");
  run.path("agent.json");
  run.path("model.admp");
  run.path("model.json");
  run.extra("dataset_manifest", ds.manifest);
  run.extra("final_mean_return", result.metrics.back()["mean_return"]);
  run.finish();
  return 0;
}

int cmd_gen_dataset(const CommonArgs& args, const std::string& policy_spec, int64_t episodes) {
  const std::string env_name = args.env_name.value_or("pendulum");
  auto env = make_env(env_name);
  auto policy = make_behavior_policy(policy_spec, env->spec());
  nlohmann::ordered_json resolved;
  resolved["run"]["env"] = env_name;
  resolved["run"]["policy"] = policy_spec;
  resolved["run"]["episodes"] = episodes;
  RunDir run(args.out_dir, "gen-dataset", args.seed, resolved);
  auto manifest = gen_dataset(*env, *policy, policy_spec, episodes, args.seed,
                              run.path("dataset.admd"));
  run.extra("dataset_manifest", manifest);
  run.finish();
  return 0;
}

int cmd_eval_model(const CommonArgs& args, const std::string& baseline,
                   const std::string& model_ckpt) {
  ResolvedConfig cfg = build_config(args, "offline");
  if (cfg.dataset.empty())
    throw ConfigError("eval-model: required option 'dataset' is missing (--dataset)");
  auto env = make_env(cfg.env_name);
  Dataset ds = load_dataset_checked(cfg.dataset, *env);
  RunDir run(args.out_dir, "eval-model", args.seed, cfg.to_json("offline"));

  std::unique_ptr<AdmModel> model;
  if (!model_ckpt.empty()) {
    model = std::make_unique<AdmModel>(AdmModel::load(model_ckpt));
  } else {
    model = std::make_unique<AdmModel>(cfg.model, env->spec().state_dim, env->spec().action_dim,
                                       Rng::combine(args.seed, 1));
    model->train(ds.buffer, Rng::combine(args.seed, 2));
    model->save(args.out_dir + "/model");
    run.path("model.admp");
    run.path("model.json");
  }

  auto adm_curve = compounding_error_adm(*model, ds.buffer, cfg.eval_max_len, cfg.eval_starts,
                                         Rng::combine(args.seed, 3));
  write_curve_csv(run.path("curve_adm.csv"), adm_curve);

  if (baseline == "bootstrap-rnn" || baseline == "both") {
    BootstrapRnnModel boot(cfg.model, env->spec().state_dim, env->spec().action_dim,
                           Rng::combine(args.seed, 4));
    boot.train(ds.buffer, Rng::combine(args.seed, 5));
    write_curve_csv(run.path("curve_bootstrap_rnn.csv"),
                    compounding_error_bootstrap(boot, ds.buffer, cfg.eval_max_len,
                                                cfg.eval_starts, Rng::combine(args.seed, 3)));
  }
  if (baseline == "ensemble" || baseline == "both") {
    EnsembleConfig ecfg;
    ecfg.hidden = cfg.model.head_hidden;
    ecfg.layers = cfg.model.head_layers;
    ecfg.lr = cfg.model.lr;
    ecfg.batch = cfg.model.batch;
    ecfg.patience = cfg.model.patience;
    ecfg.max_epochs = cfg.model.max_epochs;
    EnsembleModel ens(ecfg, env->spec().state_dim, env->spec().action_dim,
                      Rng::combine(args.seed, 6));
    ens.train(ds.buffer, Rng::combine(args.seed, 7));
    write_curve_csv(run.path("curve_ensemble.csv"),
                    compounding_error_ensemble(ens, ds.buffer, cfg.eval_max_len, cfg.eval_starts,
                                               Rng::combine(args.seed, 3), cfg.model.m));
  }
  run.finish();
  return 0;
}

int cmd_eval_uncertainty(const CommonArgs& args, const std::string& agent_ckpt,
                         const std::string& model_ckpt) {
  ResolvedConfig cfg = build_config(args, "offline");
  if (cfg.dataset.empty())
    throw ConfigError("eval-uncertainty: required option 'dataset' is missing (--dataset)");
  if (agent_ckpt.empty())
    throw ConfigError("eval-uncertainty: required option 'agent-ckpt' is missing (--agent-ckpt)");
  auto env = make_env(cfg.env_name);
  Dataset ds = load_dataset_checked(cfg.dataset, *env);
  SacAgent agent = SacAgent::load(agent_ckpt);
  RunDir run(args.out_dir, "eval-uncertainty", args.seed, cfg.to_json("offline"));

  std::unique_ptr<AdmModel> model;
  if (!model_ckpt.empty()) {
    model = std::make_unique<AdmModel>(AdmModel::load(model_ckpt));
  } else {
    model = std::make_unique<AdmModel>(cfg.model, env->spec().state_dim, env->spec().action_dim,
                                       Rng::combine(args.seed, 1));
    model->train(ds.buffer, Rng::combine(args.seed, 2));
    model->save(args.out_dir + "/model");
    run.path("model.admp");
    run.path("model.json");
  }

  auto scatter = uncertainty_scatter(*model, ds.buffer, *env, agent, cfg.scatter_points,
                                     cfg.scatter_horizon, Rng::combine(args.seed, 3));
  write_scatter_csv(run.path("scatter.csv"), scatter);
  nlohmann::ordered_json summary;
  summary["pearson_r"] = scatter.pearson_r;
  summary["degenerate"] = scatter.degenerate;
  summary["mean_u_random"] = scatter.mean_u_random;
  summary["mean_u_learned"] = scatter.mean_u_learned;
  summary["mean_u_behavior"] = scatter.mean_u_behavior;
  {
    std::ofstream out(run.path("scatter_summary.json"), std::ios::trunc);
    out << summary.dump(2) << "\n";
  }
  run.extra("scatter_summary", summary);
  run.finish();
  return 0;
}

int cmd_m_sweep(const CommonArgs& args, const std::string& m_list) {
  ResolvedConfig cfg = build_config(args, "offline");
  if (cfg.dataset.empty())
    throw ConfigError("m-sweep: required option 'dataset' is missing (--dataset)");
  auto env = make_env(cfg.env_name);
  Dataset ds = load_dataset_checked(cfg.dataset, *env);
  RunDir run(args.out_dir, "m-sweep", args.seed, cfg.to_json("offline"));

  const std::string values = m_list.empty() ? cfg.sweep_m_values : m_list;
  std::vector<int64_t> ms;
  std::stringstream ss(values);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) {
      try {
        ms.push_back(std::stoll(item));
      } catch (const std::exception&) {
        throw ConfigError("m-sweep: bad m value '" + item + "' in eval.sweep_m_values");
      }
    }
  std::vector<uint64_t> seeds;
  for (int64_t i = 0; i < cfg.sweep_seeds; ++i)
    seeds.push_back(Rng::combine(args.seed, streams::kSweep + static_cast<uint64_t>(i)));

  auto rows = m_sweep(*env, ds.buffer, cfg.model, cfg.sac, cfg.offline, ms, seeds);
  write_sweep_csv(run.path("sweep.csv"), rows);
  run.finish();
  return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{"any-step dynamics model policy optimization"};
  app.require_subcommand(1);

  CommonArgs a_on, a_off, a_gen, a_em, a_eu, a_ms;
  std::string policy_spec = "random";
  int64_t episodes = 200;
  std::string baseline = "bootstrap-rnn";
  std::string model_ckpt, agent_ckpt, m_list;

  auto* on = app.add_subcommand("train-online", "run the online training loop");
  add_common(on, a_on, false);

  auto* off = app.add_subcommand("train-offline", "run the offline training loop on a dataset");
  add_common(off, a_off, true);

  auto* gen = app.add_subcommand("gen-dataset", "roll a behavior policy and write a dataset");
  gen->add_option("--seed", a_gen.seed, "global seed");
  gen->add_option("--out", a_gen.out_dir, "run directory")->required();
  gen->add_option("--env", a_gen.env_name, "environment name");
  gen->add_option("--policy", policy_spec, "random | sac:PREFIX:STD | mix:PREFIX:STD:P");
  gen->add_option("--episodes", episodes, "episode count");

  auto* em = app.add_subcommand("eval-model", "open-loop compounding-error curves");
  add_common(em, a_em, true);
  em->add_option("--baseline", baseline, "bootstrap-rnn | ensemble | both | none");
  em->add_option("--model-ckpt", model_ckpt, "pretrained model checkpoint prefix");

  auto* eu = app.add_subcommand("eval-uncertainty", "uncertainty-vs-error scatter");
  add_common(eu, a_eu, true);
  eu->add_option("--agent-ckpt", agent_ckpt, "policy checkpoint prefix (required)");
  eu->add_option("--model-ckpt", model_ckpt, "pretrained model checkpoint prefix");

  auto* ms = app.add_subcommand("m-sweep", "offline runs across maximum backtracking lengths");
  add_common(ms, a_ms, true);
  ms->add_option("--m-list", m_list, "comma-separated m values (default from config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::puts(app.help().c_str());
      return 0;
    }
    std::fprintf(stderr, "%s\n%s", e.what(), app.help().c_str());
    return 2;
  }

  try {
    if (on->parsed()) return cmd_train_online(a_on);
    if (off->parsed()) return cmd_train_offline(a_off);
    if (gen->parsed()) return cmd_gen_dataset(a_gen, policy_spec, episodes);
    if (em->parsed()) return cmd_eval_model(a_em, baseline, model_ckpt);
    if (eu->parsed()) return cmd_eval_uncertainty(a_eu, agent_ckpt, model_ckpt);
    if (ms->parsed()) return cmd_m_sweep(a_ms, m_list);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace admpo
