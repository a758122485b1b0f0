#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cwm/cwm.h"

namespace {

struct Options {
  std::string config;
  std::optional<unsigned long long> seed;
  std::string checkpoint;
  bool theta_only = false;
  bool vanilla = false;
  bool concat = false;
  bool no_dual_reward = false;
  std::string dataset;
  std::string out;
  std::vector<std::string> sets;
};

int fail(cwm_status s) {
  std::fprintf(stderr, "error: %s\n", cwm_last_error());
  return int(s);
}

int run(const std::string& command, const Options& o) {
  cwm_config* cfg = nullptr;
  if (cwm_status s = cwm_config_create(&cfg)) return fail(s);
  auto set = [&](const char* key, const std::string& value) { return cwm_config_set(cfg, key, value.c_str()); };

  std::vector<std::pair<std::string, std::string>> sets;
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      cwm_config_destroy(cfg);
      return CWM_ERROR_CONFIG;
    }
    sets.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }

  // A preset replaces the whole model, so it goes first.
  cwm_status s = CWM_OK;
  for (const auto& [k, v] : sets)
    if (!s && k == "model.preset") s = set(k.c_str(), v);
  if (!s && !o.config.empty()) s = cwm_config_load(cfg, o.config.c_str());
  if (!s && o.seed) s = set("seed", std::to_string(*o.seed));
  if (!s && !o.checkpoint.empty()) s = set("checkpoint", o.checkpoint);
  if (!s && o.theta_only) s = set("checkpoint.theta_only", "true");
  if (!s && o.vanilla && o.concat) {
    std::fprintf(stderr, "error: --vanilla-wm and --concat-conditioning are exclusive\n");
    cwm_config_destroy(cfg);
    return CWM_ERROR_CONFIG;
  }
  if (!s && o.vanilla) s = set("model.conditioning", "none");
  if (!s && o.concat) s = set("model.conditioning", "concat");
  if (!s && o.no_dual_reward) s = set("finetune.dual_reward", "false");
  if (!s && !o.dataset.empty()) s = set("data.source", o.dataset);
  if (!s && !o.out.empty()) s = set("out", o.out);
  for (const auto& [k, v] : sets)
    if (!s && k != "model.preset") s = set(k.c_str(), v);
  if (s) {
    const int code = fail(s);
    cwm_config_destroy(cfg);
    return code;
  }

  cwm_report* report = nullptr;
  s = cwm_run(cfg, command.c_str(), &report);
  cwm_config_destroy(cfg);
  if (s) return fail(s);
  std::printf("%s\n", cwm_report_text(report));
  cwm_report_destroy(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contextualized world models: pre-training, fine-tuning and evaluation"};
  app.set_version_flag("--version", std::string(cwm_version()));
  Options o;
  app.add_option("--config", o.config, "Configuration file (key = value)");
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--checkpoint", o.checkpoint, "Checkpoint to load");
  app.add_flag("--load-theta-only", o.theta_only, "Load only the pre-trained world-model parameters");
  app.add_flag("--vanilla-wm", o.vanilla, "Disable the context pathway");
  app.add_flag("--concat-conditioning", o.concat, "Condition the decoder by concatenation");
  app.add_flag("--no-dual-reward", o.no_dual_reward, "Train a single reward head");
  app.add_option("--dataset", o.dataset, "Frame-folder roots (comma separated) or 'synthetic'");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--set", o.sets, "Override any configuration key (key=value)")->take_all();

  std::string command;
  for (const char* name : {"pretrain", "finetune", "eval", "probe", "inspect"}) {
    app.add_subcommand(name)->fallthrough()->callback([&command, name] { command = name; });
  }
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return CWM_ERROR_CONFIG;
  }
  return run(command, o);
}
