#include "cwm/harness/commands.hpp"

#include <fstream>
#include <mutex>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cwm/core/error.hpp"
#include "cwm/harness/training.hpp"
#include "json.hpp"

namespace cwm::harness {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw_runtime("cannot write " + path.string());
}

void start_run(const std::string& command, const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  write_text(fs::path(cfg.out) / "manifest.txt", "# command = " + command + "\n" + cfg.manifest());
}

std::string finish(const RunConfig& cfg, const json& report) {
  const std::string text = report.dump(2) + "\n";
  write_text(fs::path(cfg.out) / "report.json", text);
  return text;
}

Checkpoint require_checkpoint(const RunConfig& cfg, const std::string& command) {
  if (cfg.checkpoint.empty()) throw_config(command + " needs --checkpoint");
  return read_checkpoint(cfg.checkpoint);
}

std::string cmd_pretrain(const RunConfig& cfg) {
  start_run("pretrain", cfg);
  MetricsLog metrics(fs::path(cfg.out) / "metrics.jsonl");
  Pretrainer p(cfg, load_video_splits(cfg), &metrics);
  if (!cfg.checkpoint.empty()) p.resume(read_checkpoint(cfg.checkpoint));
  const std::int64_t start = p.iteration();
  const fs::path ck = fs::path(cfg.out) / "checkpoint.bin";
  p.run(cfg.pretrain.iterations, ck);
  if (p.iteration() == start) write_checkpoint(p.checkpoint(), ck);
  json r;
  r["command"] = "pretrain";
  r["iterations"] = p.iteration();
  r["validation_nll"] = metrics.records().empty() ? p.validation_nll() : metrics.last("pretrain/validation_nll");
  r["checkpoint"] = ck.string();
  return finish(cfg, r);
}

std::string cmd_finetune(const RunConfig& cfg) {
  start_run("finetune", cfg);
  MetricsLog metrics(fs::path(cfg.out) / "metrics.jsonl");
  Finetuner f(cfg, &metrics);
  if (!cfg.checkpoint.empty()) f.load(read_checkpoint(cfg.checkpoint), cfg.load_theta_only);
  f.run();
  const fs::path ck = fs::path(cfg.out) / "checkpoint.bin";
  write_checkpoint(f.checkpoint(), ck);
  EvalReport rep = f.evaluate(cfg.eval.episodes, splitmix64(cfg.seed ^ 0x66696e616c));
  json r;
  r["command"] = "finetune";
  r["env_steps"] = f.env_steps();
  r["updates"] = f.updates();
  r["pretrained"] = cfg.checkpoint.empty() ? "none" : cfg.checkpoint;
  r["eval"] = json::parse(rep.to_json());
  r["checkpoint"] = ck.string();
  return finish(cfg, r);
}

std::string cmd_eval(const RunConfig& base) {
  const Checkpoint ck = require_checkpoint(base, "eval");
  const RunConfig cfg = with_architecture_of(base, ck);
  start_run("eval", cfg);
  Finetuner f(cfg, nullptr);
  f.agent().load_groups(ck, false);
  EvalReport rep = f.evaluate(cfg.eval.episodes, splitmix64(cfg.seed ^ 0x6576616c));
  write_text(fs::path(cfg.out) / "eval_report.json", rep.to_json());
  json r = json::parse(rep.to_json());
  r["command"] = "eval";
  return finish(cfg, r);
}

std::string cmd_probe(const RunConfig& base) {
  const Checkpoint ck = require_checkpoint(base, "probe");
  const RunConfig cfg = with_architecture_of(base, ck);
  start_run("probe", cfg);
  const data::VideoDataset videos = probe_videos(cfg);
  Agent agent(cfg.model, cfg.behavior, cfg.seed);
  agent.load_groups(ck, true);
  const ProbeResult res = run_probe(agent.world_model(), cfg, videos);
  json r;
  r["command"] = "probe";
  r["accuracy"] = res.accuracy;
  r["train"] = res.train;
  r["test"] = res.test;
  if (!cfg.probe.baseline_checkpoint.empty()) {
    const Checkpoint bk = read_checkpoint(cfg.probe.baseline_checkpoint);
    const RunConfig bcfg = with_architecture_of(base, bk);
    Agent baseline(bcfg.model, bcfg.behavior, bcfg.seed);
    baseline.load_groups(bk, true);
    r["baseline_accuracy"] = run_probe(baseline.world_model(), bcfg, videos).accuracy;
  }
  return finish(cfg, r);
}

std::string shape_text(const Shape& s) {
  std::string out;
  for (size_t i = 1; i < s.size(); ++i) out += (i > 1 ? "x" : "") + std::to_string(s[i]);
  return out;
}

std::string cmd_inspect(const RunConfig& base) {
  json r;
  RunConfig cfg = base;
  if (!cfg.checkpoint.empty()) {
    const Checkpoint ck = read_checkpoint(cfg.checkpoint);
    cfg = with_architecture_of(base, ck);
    r["checkpoint"] = {{"path", cfg.checkpoint}, {"version", ck.version}, {"kind", ck.kind}};
    for (const auto& [k, v] : ck.counters) r["checkpoint"]["counters"][k] = v;
  }
  validate(cfg);
  r["command"] = "inspect";
  r["preset"] = cfg.get("model.preset");
  r["conditioning"] = cfg.get("model.conditioning");
  Agent agent(cfg.model, cfg.behavior, cfg.seed);
  const ParamCounts c = count_parameters(agent);
  r["parameters"] = {{"theta", c.theta}, {"phi", c.phi},   {"varphi", c.varphi},
                     {"psi", c.psi},     {"xi", c.xi},     {"total", c.total()}};
  {
    NoGradGuard ng;
    const index_t s = cfg.model.vision.image_size;
    const auto enc = agent.world_model().encoder.forward(Var(Tensor(Shape{1, 3, s, s})), false);
    r["encoder_stages"] = json::array();
    for (const auto& st : enc.stage_post) r["encoder_stages"].push_back(shape_text(st.shape()));
    r["embed_dim"] = enc.embed.dim(1);
  }
  return r.dump(2) + "\n";
}

}  // namespace

RunConfig with_architecture_of(const RunConfig& cfg, const Checkpoint& ck) {
  RunConfig out = cfg;
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(ck.config);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
    const bool arch = key.rfind("model.", 0) == 0 || key == "behavior.hidden" || key == "behavior.layers" ||
                      key == "behavior.min_std";
    if (arch) entries.emplace_back(key, value);
  }
  apply_entries(out, entries);
  return out;
}

std::string run_command(const std::string& command, const RunConfig& cfg) {
  static std::once_flag logger_once;
  std::call_once(logger_once, [] {
    auto logger = spdlog::get("cwm");
    if (!logger) logger = spdlog::stderr_color_mt("cwm");
    spdlog::set_default_logger(logger);
  });
  if (command == "inspect") return cmd_inspect(cfg);
  validate(cfg);
  if (command == "pretrain") return cmd_pretrain(cfg);
  if (command == "finetune") return cmd_finetune(cfg);
  if (command == "eval") return cmd_eval(cfg);
  if (command == "probe") return cmd_probe(cfg);
  throw_config("unknown command '" + command + "'");
}

}  // namespace cwm::harness
