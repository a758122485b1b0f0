#include "cwm/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "cwm/core/error.hpp"

namespace cwm::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
std::string format_value(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
  }
}

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  auto fail = [&]() -> T { throw_config("bad value '" + text + "' for " + key); };
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    return fail();
  } else if constexpr (std::is_same_v<T, std::string>) {
    return text;
  } else {
    T v{};
    auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (r.ec != std::errc() || r.ptr != text.data() + text.size()) return fail();
    return v;
  }
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <class Access>
Field field(std::string key, Access access) {
  using T = std::remove_cvref_t<decltype(access(std::declval<RunConfig&>()))>;
  return Field{key, [access](const RunConfig& c) { return format_value<T>(access(const_cast<RunConfig&>(c))); },
               [access, key](RunConfig& c, const std::string& v) { access(c) = parse_value<T>(key, v); }};
}

#define CWM_FIELD(key, member) field(key, [](RunConfig& c) -> auto& { return c.member; })

const char* conditioning_name(vision::Conditioning m) {
  switch (m) {
    case vision::Conditioning::kCrossAttention:
      return "cross_attention";
    case vision::Conditioning::kConcat:
      return "concat";
    case vision::Conditioning::kNone:
      return "none";
  }
  return "?";
}

void set_preset(RunConfig& c, const std::string& v) {
  if (v == "desk") {
    c.preset = Preset::kDesk;
    c.model = model::WorldModelConfig::desk();
  } else if (v == "paper") {
    c.preset = Preset::kPaper;
    c.model = model::WorldModelConfig::paper();
  } else {
    throw_config("model.preset must be desk or paper, got '" + v + "'");
  }
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f{
        CWM_FIELD("seed", seed),
        CWM_FIELD("out", out),
        CWM_FIELD("checkpoint", checkpoint),
        CWM_FIELD("checkpoint.theta_only", load_theta_only),

        Field{"model.preset", [](const RunConfig& c) { return std::string(c.preset == Preset::kDesk ? "desk" : "paper"); },
              set_preset},
        Field{"model.conditioning",
              [](const RunConfig& c) { return std::string(conditioning_name(c.model.vision.conditioning)); },
              [](RunConfig& c, const std::string& v) {
                if (v == "cross_attention") c.model.vision.conditioning = vision::Conditioning::kCrossAttention;
                else if (v == "concat") c.model.vision.conditioning = vision::Conditioning::kConcat;
                else if (v == "none") c.model.vision.conditioning = vision::Conditioning::kNone;
                else throw_config("model.conditioning must be cross_attention, concat or none");
              }},
        CWM_FIELD("model.det_size", model.model.det_size),
        CWM_FIELD("model.hidden", model.model.hidden),
        CWM_FIELD("model.stoch_vars", model.model.stoch_vars),
        CWM_FIELD("model.stoch_classes", model.model.stoch_classes),
        CWM_FIELD("model.dense_layers", model.model.dense_layers),
        CWM_FIELD("model.action_dim", model.model.action_dim),
        CWM_FIELD("model.image_size", model.vision.image_size),
        CWM_FIELD("model.base_channels", model.vision.base_channels),
        CWM_FIELD("model.heads", model.vision.heads),
        CWM_FIELD("model.head_hidden", model.head_hidden),
        CWM_FIELD("model.head_layers", model.head_layers),

        CWM_FIELD("loss.pretrain.beta_z", pretrain_weights.beta_z),
        CWM_FIELD("loss.finetune.beta_z", finetune_weights.beta_z),
        CWM_FIELD("loss.finetune.beta_s", finetune_weights.beta_s),
        CWM_FIELD("loss.finetune.beta_r", finetune_weights.beta_r),
        CWM_FIELD("loss.finetune.lambda_int", finetune_weights.lambda_int),
        Field{"loss.kl_balance", [](const RunConfig& c) { return format_value(c.finetune_weights.kl_balance); },
              [](RunConfig& c, const std::string& v) {
                c.pretrain_weights.kl_balance = c.finetune_weights.kl_balance = parse_value<double>("loss.kl_balance", v);
              }},
        Field{"loss.free_nats", [](const RunConfig& c) { return format_value(c.finetune_weights.free_nats); },
              [](RunConfig& c, const std::string& v) {
                c.pretrain_weights.free_nats = c.finetune_weights.free_nats = parse_value<double>("loss.free_nats", v);
              }},

        CWM_FIELD("behavior.horizon", behavior.horizon),
        CWM_FIELD("behavior.gamma", behavior.gamma),
        CWM_FIELD("behavior.lambda", behavior.lambda_ret),
        CWM_FIELD("behavior.entropy_eta", behavior.entropy_eta),
        CWM_FIELD("behavior.actor_lr", behavior.actor_lr),
        CWM_FIELD("behavior.critic_lr", behavior.critic_lr),
        CWM_FIELD("behavior.target_update_interval", behavior.target_update_interval),
        CWM_FIELD("behavior.hidden", behavior.hidden),
        CWM_FIELD("behavior.layers", behavior.layers),
        CWM_FIELD("behavior.min_std", behavior.min_std),

        CWM_FIELD("env.episode_length", env.episode_length),
        CWM_FIELD("env.max_speed", env.max_speed),
        CWM_FIELD("env.d_max", env.d_max),
        CWM_FIELD("env.success_radius", env.success_radius),

        CWM_FIELD("pretrain.segment_length", pretrain.segment_length),
        CWM_FIELD("pretrain.batch", pretrain.batch),
        CWM_FIELD("pretrain.iterations", pretrain.iterations),
        CWM_FIELD("pretrain.lr", pretrain.lr),
        CWM_FIELD("pretrain.log_every", pretrain.log_every),
        CWM_FIELD("pretrain.validate_every", pretrain.validate_every),
        CWM_FIELD("pretrain.checkpoint_every", pretrain.checkpoint_every),
        CWM_FIELD("pretrain.cutout", pretrain.cutout),
        CWM_FIELD("pretrain.cutout_min", pretrain.cutout_min),
        CWM_FIELD("pretrain.cutout_max", pretrain.cutout_max),

        CWM_FIELD("finetune.segment_length", finetune.segment_length),
        CWM_FIELD("finetune.batch", finetune.batch),
        CWM_FIELD("finetune.env_steps", finetune.env_steps),
        CWM_FIELD("finetune.prefill", finetune.prefill),
        CWM_FIELD("finetune.train_every", finetune.train_every),
        CWM_FIELD("finetune.lr", finetune.lr),
        CWM_FIELD("finetune.log_every", finetune.log_every),
        CWM_FIELD("finetune.eval_every", finetune.eval_every),
        CWM_FIELD("finetune.dual_reward", finetune.dual_reward),
        CWM_FIELD("finetune.replay_capacity", finetune.replay_capacity),

        CWM_FIELD("data.source", data.source),
        CWM_FIELD("data.videos", data.videos),
        CWM_FIELD("data.frames", data.frames),
        CWM_FIELD("data.validation_videos", data.validation_videos),
        CWM_FIELD("data.seed", data.seed),
        CWM_FIELD("data.context_pool", data.context_pool),

        CWM_FIELD("intrinsic.k", intrinsic.k),
        CWM_FIELD("intrinsic.proj_dim", intrinsic.proj_dim),
        CWM_FIELD("intrinsic.capacity", intrinsic.capacity),

        CWM_FIELD("eval.episodes", eval.episodes),
        CWM_FIELD("eval.bootstrap", eval.bootstrap),

        CWM_FIELD("probe.videos", probe.videos),
        CWM_FIELD("probe.frames", probe.frames),
        CWM_FIELD("probe.train_fraction", probe.train_fraction),
        CWM_FIELD("probe.baseline_checkpoint", probe.baseline_checkpoint),
    };
    std::sort(f.begin(), f.end(), [](const Field& a, const Field& b) { return a.key < b.key; });
    return f;
  }();
  return table;
}

#undef CWM_FIELD

const Field& find_field(const std::string& key) {
  const auto& f = fields();
  auto it = std::lower_bound(f.begin(), f.end(), key, [](const Field& a, const std::string& k) { return a.key < k; });
  if (it == f.end() || it->key != key) throw_config("unknown configuration key '" + key + "'");
  return *it;
}

void parse_into(const std::filesystem::path& path, std::vector<std::pair<std::string, std::string>>& out,
                std::set<std::filesystem::path>& open) {
  std::error_code ec;
  const auto canonical = std::filesystem::weakly_canonical(path, ec);
  if (open.count(canonical)) throw_config("include cycle at " + path.string());
  std::ifstream in(path);
  if (!in) throw_config("cannot read config file " + path.string());
  open.insert(canonical);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw_config(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw_config(path.string() + ":" + std::to_string(lineno) + ": empty key");
    if (key == "include") {
      std::filesystem::path inc(value);
      if (inc.is_relative()) inc = path.parent_path() / inc;
      parse_into(inc, out, open);
    } else {
      out.emplace_back(key, value);
    }
  }
  open.erase(canonical);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  find_field(key).set(*this, value);
  model.model.embed_dim = model.vision.embed_dim();
  env.side = model.vision.image_size;
}

std::string RunConfig::get(const std::string& key) const { return find_field(key).get(*this); }

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> k;
  for (const auto& f : fields()) k.push_back(f.key);
  return k;
}

std::string RunConfig::manifest() const {
  std::ostringstream os;
  for (const auto& f : fields()) os << f.key << " = " << f.get(*this) << "\n";
  return os.str();
}

std::vector<std::pair<std::string, std::string>> parse_config_file(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::filesystem::path> open;
  parse_into(path, out, open);
  return out;
}

void apply_entries(RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& entries) {
  for (const auto& [k, v] : entries)
    if (k == "model.preset") cfg.set(k, v);
  for (const auto& [k, v] : entries)
    if (k != "model.preset") cfg.set(k, v);
}

void validate(const RunConfig& cfg) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw_config(msg);
  };
  model::validate(cfg.model);
  objectives::validate(cfg.pretrain_weights);
  objectives::validate(cfg.finetune_weights);
  behavior::validate(cfg.behavior);
  data::validate(cfg.env);
  need(!cfg.out.empty(), "out must not be empty");

  const auto& p = cfg.pretrain;
  need(p.segment_length >= 2, "pretrain.segment_length must be >= 2");
  need(p.batch >= 1, "pretrain.batch must be >= 1");
  need(p.iterations >= 0, "pretrain.iterations must be >= 0");
  need(p.lr > 0, "pretrain.lr must be > 0");
  need(p.log_every >= 1, "pretrain.log_every must be >= 1");
  need(p.validate_every >= 1, "pretrain.validate_every must be >= 1");
  need(p.checkpoint_every >= 1, "pretrain.checkpoint_every must be >= 1");
  vision::CutoutParams cp{p.cutout, p.cutout_min, p.cutout_max, 0.0};
  vision::validate(cp);

  const auto& f = cfg.finetune;
  need(f.segment_length >= 2, "finetune.segment_length must be >= 2");
  need(f.segment_length <= cfg.env.episode_length + 1, "finetune.segment_length exceeds an episode");
  need(f.batch >= 1, "finetune.batch must be >= 1");
  need(f.env_steps >= 0, "finetune.env_steps must be >= 0");
  need(f.prefill >= 0, "finetune.prefill must be >= 0");
  need(f.train_every >= 1, "finetune.train_every must be >= 1");
  need(f.lr > 0, "finetune.lr must be > 0");
  need(f.log_every >= 1, "finetune.log_every must be >= 1");
  need(f.eval_every >= 0, "finetune.eval_every must be >= 0");
  need(f.replay_capacity >= cfg.env.episode_length, "finetune.replay_capacity must hold one episode");

  const auto& d = cfg.data;
  need(!d.source.empty(), "data.source must not be empty");
  need(d.videos >= 1, "data.videos must be >= 1");
  need(d.frames >= p.segment_length, "data.frames must be >= pretrain.segment_length");
  need(d.validation_videos >= 1, "data.validation_videos must be >= 1");

  need(cfg.intrinsic.k >= 1, "intrinsic.k must be >= 1");
  need(cfg.intrinsic.proj_dim >= 1, "intrinsic.proj_dim must be >= 1");
  need(cfg.intrinsic.capacity >= 1, "intrinsic.capacity must be >= 1");
  need(cfg.eval.episodes >= 1, "eval.episodes must be >= 1");
  need(cfg.eval.bootstrap >= 1, "eval.bootstrap must be >= 1");
  need(cfg.probe.videos >= 4, "probe.videos must be >= 4");
  need(cfg.probe.frames >= 1, "probe.frames must be >= 1");
  need(cfg.probe.train_fraction > 0 && cfg.probe.train_fraction < 1, "probe.train_fraction must lie in (0, 1)");
}

}  // namespace cwm::harness
