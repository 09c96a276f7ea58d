#include "crpt/config.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <sstream>

#include "crpt/error.hpp"

namespace crpt::config {

envs::EnvOptions RunConfig::env_options() const {
  envs::EnvOptions o;
  o.render_size = render_size;
  o.channels = grayscale ? 1 : 3;
  o.frame_stack = frame_stack;
  o.episode_length = episode_length;
  o.action_repeat = action_repeat;
  return o;
}

proto::Arch RunConfig::arch() const {
  proto::Arch a;
  a.render = render_size;
  a.in_channels = frame_stack * (grayscale ? 1 : 3);
  a.conv_channels = conv_channels;
  a.latent_dim = latent_dim;
  a.predictor_hidden = predictor_hidden;
  a.prototypes = prototypes;
  return a;
}

proto::SslConfig RunConfig::ssl() const {
  proto::SslConfig s;
  s.tau = tau;
  s.intrinsic_weight = intrinsic_weight;
  s.intrinsic_coef = intrinsic_coef;
  s.ema_eta = ema_eta;
  s.batch = batch;
  s.pretrain_steps = pretrain_steps;
  s.finetune_steps = finetune_steps;
  s.lr = ssl_lr;
  s.shift_pad = shift_pad;
  s.renorm_targets = renorm_targets;
  s.sinkhorn_epsilon = sinkhorn_epsilon;
  s.sinkhorn_iterations = sinkhorn_iterations;
  s.stack_k = frame_stack;
  s.metrics_every = metrics_every;
  return s;
}

rl::RlConfig RunConfig::rl() const {
  rl::RlConfig r;
  r.discount = discount;
  r.replay_capacity = replay_capacity;
  r.batch = rl_batch;
  r.init_temperature = init_temperature;
  r.actor_lr = actor_lr;
  r.critic_lr = critic_lr;
  r.alpha_lr = actor_lr;
  r.actor_update_freq = actor_update_freq;
  r.critic_target_update_freq = critic_target_update_freq;
  r.critic_tau = critic_tau;
  r.steps = rl_steps;
  r.beta = beta;
  r.knn_k = knn_k;
  r.q_capacity = q_capacity;
  r.feature_dim = actor_feature_dim;
  r.hidden = rl_hidden;
  r.seed_steps = seed_steps;
  r.eval_every = eval_every;
  r.eval_episodes = eval_episodes;
  r.shift_pad = shift_pad;
  return r;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Field {
  std::string name;
  std::function<bool(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
bool parse_unsigned(const std::string& v, T& out) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) return false;
  try {
    out = static_cast<T>(std::stoull(v));
  } catch (...) {
    return false;
  }
  return true;
}

bool parse_double(const std::string& v, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(v, &used);
    return used == v.size();
  } catch (...) {
    return false;
  }
}

bool parse_bool(const std::string& v, bool& out) {
  if (v == "true") out = true;
  else if (v == "false") out = false;
  else return false;
  return true;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join_list(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

#define UNSIGNED_FIELD(key)                                                       \
  Field{#key, [](RunConfig& c, const std::string& v) { return parse_unsigned(v, c.key); }, \
        [](const RunConfig& c) { return std::to_string(c.key); }}
#define DOUBLE_FIELD(key)                                                        \
  Field{#key, [](RunConfig& c, const std::string& v) { return parse_double(v, c.key); }, \
        [](const RunConfig& c) { return fmt_double(c.key); }}
#define BOOL_FIELD(key)                                                          \
  Field{#key, [](RunConfig& c, const std::string& v) { return parse_bool(v, c.key); }, \
        [](const RunConfig& c) { return c.key ? "true" : "false"; }}
#define STRING_FIELD(key)                                                        \
  Field{#key, [](RunConfig& c, const std::string& v) { c.key = v; return true; }, \
        [](const RunConfig& c) { return c.key; }}
#define LIST_FIELD(key)                                                          \
  Field{#key, [](RunConfig& c, const std::string& v) { c.key = split_list(v); return true; }, \
        [](const RunConfig& c) { return join_list(c.key); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      STRING_FIELD(preset),
      UNSIGNED_FIELD(root_seed),
      LIST_FIELD(domains),
      LIST_FIELD(train_domains),
      STRING_FIELD(finetune_domain),
      UNSIGNED_FIELD(render_size),
      BOOL_FIELD(grayscale),
      UNSIGNED_FIELD(frame_stack),
      UNSIGNED_FIELD(episode_length),
      UNSIGNED_FIELD(action_repeat),
      UNSIGNED_FIELD(buffer_capacity),
      UNSIGNED_FIELD(collect_steps),
      UNSIGNED_FIELD(prototypes),
      UNSIGNED_FIELD(latent_dim),
      UNSIGNED_FIELD(batch),
      UNSIGNED_FIELD(conv_channels),
      UNSIGNED_FIELD(predictor_hidden),
      DOUBLE_FIELD(tau),
      DOUBLE_FIELD(intrinsic_weight),
      DOUBLE_FIELD(intrinsic_coef),
      DOUBLE_FIELD(ema_eta),
      DOUBLE_FIELD(ssl_lr),
      UNSIGNED_FIELD(pretrain_steps),
      UNSIGNED_FIELD(finetune_steps),
      UNSIGNED_FIELD(shift_pad),
      BOOL_FIELD(renorm_targets),
      DOUBLE_FIELD(sinkhorn_epsilon),
      Field{"sinkhorn_iterations",
            [](RunConfig& c, const std::string& v) {
              std::uint64_t tmp;
              if (!parse_unsigned(v, tmp)) return false;
              c.sinkhorn_iterations = static_cast<int>(tmp);
              return true;
            },
            [](const RunConfig& c) { return std::to_string(c.sinkhorn_iterations); }},
      UNSIGNED_FIELD(metrics_every),
      DOUBLE_FIELD(discount),
      UNSIGNED_FIELD(replay_capacity),
      UNSIGNED_FIELD(rl_batch),
      DOUBLE_FIELD(init_temperature),
      DOUBLE_FIELD(actor_lr),
      DOUBLE_FIELD(critic_lr),
      UNSIGNED_FIELD(actor_update_freq),
      UNSIGNED_FIELD(critic_target_update_freq),
      DOUBLE_FIELD(critic_tau),
      UNSIGNED_FIELD(rl_steps),
      DOUBLE_FIELD(beta),
      UNSIGNED_FIELD(knn_k),
      UNSIGNED_FIELD(q_capacity),
      UNSIGNED_FIELD(actor_feature_dim),
      UNSIGNED_FIELD(rl_hidden),
      UNSIGNED_FIELD(seed_steps),
      UNSIGNED_FIELD(eval_every),
      UNSIGNED_FIELD(eval_episodes),
      LIST_FIELD(phases),
      UNSIGNED_FIELD(pca_components),
      UNSIGNED_FIELD(pca_frames_per_domain),
  };
  return table;
}

#undef UNSIGNED_FIELD
#undef DOUBLE_FIELD
#undef BOOL_FIELD
#undef STRING_FIELD
#undef LIST_FIELD

const Field* find_field(const std::string& name) {
  for (const Field& f : fields())
    if (f.name == name) return &f;
  return nullptr;
}

}  // namespace

RunConfig preset_config(const std::string& name) {
  if (name == "desk") return RunConfig{};
  if (name == "paper") {
    RunConfig c;
    c.preset = "paper";
    c.render_size = 84;
    c.grayscale = false;
    c.episode_length = 1000;
    c.action_repeat = 2;
    c.buffer_capacity = 100000;
    c.collect_steps = 100000;
    c.prototypes = 512;
    c.latent_dim = 128;
    c.batch = 512;
    c.conv_channels = 32;
    c.predictor_hidden = 1024;
    c.tau = 0.1;
    c.intrinsic_weight = 1.5;
    c.intrinsic_coef = 5e-3;
    c.ema_eta = 0.05;
    c.ssl_lr = 1e-4;
    c.pretrain_steps = 50000;
    c.finetune_steps = 2000;
    c.shift_pad = 4;
    c.metrics_every = 100;
    c.discount = 0.99;
    c.replay_capacity = 40000;
    c.rl_batch = 512;
    c.init_temperature = 0.1;
    c.actor_lr = 1e-4;
    c.critic_lr = 1e-4;
    c.actor_update_freq = 2;
    c.critic_target_update_freq = 2;
    c.critic_tau = 0.01;
    c.rl_steps = 500000;
    c.beta = 0.2;
    c.knn_k = 3;
    c.q_capacity = 2048;
    c.actor_feature_dim = 50;
    c.rl_hidden = 1024;
    c.seed_steps = 1000;
    c.eval_every = 10000;
    c.eval_episodes = 10;
    return c;
  }
  raise(Errc::ConfigInvalid, "unknown preset '" + name + "'");
}

std::vector<ParseIssue> validate(const RunConfig& cfg) {
  std::vector<ParseIssue> issues;
  auto bad = [&issues](const std::string& field, const std::string& msg) {
    issues.push_back({field, msg});
  };

  if (cfg.preset != "desk" && cfg.preset != "paper") bad("preset", "must be 'desk' or 'paper'");
  if (cfg.domains.empty()) bad("domains", "at least one domain is required");
  const auto known = envs::domain_names();
  auto check_domain = [&](const std::string& field, const std::string& d) {
    if (std::find(known.begin(), known.end(), d) == known.end())
      bad(field, "unknown domain '" + d + "'");
  };
  for (const auto& d : cfg.domains) check_domain("domains", d);
  for (const auto& d : cfg.train_domains) check_domain("train_domains", d);
  if (!cfg.finetune_domain.empty()) check_domain("finetune_domain", cfg.finetune_domain);

  if (cfg.render_size < 16) bad("render_size", "must be >= 16");
  if (cfg.frame_stack == 0) bad("frame_stack", "must be positive");
  if (cfg.action_repeat == 0) bad("action_repeat", "must be positive");
  if (cfg.episode_length < cfg.action_repeat) bad("episode_length", "shorter than action repeat");
  if (cfg.collect_steps > cfg.buffer_capacity) bad("collect_steps", "exceeds buffer_capacity");

  if (cfg.prototypes < 2) bad("prototypes", "need at least 2 prototypes");
  if (cfg.latent_dim == 0) bad("latent_dim", "must be positive");
  if (cfg.batch == 0) bad("batch", "must be positive");
  if (!(cfg.tau > 0.0)) bad("tau", "softmax temperature must be positive");
  if (!(cfg.intrinsic_weight > 1.0)) bad("intrinsic_weight", "intrinsic weight must exceed 1");
  if (cfg.intrinsic_coef < 0.0) bad("intrinsic_coef", "must be >= 0");
  if (!(cfg.ema_eta > 0.0 && cfg.ema_eta <= 1.0)) bad("ema_eta", "must be in (0,1]");
  if (!(cfg.ssl_lr > 0.0)) bad("ssl_lr", "must be positive");
  if (cfg.shift_pad >= cfg.render_size) bad("shift_pad", "must be smaller than render_size");
  if (!(cfg.sinkhorn_epsilon > 0.0)) bad("sinkhorn_epsilon", "must be positive");
  if (cfg.sinkhorn_iterations < 1) bad("sinkhorn_iterations", "must be >= 1");

  if (!(cfg.discount > 0.0 && cfg.discount < 1.0)) bad("discount", "must be in (0,1)");
  if (cfg.replay_capacity == 0) bad("replay_capacity", "must be positive");
  if (cfg.rl_batch == 0) bad("rl_batch", "must be positive");
  if (!(cfg.init_temperature > 0.0)) bad("init_temperature", "must be positive");
  if (!(cfg.actor_lr > 0.0)) bad("actor_lr", "must be positive");
  if (!(cfg.critic_lr > 0.0)) bad("critic_lr", "must be positive");
  if (cfg.actor_update_freq == 0) bad("actor_update_freq", "must be positive");
  if (cfg.critic_target_update_freq == 0) bad("critic_target_update_freq", "must be positive");
  if (!(cfg.critic_tau > 0.0 && cfg.critic_tau <= 1.0)) bad("critic_tau", "must be in (0,1]");
  if (cfg.beta < 0.0) bad("beta", "must be >= 0");
  if (cfg.knn_k == 0) bad("knn_k", "must be positive");
  if (cfg.q_capacity < cfg.knn_k) bad("q_capacity", "must be >= knn_k");
  if (cfg.eval_episodes == 0) bad("eval_episodes", "must be positive");

  static const std::vector<std::string> kPhases = {"collect", "pretrain", "finetune", "train",
                                                   "metrics"};
  for (const auto& p : cfg.phases)
    if (std::find(kPhases.begin(), kPhases.end(), p) == kPhases.end())
      bad("phases", "unknown phase '" + p + "'");

  if (cfg.pca_components == 0) bad("pca_components", "must be positive");
  if (cfg.pca_frames_per_domain <= cfg.pca_components)
    bad("pca_frames_per_domain", "must exceed pca_components");
  return issues;
}

namespace {
struct RawLine {
  std::string key, value;
  bool malformed = false;
};

std::vector<RawLine> tokenize(const std::string& text, std::vector<ParseIssue>& issues) {
  std::vector<RawLine> out;
  std::istringstream scan(text);
  std::string line;
  while (std::getline(scan, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back({line, "expected 'key = value'"});
      continue;
    }
    RawLine rl;
    rl.key = trim(line.substr(0, eq));
    rl.value = trim(line.substr(eq + 1));
    if (rl.key.empty()) {
      issues.push_back({line, "empty key"});
      continue;
    }
    out.push_back(std::move(rl));
  }
  return out;
}
}  // namespace

ParseResult parse_config(const std::string& text) {
  ParseResult result;
  std::vector<RawLine> lines = tokenize(text, result.issues);

  // The preset establishes the defaults; remaining keys override it.
  std::string preset = "desk";
  for (const RawLine& rl : lines)
    if (rl.key == "preset") preset = rl.value;
  if (preset != "desk" && preset != "paper") {
    result.issues.push_back({"preset", "must be 'desk' or 'paper'"});
    preset = "desk";
  }
  result.config = preset_config(preset);

  for (const RawLine& rl : lines) {
    const Field* f = find_field(rl.key);
    if (f == nullptr) {
      result.issues.push_back({rl.key, "unknown key"});
      continue;
    }
    if (!f->set(result.config, rl.value))
      result.issues.push_back({rl.key, "cannot parse value '" + rl.value + "'"});
  }

  for (ParseIssue& issue : validate(result.config)) result.issues.push_back(std::move(issue));
  return result;
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) out += f.name + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace crpt::config
