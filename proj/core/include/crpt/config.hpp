#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crpt/env.hpp"
#include "crpt/protolearn.hpp"
#include "crpt/rlagent.hpp"

namespace crpt::config {

// Full run configuration. Flat `key = value` text format, one key per line,
// '#' comments. Two presets: "desk" (default, small everything) and "paper"
// (full-scale settings).
struct RunConfig {
  std::string preset = "desk";
  std::uint64_t root_seed = 1;

  // environments
  std::vector<std::string> domains = {"pendulum", "cartpole"};
  std::vector<std::string> train_domains;  // empty = same as domains
  std::string finetune_domain = "pointmass";
  std::uint32_t render_size = 32;
  bool grayscale = true;
  std::size_t frame_stack = 3;
  std::uint64_t episode_length = 200;
  std::uint32_t action_repeat = 2;

  // decoupled random collection
  std::uint64_t buffer_capacity = 10000;
  std::uint64_t collect_steps = 10000;

  // self-supervised pre-training
  std::size_t prototypes = 64;
  std::size_t latent_dim = 32;
  std::size_t batch = 64;
  std::size_t conv_channels = 8;
  std::size_t predictor_hidden = 64;
  double tau = 0.1;
  double intrinsic_weight = 1.5;
  double intrinsic_coef = 5e-3;
  double ema_eta = 0.05;
  double ssl_lr = 3e-4;
  std::uint64_t pretrain_steps = 2000;
  std::uint64_t finetune_steps = 500;
  std::size_t shift_pad = 4;
  bool renorm_targets = true;
  double sinkhorn_epsilon = 0.05;
  int sinkhorn_iterations = 3;
  std::uint64_t metrics_every = 25;

  // downstream reinforcement learning
  double discount = 0.99;
  std::size_t replay_capacity = 20000;
  std::size_t rl_batch = 64;
  double init_temperature = 0.1;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  std::uint32_t actor_update_freq = 2;
  std::uint32_t critic_target_update_freq = 2;
  double critic_tau = 0.01;
  std::uint64_t rl_steps = 30000;
  double beta = 0.2;
  std::size_t knn_k = 3;
  std::size_t q_capacity = 2048;
  std::size_t actor_feature_dim = 32;
  std::size_t rl_hidden = 128;
  std::uint64_t seed_steps = 1000;
  std::uint64_t eval_every = 5000;
  std::size_t eval_episodes = 10;

  // pipeline
  std::vector<std::string> phases = {"collect", "pretrain", "train", "metrics"};
  std::size_t pca_components = 4;
  std::size_t pca_frames_per_domain = 125;

  bool operator==(const RunConfig&) const = default;

  std::vector<std::string> effective_train_domains() const {
    return train_domains.empty() ? domains : train_domains;
  }

  envs::EnvOptions env_options() const;
  proto::Arch arch() const;
  proto::SslConfig ssl() const;
  rl::RlConfig rl() const;
};

struct ParseIssue {
  std::string field;
  std::string message;
};

struct ParseResult {
  RunConfig config;
  std::vector<ParseIssue> issues;
  bool ok() const { return issues.empty(); }
};

// Preset defaults; ConfigInvalid for unknown preset names.
RunConfig preset_config(const std::string& name);

// Parses and validates. Unknown keys, malformed values and constraint
// violations are all collected; nothing is fail-fast.
ParseResult parse_config(const std::string& text);

// Constraint checks only (w > 1, tau > 0, gamma in (0,1), ...).
std::vector<ParseIssue> validate(const RunConfig& cfg);

// Round-trips: parse_config(serialize_config(c)).config == c.
std::string serialize_config(const RunConfig& cfg);

}  // namespace crpt::config
