#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crpt/env.hpp"
#include "crpt/intrinsic.hpp"
#include "crpt/params.hpp"
#include "crpt/protolearn.hpp"
#include "crpt/rng.hpp"

namespace crpt::rl {

struct RlConfig {
  double discount = 0.99;
  std::size_t replay_capacity = 20000;
  std::size_t batch = 64;
  double init_temperature = 0.1;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double alpha_lr = 3e-4;
  std::uint32_t actor_update_freq = 2;
  std::uint32_t critic_target_update_freq = 2;
  double critic_tau = 0.01;
  std::uint64_t steps = 30000;  // environment steps of downstream RL
  double beta = 0.2;
  std::size_t knn_k = 3;
  std::size_t q_capacity = 2048;
  std::size_t feature_dim = 32;
  std::size_t hidden = 128;
  double log_std_min = -10.0;
  double log_std_max = 2.0;
  std::uint64_t seed_steps = 1000;  // uniform-random warmup before learning
  std::uint64_t eval_every = 5000;
  std::size_t eval_episodes = 10;
  std::size_t shift_pad = 4;

  void validate() const;
};

// Transitions already mapped into the frozen embedding space.
struct EncodedBatch {
  nd::Tensor y;                 // {B, F}
  nd::Tensor action;            // {B, A}
  std::vector<double> reward;   // augmented rewards r + beta * r_hat
  nd::Tensor y_next;            // {B, F}
  std::vector<double> done;     // bootstrap mask, 1 = absorbing
};

struct UpdateSummary {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  bool actor_updated = false;
};

// Soft actor-critic over fixed feature vectors: squashed-Gaussian actor,
// twin critics with minimum-target EMA critics, and automatic temperature
// tuned toward target entropy = -action_dim.
class SacAgent {
 public:
  SacAgent(std::size_t obs_dim, std::size_t action_dim, const RlConfig& config,
           std::uint64_t seed);

  std::vector<double> act(const std::vector<double>& y, bool stochastic);
  UpdateSummary update(const EncodedBatch& batch);

  // Bootstrapped regression targets r + gamma (1-done) (minQ' - alpha logpi');
  // exposed for tests.
  std::vector<double> critic_targets(const EncodedBatch& batch);

  double alpha() const;
  double target_entropy() const { return -static_cast<double>(action_dim_); }
  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  const RlConfig& config() const { return config_; }

  nd::ParamSet& actor_params() { return actor_; }
  nd::ParamSet& critic_params() { return critic_; }

  void save(const std::string& path) const;

 private:
  struct ActorSample;
  ActorSample actor_forward(nd::ParamBind* bind, const nd::Tensor& y, const nd::Tensor* noise);
  std::pair<nd::NodePtr, nd::NodePtr> critic_forward(nd::ParamBind* bind, const nd::NodePtr& y,
                                                     const nd::NodePtr& a,
                                                     const nd::ParamSet& source);

  std::size_t obs_dim_, action_dim_;
  RlConfig config_;
  nd::ParamSet actor_, critic_, critic_target_, temperature_;
  nd::Adam actor_opt_, critic_opt_, alpha_opt_;
  Rng rng_;
  std::uint64_t update_count_ = 0;
};

struct EvalPoint {
  std::uint64_t env_step = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
};

struct TrainResult {
  std::vector<EvalPoint> eval_log;
  double final_mean_return = 0.0;
};

// Alg-style downstream phase: interacts for config.steps environment steps,
// stores pixel transitions, re-encodes shifted pixels through the frozen
// encoder on every update, augments rewards with the prototype-guided kNN
// bonus and evaluates the deterministic policy periodically. The encoder and
// prototypes are const; no gradient path into them exists.
TrainResult train_downstream(const std::string& domain, const envs::EnvOptions& options,
                             const proto::EncoderStack& stack, const proto::PrototypeBank& bank,
                             const RlConfig& config, std::uint64_t seed,
                             const std::string& eval_csv_path = "",
                             const std::string& policy_ckpt_path = "");

// Mean/stddev of episode returns under i.i.d. uniform actions.
EvalPoint random_policy_baseline(const std::string& domain, const envs::EnvOptions& options,
                                 std::size_t episodes, std::uint64_t seed);

}  // namespace crpt::rl
