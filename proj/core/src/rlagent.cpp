#include "crpt/rlagent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "crpt/checkpoint.hpp"
#include "crpt/error.hpp"

namespace crpt::rl {

void RlConfig::validate() const {
  // gamma = 0 is legal at the agent level (degenerate one-step targets).
  if (!(discount >= 0.0 && discount < 1.0)) raise(Errc::ConfigInvalid, "discount must be in [0,1)");
  if (replay_capacity == 0 || batch == 0) raise(Errc::ConfigInvalid, "capacities must be positive");
  if (!(init_temperature > 0.0)) raise(Errc::ConfigInvalid, "initial temperature must be positive");
  if (!(actor_lr > 0.0 && critic_lr > 0.0 && alpha_lr > 0.0))
    raise(Errc::ConfigInvalid, "learning rates must be positive");
  if (!(critic_tau > 0.0 && critic_tau <= 1.0))
    raise(Errc::ConfigInvalid, "critic target momentum must be in (0,1]");
  if (knn_k == 0 || q_capacity == 0) raise(Errc::ConfigInvalid, "kNN parameters must be positive");
  if (beta < 0.0) raise(Errc::ConfigInvalid, "exploration coefficient must be >= 0");
  if (log_std_min >= log_std_max) raise(Errc::ConfigInvalid, "log-std bounds are inverted");
  if (eval_episodes == 0) raise(Errc::ConfigInvalid, "need at least one evaluation episode");
}

namespace {
constexpr double kLogProbEps = 1e-6;
constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)

nd::Tensor init_normal(Rng& rng, std::vector<std::size_t> shape, double stddev) {
  nd::Tensor t(std::move(shape));
  for (double& v : t.data) v = stddev * rng.normal();
  return t;
}

void add_mlp(nd::ParamSet& ps, Rng& rng, const std::string& prefix, std::size_t in,
             std::size_t hidden, std::size_t out) {
  ps.add(prefix + ".h1.w", init_normal(rng, {hidden, in}, std::sqrt(2.0 / in)));
  ps.add(prefix + ".h1.b", nd::Tensor::zeros({hidden}));
  ps.add(prefix + ".h2.w", init_normal(rng, {hidden, hidden}, std::sqrt(2.0 / hidden)));
  ps.add(prefix + ".h2.b", nd::Tensor::zeros({hidden}));
  ps.add(prefix + ".out.w", init_normal(rng, {out, hidden}, 1.0 / std::sqrt(double(hidden))));
  ps.add(prefix + ".out.b", nd::Tensor::zeros({out}));
}

using Lookup = std::function<nd::NodePtr(const std::string&)>;

Lookup make_lookup(nd::ParamBind* bind, const nd::ParamSet& ps) {
  if (bind) return [bind](const std::string& n) { return (*bind)(n); };
  return [&ps](const std::string& n) { return nd::constant(ps.value(n)); };
}

nd::NodePtr mlp_forward(const Lookup& look, const std::string& prefix, const nd::NodePtr& x) {
  nd::NodePtr h = nd::relu(nd::affine(x, look(prefix + ".h1.w"), look(prefix + ".h1.b")));
  h = nd::relu(nd::affine(h, look(prefix + ".h2.w"), look(prefix + ".h2.b")));
  return nd::affine(h, look(prefix + ".out.w"), look(prefix + ".out.b"));
}
}  // namespace

SacAgent::SacAgent(std::size_t obs_dim, std::size_t action_dim, const RlConfig& config,
                   std::uint64_t seed)
    : obs_dim_(obs_dim),
      action_dim_(action_dim),
      config_(config),
      actor_opt_(nd::AdamConfig{config.actor_lr}),
      critic_opt_(nd::AdamConfig{config.critic_lr}),
      alpha_opt_(nd::AdamConfig{config.alpha_lr}),
      rng_(derive_seed(seed, "sac")) {
  config_.validate();
  Rng init(derive_seed(seed, "sac-init"));

  actor_.add("actor.trunk.w", init_normal(init, {config.feature_dim, obs_dim},
                                          1.0 / std::sqrt(double(obs_dim))));
  actor_.add("actor.trunk.b", nd::Tensor::zeros({config.feature_dim}));
  add_mlp(actor_, init, "actor", config.feature_dim, config.hidden, 2 * action_dim);

  critic_.add("critic.trunk.w", init_normal(init, {config.feature_dim, obs_dim},
                                            1.0 / std::sqrt(double(obs_dim))));
  critic_.add("critic.trunk.b", nd::Tensor::zeros({config.feature_dim}));
  add_mlp(critic_, init, "critic.q1", config.feature_dim + action_dim, config.hidden, 1);
  add_mlp(critic_, init, "critic.q2", config.feature_dim + action_dim, config.hidden, 1);

  for (const std::string& n : critic_.names()) critic_target_.add(n, critic_.value(n));

  temperature_.add("log_alpha", nd::Tensor({1}, {std::log(config.init_temperature)}));
}

double SacAgent::alpha() const { return std::exp(temperature_.value("log_alpha").data[0]); }

struct SacAgent::ActorSample {
  nd::NodePtr action;       // {B, A}, tanh-squashed
  nd::NodePtr log_pi;       // {B, 1}
  nd::Tensor mean_action;   // tanh of the mean head
};

SacAgent::ActorSample SacAgent::actor_forward(nd::ParamBind* bind, const nd::Tensor& y,
                                              const nd::Tensor* noise) {
  Lookup look = make_lookup(bind, actor_);
  const std::size_t B = y.rows(), A = action_dim_;
  nd::NodePtr t = nd::tanh_op(nd::affine(nd::constant(y), look("actor.trunk.w"), look("actor.trunk.b")));
  nd::NodePtr out = mlp_forward(look, "actor", t);
  nd::NodePtr mu = nd::slice_cols(out, 0, A);
  nd::NodePtr raw_std = nd::slice_cols(out, A, 2 * A);
  // log-std squashed into [min, max]
  const double lo = config_.log_std_min, hi = config_.log_std_max;
  nd::NodePtr log_std =
      nd::add_scalar(nd::scale(nd::add_scalar(nd::tanh_op(raw_std), 1.0), 0.5 * (hi - lo)), lo);

  ActorSample s;
  {
    nd::Tensor mean_sq({B, A});
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < A; ++j) mean_sq.at(i, j) = std::tanh(mu->value.at(i, j));
    s.mean_action = std::move(mean_sq);
  }
  if (noise == nullptr) return s;

  nd::NodePtr sigma = nd::exp_op(log_std);
  nd::NodePtr u = nd::add(mu, nd::mul(sigma, nd::constant(*noise)));
  s.action = nd::tanh_op(u);

  // log N(u; mu, sigma) with u = mu + sigma*eps reduces to
  // -0.5 eps^2 - log sigma - 0.5 log 2pi per coordinate.
  nd::Tensor base({B, A});
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = 0; j < A; ++j)
      base.at(i, j) = -0.5 * noise->at(i, j) * noise->at(i, j) - kHalfLog2Pi;
  nd::NodePtr gauss = nd::sum_rows(nd::add(nd::constant(base), nd::scale(log_std, -1.0)));
  // tanh change of variables: - sum log(1 - a^2 + eps)
  nd::NodePtr corr =
      nd::sum_rows(nd::log_op(nd::add_scalar(nd::scale(nd::mul(s.action, s.action), -1.0), 1.0 + kLogProbEps)));
  s.log_pi = nd::sub(gauss, corr);
  return s;
}

std::pair<nd::NodePtr, nd::NodePtr> SacAgent::critic_forward(nd::ParamBind* bind,
                                                             const nd::NodePtr& y,
                                                             const nd::NodePtr& a,
                                                             const nd::ParamSet& source) {
  Lookup look = make_lookup(bind, source);
  nd::NodePtr t = nd::tanh_op(nd::affine(y, look("critic.trunk.w"), look("critic.trunk.b")));
  nd::NodePtr x = nd::concat_cols(t, a);
  return {mlp_forward(look, "critic.q1", x), mlp_forward(look, "critic.q2", x)};
}

std::vector<double> SacAgent::act(const std::vector<double>& y, bool stochastic) {
  if (y.size() != obs_dim_) raise(Errc::ShapeMismatch, "act: observation dimension mismatch");
  nd::Tensor yt({1, obs_dim_}, std::vector<double>(y));
  if (!stochastic) {
    ActorSample s = actor_forward(nullptr, yt, nullptr);
    return {s.mean_action.data.begin(), s.mean_action.data.end()};
  }
  nd::Tensor noise({1, action_dim_});
  for (double& v : noise.data) v = rng_.normal();
  ActorSample s = actor_forward(nullptr, yt, &noise);
  return {s.action->value.data.begin(), s.action->value.data.end()};
}

std::vector<double> SacAgent::critic_targets(const EncodedBatch& batch) {
  const std::size_t B = batch.y_next.rows();
  nd::Tensor noise({B, action_dim_});
  for (double& v : noise.data) v = rng_.normal();
  ActorSample next = actor_forward(nullptr, batch.y_next, &noise);
  auto [q1, q2] = critic_forward(nullptr, nd::constant(batch.y_next), next.action, critic_target_);
  const double a = alpha();
  std::vector<double> targets(B);
  for (std::size_t i = 0; i < B; ++i) {
    const double qmin = std::min(q1->value.at(i, 0), q2->value.at(i, 0));
    const double v = qmin - a * next.log_pi->value.at(i, 0);
    targets[i] = batch.reward[i] + config_.discount * (1.0 - batch.done[i]) * v;
  }
  return targets;
}

UpdateSummary SacAgent::update(const EncodedBatch& batch) {
  const std::size_t B = batch.y.rows();
  if (batch.reward.size() != B || batch.done.size() != B || batch.y_next.rows() != B ||
      batch.action.rows() != B)
    raise(Errc::ShapeMismatch, "update: ragged batch");
  if (B == 0) raise(Errc::InsufficientData, "update: empty batch");

  UpdateSummary summary;
  std::vector<double> targets = critic_targets(batch);

  {  // critic regression toward the bootstrapped targets
    critic_.zero_grad();
    nd::ParamBind bind(critic_);
    auto [q1, q2] = critic_forward(&bind, nd::constant(batch.y), nd::constant(batch.action), critic_);
    nd::Tensor tgt({B, 1}, std::vector<double>(targets));
    nd::NodePtr d1 = nd::sub(q1, nd::constant(tgt));
    nd::NodePtr d2 = nd::sub(q2, nd::constant(tgt));
    nd::NodePtr loss = nd::add(nd::mean(nd::mul(d1, d1)), nd::mean(nd::mul(d2, d2)));
    nd::backward(loss);
    bind.flush_grads();
    critic_opt_.step(critic_);
    summary.critic_loss = loss->value.item();
  }

  ++update_count_;
  if (update_count_ % config_.actor_update_freq == 0) {
    // actor: maximize E[minQ - alpha log pi]; critic held constant
    actor_.zero_grad();
    nd::ParamBind bind(actor_);
    nd::Tensor noise({B, action_dim_});
    for (double& v : noise.data) v = rng_.normal();
    ActorSample s = actor_forward(&bind, batch.y, &noise);
    auto [q1, q2] = critic_forward(nullptr, nd::constant(batch.y), s.action, critic_);
    nd::NodePtr qmin = nd::min_elem(q1, q2);
    nd::NodePtr loss = nd::mean(nd::sub(nd::scale(s.log_pi, alpha()), qmin));
    nd::backward(loss);
    bind.flush_grads();
    actor_opt_.step(actor_);
    summary.actor_loss = loss->value.item();
    summary.actor_updated = true;

    // temperature toward target entropy = -action_dim
    const double target_entropy = -static_cast<double>(action_dim_);
    nd::Tensor coeff({1});
    double mean_logpi = 0.0;
    for (std::size_t i = 0; i < B; ++i) mean_logpi += s.log_pi->value.at(i, 0);
    mean_logpi /= static_cast<double>(B);
    coeff.data[0] = -(mean_logpi + target_entropy);
    temperature_.zero_grad();
    nd::ParamBind abind(temperature_);
    nd::NodePtr alpha_node = nd::exp_op(abind("log_alpha"));
    nd::NodePtr aloss = nd::mul(alpha_node, nd::constant(coeff));
    nd::backward(aloss);
    abind.flush_grads();
    alpha_opt_.step(temperature_);
    summary.alpha_loss = aloss->value.item();
  }

  if (update_count_ % config_.critic_target_update_freq == 0)
    nd::ema_update(critic_target_, critic_, config_.critic_tau);

  summary.alpha = alpha();
  return summary;
}

void SacAgent::save(const std::string& path) const {
  std::vector<std::pair<std::string, nd::Tensor>> entries;
  nd::Tensor meta({4});
  meta.data = {double(obs_dim_), double(action_dim_), double(config_.feature_dim),
               double(config_.hidden)};
  entries.emplace_back("meta", std::move(meta));
  for (const std::string& n : actor_.names()) entries.emplace_back("actor/" + n, actor_.value(n));
  for (const std::string& n : critic_.names()) entries.emplace_back("critic/" + n, critic_.value(n));
  for (const std::string& n : critic_target_.names())
    entries.emplace_back("critic_target/" + n, critic_target_.value(n));
  entries.emplace_back("log_alpha", temperature_.value("log_alpha"));
  nd::save_tensors(path, entries);
}

namespace {
struct Replay {
  struct Item {
    envs::FrameStack obs;
    std::vector<double> action;
    double reward;
    envs::FrameStack next;
    double done;
  };
  explicit Replay(std::size_t capacity) : capacity(capacity) {}
  void push(Item item) {
    if (items.size() < capacity) {
      items.push_back(std::move(item));
    } else {
      items[head] = std::move(item);
      head = (head + 1) % capacity;
    }
  }
  std::size_t capacity, head = 0;
  std::vector<Item> items;
};

double encode_and_update(const proto::EncoderStack& stack, const proto::PrototypeBank& bank,
                         const RlConfig& cfg, SacAgent& agent, Replay& replay,
                         intrinsic::ProjectionSet& q, Rng& rng) {
  const std::size_t B = cfg.batch;
  std::vector<const envs::FrameStack*> cur(B), nxt(B);
  nd::Tensor actions({B, agent.action_dim()});
  std::vector<double> rewards(B), done(B);
  for (std::size_t i = 0; i < B; ++i) {
    const Replay::Item& it = replay.items[rng.uniform_index(replay.items.size())];
    cur[i] = &it.obs;
    nxt[i] = &it.next;
    for (std::size_t j = 0; j < it.action.size(); ++j) actions.at(i, j) = it.action[j];
    rewards[i] = it.reward;
    done[i] = it.done;
  }
  nd::Tensor cur_px = proto::augment_shift(envs::stacks_to_batch(cur), cfg.shift_pad, rng);
  nd::Tensor nxt_px = proto::augment_shift(envs::stacks_to_batch(nxt), cfg.shift_pad, rng);

  nd::Tensor y = stack.encode(cur_px);
  nd::Tensor y2 = stack.encode(nxt_px);
  nd::Tensor z2 = stack.project_from_repr(y2);

  // kNN exploration bonus against the prototype-selected set, then refresh
  // the set from this batch's projections.
  double mean_rhat = 0.0;
  if (cfg.beta > 0.0) {
    for (std::size_t i = 0; i < B; ++i) {
      double rhat = 0.0;
      if (q.size() >= cfg.knn_k) {
        std::vector<double> zi(z2.cols());
        for (std::size_t c = 0; c < zi.size(); ++c) zi[c] = z2.at(i, c);
        rhat = intrinsic::knn_reward(zi, q, cfg.knn_k);
      }
      mean_rhat += rhat;
      rewards[i] = intrinsic::augment_reward(rewards[i], rhat, cfg.beta);
    }
    mean_rhat /= static_cast<double>(B);
    intrinsic::update_q(q, z2, bank);
  }

  EncodedBatch batch{std::move(y), std::move(actions), std::move(rewards), std::move(y2),
                     std::move(done)};
  agent.update(batch);
  return mean_rhat;
}

std::vector<double> encode_single(const proto::EncoderStack& stack, const envs::FrameStack& s) {
  nd::Tensor y = stack.encode(envs::stacks_to_batch({&s}));
  return {y.data.begin(), y.data.end()};
}

EvalPoint evaluate_policy(const std::string& domain, const envs::EnvOptions& options,
                          const proto::EncoderStack& stack, SacAgent& agent, std::size_t episodes,
                          std::uint64_t seed, std::uint64_t env_step) {
  auto env = envs::make_env(domain, options);
  std::vector<double> returns;
  returns.reserve(episodes);
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    envs::FrameStack obs = env->reset(derive_seed(seed, "eval-episode", ep));
    double ret = 0.0;
    bool done = false;
    while (!done) {
      std::vector<double> action = agent.act(encode_single(stack, obs), /*stochastic=*/false);
      envs::Transition tr = env->step(action);
      ret += tr.reward;
      done = tr.terminal;
      obs = tr.next_state;
    }
    returns.push_back(ret);
  }
  EvalPoint p;
  p.env_step = env_step;
  for (double r : returns) p.mean_return += r;
  p.mean_return /= static_cast<double>(returns.size());
  double var = 0.0;
  for (double r : returns) var += (r - p.mean_return) * (r - p.mean_return);
  p.std_return = std::sqrt(var / static_cast<double>(returns.size()));
  return p;
}
}  // namespace

TrainResult train_downstream(const std::string& domain, const envs::EnvOptions& options,
                             const proto::EncoderStack& stack, const proto::PrototypeBank& bank,
                             const RlConfig& config, std::uint64_t seed,
                             const std::string& eval_csv_path,
                             const std::string& policy_ckpt_path) {
  config.validate();
  auto env = envs::make_env(domain, options);
  SacAgent agent(stack.arch().repr_dim(), env->spec().action_dim, config,
                 derive_seed(seed, "agent"));
  Replay replay(config.replay_capacity);
  intrinsic::ProjectionSet q(config.q_capacity);
  Rng update_rng(derive_seed(seed, "updates"));
  Rng action_rng(derive_seed(seed, "warmup-actions"));

  std::ofstream eval_csv;
  if (!eval_csv_path.empty()) {
    eval_csv.open(eval_csv_path, std::ios::trunc);
    if (!eval_csv) raise(Errc::IoError, "cannot open '" + eval_csv_path + "' for writing");
    eval_csv << "env_step,mean_return,std_return,beta,seed\n";
  }
  TrainResult result;
  auto run_eval = [&](std::uint64_t env_step) {
    EvalPoint p = evaluate_policy(domain, options, stack, agent, config.eval_episodes,
                                  derive_seed(seed, "eval", env_step), env_step);
    result.eval_log.push_back(p);
    if (eval_csv.is_open()) {
      char line[160];
      std::snprintf(line, sizeof(line), "%llu,%.6f,%.6f,%.3f,%llu\n",
                    static_cast<unsigned long long>(p.env_step), p.mean_return, p.std_return,
                    config.beta, static_cast<unsigned long long>(seed));
      eval_csv << line;
    }
  };

  std::uint64_t episode = 0;
  envs::FrameStack obs = env->reset(derive_seed(seed, "episode", episode++));
  std::uint64_t env_step = 0;
  std::uint64_t next_eval = config.eval_every;
  while (env_step < config.steps) {
    std::vector<double> action(env->spec().action_dim);
    if (env_step < config.seed_steps) {
      for (double& a : action) a = action_rng.uniform(-1.0, 1.0);
    } else {
      action = agent.act(encode_single(stack, obs), /*stochastic=*/true);
    }
    envs::Transition tr = env->step(action);
    env_step += options.action_repeat;
    // episode boundaries here are time limits, not absorbing states
    replay.push({tr.state, action, tr.reward, tr.next_state, 0.0});
    obs = tr.terminal ? env->reset(derive_seed(seed, "episode", episode++)) : tr.next_state;

    if (env_step >= config.seed_steps && replay.items.size() >= config.batch)
      encode_and_update(stack, bank, config, agent, replay, q, update_rng);

    if (config.eval_every > 0 && env_step >= next_eval) {
      run_eval(env_step);
      next_eval += config.eval_every;
    }
  }
  if (config.steps > 0 && (result.eval_log.empty() || result.eval_log.back().env_step < env_step))
    run_eval(env_step);
  if (!result.eval_log.empty()) result.final_mean_return = result.eval_log.back().mean_return;
  if (!policy_ckpt_path.empty()) agent.save(policy_ckpt_path);
  return result;
}

EvalPoint random_policy_baseline(const std::string& domain, const envs::EnvOptions& options,
                                 std::size_t episodes, std::uint64_t seed) {
  auto env = envs::make_env(domain, options);
  Rng rng(derive_seed(seed, "baseline-actions"));
  std::vector<double> returns;
  returns.reserve(episodes);
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    env->reset(derive_seed(seed, "baseline-episode", ep));
    double ret = 0.0;
    bool done = false;
    while (!done) {
      std::vector<double> action(env->spec().action_dim);
      for (double& a : action) a = rng.uniform(-1.0, 1.0);
      envs::Transition tr = env->step(action);
      ret += tr.reward;
      done = tr.terminal;
    }
    returns.push_back(ret);
  }
  EvalPoint p;
  for (double r : returns) p.mean_return += r;
  p.mean_return /= static_cast<double>(returns.size());
  double var = 0.0;
  for (double r : returns) var += (r - p.mean_return) * (r - p.mean_return);
  p.std_return = std::sqrt(var / static_cast<double>(returns.size()));
  return p;
}

}  // namespace crpt::rl
