#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "crpt/error.hpp"
#include "crpt/rlagent.hpp"

using namespace crpt;
using namespace crpt::rl;
using crpt::nd::Tensor;

namespace {
RlConfig small_config() {
  RlConfig c;
  c.batch = 8;
  c.replay_capacity = 512;
  c.feature_dim = 8;
  c.hidden = 16;
  c.seed_steps = 100;
  c.eval_every = 0;
  c.eval_episodes = 2;
  return c;
}

EncodedBatch synthetic_batch(Rng& rng, std::size_t b, std::size_t f, std::size_t a,
                             double reward, double done) {
  EncodedBatch batch;
  batch.y = Tensor({b, f});
  batch.y_next = Tensor({b, f});
  batch.action = Tensor({b, a});
  for (double& v : batch.y.data) v = rng.normal();
  for (double& v : batch.y_next.data) v = rng.normal();
  for (double& v : batch.action.data) v = std::tanh(rng.normal());
  batch.reward.assign(b, reward);
  batch.done.assign(b, done);
  return batch;
}
}  // namespace

TEST_CASE("deterministic actions repeat; stochastic actions stay bounded") {
  SacAgent agent(10, 2, small_config(), 7);
  std::vector<double> y(10, 0.3);
  auto a1 = agent.act(y, false);
  auto a2 = agent.act(y, false);
  CHECK(a1 == a2);
  REQUIRE(a1.size() == 2);

  for (int i = 0; i < 10000; ++i) {
    auto a = agent.act(y, true);
    for (double v : a) {
      CHECK(v <= 1.0);
      CHECK(v >= -1.0);
    }
  }
}

TEST_CASE("zero output head gives the zero action") {
  SacAgent agent(6, 3, small_config(), 3);
  agent.actor_params().value("actor.out.w").fill(0.0);
  agent.actor_params().value("actor.out.b").fill(0.0);
  std::vector<double> y(6, -0.9);
  auto a = agent.act(y, false);
  for (double v : a) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("target entropy convention") {
  SacAgent agent(4, 2, small_config(), 1);
  CHECK(agent.target_entropy() == -2.0);
}

TEST_CASE("critic targets at gamma = 0 equal the augmented rewards") {
  RlConfig cfg = small_config();
  cfg.discount = 0.0;
  SacAgent agent(5, 2, cfg, 11);
  Rng rng(5);
  EncodedBatch batch = synthetic_batch(rng, 8, 5, 2, 1.75, 1.0);
  for (double t : agent.critic_targets(batch)) CHECK(t == doctest::Approx(1.75).epsilon(1e-12));

  // reward-free environment, beta = 0: targets identically zero
  EncodedBatch zero = synthetic_batch(rng, 8, 5, 2, 0.0, 0.0);
  for (double t : agent.critic_targets(zero)) CHECK(t == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("terminal flags cut bootstrapping at any gamma") {
  RlConfig cfg = small_config();
  cfg.discount = 0.9;
  SacAgent agent(5, 2, cfg, 13);
  Rng rng(6);
  EncodedBatch done_batch = synthetic_batch(rng, 6, 5, 2, 0.5, 1.0);
  for (double t : agent.critic_targets(done_batch)) CHECK(t == doctest::Approx(0.5).epsilon(1e-12));

  EncodedBatch open_batch = synthetic_batch(rng, 6, 5, 2, 0.5, 0.0);
  bool any_bootstrap = false;
  for (double t : agent.critic_targets(open_batch)) any_bootstrap |= std::abs(t - 0.5) > 1e-9;
  CHECK(any_bootstrap);
}

TEST_CASE("updates keep losses finite and tune the temperature") {
  RlConfig cfg = small_config();
  SacAgent agent(6, 2, cfg, 17);
  Rng rng(9);
  const double alpha0 = agent.alpha();
  bool actor_seen = false;
  for (int i = 0; i < 30; ++i) {
    EncodedBatch batch = synthetic_batch(rng, 16, 6, 2, rng.uniform(), 0.0);
    UpdateSummary s = agent.update(batch);
    CHECK(std::isfinite(s.critic_loss));
    if (s.actor_updated) {
      actor_seen = true;
      CHECK(std::isfinite(s.actor_loss));
      CHECK(std::isfinite(s.alpha_loss));
    }
    CHECK(s.alpha > 0.0);
  }
  CHECK(actor_seen);
  CHECK(agent.alpha() != alpha0);  // the temperature moved
}

TEST_CASE("downstream training freezes the encoder bit for bit") {
  proto::Arch arch;
  arch.conv_channels = 4;
  arch.latent_dim = 8;
  arch.predictor_hidden = 8;
  arch.prototypes = 8;
  proto::EncoderStack stack(arch, 21);
  proto::PrototypeBank bank(8, 8, 22);

  std::map<std::string, std::vector<double>> before;
  for (const auto& n : stack.online().names()) before["o/" + n] = stack.online().value(n).data;
  for (const auto& n : stack.predictor().names()) before["p/" + n] = stack.predictor().value(n).data;
  for (const auto& n : stack.target().names()) before["t/" + n] = stack.target().value(n).data;
  before["proto"] = bank.raw().data;

  RlConfig cfg = small_config();
  cfg.steps = 600;
  cfg.seed_steps = 200;
  cfg.eval_every = 300;
  cfg.batch = 16;
  TrainResult res = rl::train_downstream("pendulum", envs::EnvOptions{}, stack, bank, cfg, 31);
  CHECK_FALSE(res.eval_log.empty());
  for (const auto& p : res.eval_log) {
    CHECK(std::isfinite(p.mean_return));
    CHECK(p.std_return >= 0.0);
  }

  for (const auto& n : stack.online().names()) CHECK(before["o/" + n] == stack.online().value(n).data);
  for (const auto& n : stack.predictor().names())
    CHECK(before["p/" + n] == stack.predictor().value(n).data);
  for (const auto& n : stack.target().names()) CHECK(before["t/" + n] == stack.target().value(n).data);
  CHECK(before["proto"] == bank.raw().data);
}

TEST_CASE("zero-step downstream training is a no-op") {
  proto::Arch arch;
  arch.conv_channels = 4;
  arch.latent_dim = 8;
  arch.predictor_hidden = 8;
  arch.prototypes = 8;
  proto::EncoderStack stack(arch, 5);
  proto::PrototypeBank bank(8, 8, 6);
  RlConfig cfg = small_config();
  cfg.steps = 0;
  TrainResult res = rl::train_downstream("pendulum", envs::EnvOptions{}, stack, bank, cfg, 31);
  CHECK(res.eval_log.empty());
}

TEST_CASE("random baseline reports sane statistics") {
  envs::EnvOptions opts;
  opts.episode_length = 50;
  EvalPoint p = random_policy_baseline("pendulum", opts, 20, 3);
  CHECK(std::isfinite(p.mean_return));
  CHECK(p.mean_return >= 0.0);
  CHECK(p.std_return >= 0.0);
}

TEST_CASE("config guards") {
  RlConfig bad = small_config();
  bad.discount = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  RlConfig bad2 = small_config();
  bad2.log_std_min = 3.0;
  CHECK_THROWS_AS(bad2.validate(), Error);
  RlConfig ok = small_config();
  ok.discount = 0.0;
  CHECK_NOTHROW(ok.validate());
}
