#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "crpt/config.hpp"
#include "crpt/hash.hpp"

using namespace crpt;
using namespace crpt::config;

TEST_CASE("empty text yields the full desk defaults") {
  ParseResult r = parse_config("");
  CHECK(r.ok());
  CHECK(r.config == RunConfig{});
  CHECK(r.config.preset == "desk");
  CHECK(r.config.prototypes == 64);
  CHECK(r.config.render_size == 32);
}

TEST_CASE("paper preset echoes the full-scale settings") {
  ParseResult r = parse_config("preset = paper\n");
  REQUIRE(r.ok());
  const RunConfig& c = r.config;
  CHECK(c.prototypes == 512);
  CHECK(c.latent_dim == 128);
  CHECK(c.tau == 0.1);
  CHECK(c.intrinsic_weight == 1.5);
  CHECK(c.intrinsic_coef == 5e-3);
  CHECK(c.beta == 0.2);
  CHECK(c.knn_k == 3);
  CHECK(c.discount == 0.99);
  CHECK(c.shift_pad == 4);
  CHECK(c.q_capacity == 2048);
  CHECK(c.batch == 512);
  CHECK(c.ema_eta == 0.05);
  CHECK(c.ssl_lr == 1e-4);
  CHECK(c.pretrain_steps == 50000);
  CHECK(c.conv_channels == 32);
  CHECK(c.predictor_hidden == 1024);
  CHECK(c.replay_capacity == 40000);
  CHECK(c.rl_steps == 500000);
  CHECK(c.init_temperature == 0.1);
  CHECK(c.actor_update_freq == 2);
  CHECK(c.critic_target_update_freq == 2);
  CHECK(c.critic_tau == 0.01);
  CHECK(c.buffer_capacity == 100000);
  CHECK(c.render_size == 84);
  CHECK_FALSE(c.grayscale);
  CHECK(c.episode_length == 1000);
  CHECK(c.action_repeat == 2);
  // 84x84x3 stacked by 3 -> 9 input channels, representation 39200
  CHECK(c.arch().in_channels == 9);
  CHECK(c.arch().repr_dim() == 39200);
}

TEST_CASE("constraint violations carry the spec wording") {
  ParseResult r = parse_config("intrinsic_weight = 1.0\n");
  REQUIRE_FALSE(r.ok());
  bool found = false;
  for (const auto& i : r.issues)
    found |= i.field == "intrinsic_weight" && i.message == "intrinsic weight must exceed 1";
  CHECK(found);
}

TEST_CASE("unknown keys are reported by name") {
  ParseResult r = parse_config("foo = 12\n");
  REQUIRE_FALSE(r.ok());
  REQUIRE(r.issues.size() == 1);
  CHECK(r.issues[0].field == "foo");
  CHECK(r.issues[0].message == "unknown key");
}

TEST_CASE("all problems are collected, not fail-fast") {
  ParseResult r = parse_config(
      "foo = 1\n"
      "tau = -2\n"
      "discount = 7\n"
      "bar = x\n"
      "knn_k = banana\n");
  REQUIRE_FALSE(r.ok());
  CHECK(r.issues.size() >= 5);
}

TEST_CASE("comments, blanks and whitespace are tolerated") {
  ParseResult r = parse_config(
      "# a comment\n"
      "\n"
      "  prototypes =  32  # trailing comment\n"
      "domains = pendulum , pointmass\n");
  REQUIRE(r.ok());
  CHECK(r.config.prototypes == 32);
  CHECK(r.config.domains == std::vector<std::string>{"pendulum", "pointmass"});
}

TEST_CASE("serialize/parse round-trip is exact") {
  ParseResult base = parse_config(
      "preset = paper\n"
      "root_seed = 987654321\n"
      "ssl_lr = 0.000137\n"
      "domains = cartpole,pointmass\n"
      "phases = collect,pretrain\n"
      "renorm_targets = false\n");
  REQUIRE(base.ok());
  const std::string text = serialize_config(base.config);
  ParseResult again = parse_config(text);
  REQUIRE(again.ok());
  CHECK(again.config == base.config);
  CHECK(serialize_config(again.config) == text);
}

TEST_CASE("derived views agree with the flat fields") {
  RunConfig c;
  c.frame_stack = 3;
  c.grayscale = true;
  CHECK(c.env_options().channels == 1);
  CHECK(c.arch().in_channels == 3);
  CHECK(c.ssl().batch == c.batch);
  CHECK(c.rl().discount == c.discount);
  CHECK(c.effective_train_domains() == c.domains);
  c.train_domains = {"pendulum"};
  CHECK(c.effective_train_domains() == std::vector<std::string>{"pendulum"});
}

TEST_CASE("phase names are validated") {
  ParseResult r = parse_config("phases = collect,deploy\n");
  REQUIRE_FALSE(r.ok());
  CHECK(r.issues[0].field == "phases");
}

TEST_CASE("git-style blob hashes match git") {
  // `echo hello | git hash-object --stdin`
  CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  CHECK(sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
  CHECK(sha1_hex("") == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
}
