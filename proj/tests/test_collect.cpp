#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "crpt/collect.hpp"
#include "crpt/error.hpp"
#include "crpt/rng.hpp"

using namespace crpt;
using namespace crpt::collect;

namespace {
envs::EnvOptions short_episodes() {
  envs::EnvOptions o;
  o.episode_length = 10;  // 5 decisions per episode at action repeat 2
  return o;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}
}  // namespace

TEST_CASE("collection is deterministic and counts frames exactly") {
  DomainBuffer a = collect_random("pendulum", envs::EnvOptions{}, 100, 1000, 3);
  DomainBuffer b = collect_random("pendulum", envs::EnvOptions{}, 100, 1000, 3);
  CHECK(a.same_content(b));
  CHECK(a.states == b.states);
  CHECK(a.count() == 100);
  CHECK(a.valid_pair_indices().size() >= 99);
  CHECK(a.states.size() == 100);

  DomainBuffer c = collect_random("pendulum", envs::EnvOptions{}, 100, 1000, 4);
  CHECK_FALSE(c.same_content(a));
}

TEST_CASE("collection honors capacity and the domain registry") {
  CHECK_THROWS_AS(collect_random("pendulum", envs::EnvOptions{}, 11, 10, 1), Error);
  try {
    collect_random("pendulum", envs::EnvOptions{}, 11, 10, 1);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::CapacityExceeded);
  }
  CHECK_THROWS_AS(collect_random("nope", envs::EnvOptions{}, 5, 10, 1), Error);
}

TEST_CASE("random actions have zero empirical mean per dimension") {
  // The exact stream the collector draws from, 1e5 draws per dimension.
  Rng rng(derive_seed(3, "actions"));
  const int n = 100000;
  double mean0 = 0.0, mean1 = 0.0;
  for (int i = 0; i < n; ++i) {
    mean0 += rng.uniform(-1.0, 1.0);
    mean1 += rng.uniform(-1.0, 1.0);
  }
  CHECK(std::abs(mean0 / n) < 0.02);
  CHECK(std::abs(mean1 / n) < 0.02);
}

TEST_CASE("episode starts partition the buffer") {
  DomainBuffer buf = collect_random("pointmass", short_episodes(), 50, 1000, 9);
  REQUIRE(buf.count() == 50);
  // 5 frames per episode
  REQUIRE(buf.episode_starts.size() == 10);
  for (std::size_t e = 0; e < 10; ++e) CHECK(buf.episode_starts[e] == 5 * e);
  CHECK(buf.valid_pair_indices().size() == 40);  // 4 pairs per 5-frame episode
}

TEST_CASE("a two-frame episode yields a single repeated pair") {
  DomainBuffer buf;
  buf.domain = "synthetic";
  buf.frame_h = buf.frame_w = 16;
  buf.frame_c = 1;
  buf.capacity = 2;
  buf.episode_starts = {0};
  buf.frames.assign(2 * 16 * 16, 0);
  buf.frames[0] = 255;            // frame 0 marker
  buf.frames[16 * 16 + 1] = 255;  // frame 1 marker

  PairBatch pb = sample_pairs(buf, 4, 3, 77);
  REQUIRE(pb.indices.size() == 4);
  for (std::size_t idx : pb.indices) CHECK(idx == 0);
  // current stack is the clamped history of frame 0; next ends at frame 1
  CHECK(pb.current.data[0] == doctest::Approx(1.0));
  const std::size_t hw = 16 * 16;
  CHECK(pb.next.data[2 * hw + 1] == doctest::Approx(1.0));  // newest channel = frame 1
  CHECK(pb.next.data[0 * hw + 0] == doctest::Approx(1.0));  // history clamped to frame 0
}

TEST_CASE("pairs never straddle an episode boundary") {
  DomainBuffer buf = collect_random("pendulum", short_episodes(), 200, 1000, 5);
  PairBatch pb = sample_pairs(buf, 10000, 3, 123);
  for (std::size_t t : pb.indices) {
    CHECK_FALSE(buf.is_episode_start(t + 1));
    CHECK(buf.episode_start_of(t) == buf.episode_start_of(t + 1));
  }
}

TEST_CASE("pair sampling is deterministic given the seed") {
  DomainBuffer buf = collect_random("cartpole", envs::EnvOptions{}, 60, 1000, 8);
  PairBatch a = sample_pairs(buf, 32, 3, 4242);
  PairBatch b = sample_pairs(buf, 32, 3, 4242);
  CHECK(a.indices == b.indices);
  CHECK(a.current.data == b.current.data);
  PairBatch c = sample_pairs(buf, 32, 3, 4243);
  CHECK_FALSE(a.indices == c.indices);
}

TEST_CASE("sample_pairs requires at least one valid pair") {
  DomainBuffer buf;
  buf.domain = "x";
  buf.frame_h = buf.frame_w = 16;
  buf.frame_c = 1;
  buf.frames.assign(16 * 16, 0);  // single frame
  buf.episode_starts = {0};
  CHECK_THROWS_AS(sample_pairs(buf, 1, 3, 0), Error);
  try {
    sample_pairs(buf, 1, 3, 0);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InsufficientData);
  }
}

TEST_CASE("buffer files round-trip bit-exactly") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "crpt_buf_test.buf").string();

  DomainBuffer buf = collect_random("pointmass", short_episodes(), 100, 1000, 2);
  save_buffer(buf, path);
  DomainBuffer loaded = load_buffer(path);
  CHECK(loaded.same_content(buf));
  CHECK(loaded.states.empty());  // diagnostic sidecar is not serialized

  const std::string path2 = path + ".2";
  save_buffer(loaded, path2);
  CHECK(slurp(path) == slurp(path2));

  // empty buffer round-trips too
  DomainBuffer empty;
  empty.domain = "pendulum";
  empty.frame_h = empty.frame_w = 32;
  empty.frame_c = 1;
  save_buffer(empty, path);
  DomainBuffer eloaded = load_buffer(path);
  CHECK(eloaded.same_content(empty));
  CHECK(eloaded.count() == 0);

  fs::remove(path);
  fs::remove(path2);
}

TEST_CASE("corrupt buffer files never produce a partial buffer") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "crpt_buf_bad.buf").string();
  DomainBuffer buf = collect_random("pendulum", short_episodes(), 30, 100, 6);
  save_buffer(buf, path);

  const std::string whole = slurp(path);
  for (std::size_t cut : {std::size_t{3}, std::size_t{9}, std::size_t{40}, whole.size() - 7}) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(whole.data(), static_cast<std::streamsize>(cut));
    os.close();
    try {
      load_buffer(path);
      FAIL("expected an error for truncation at " << cut);
    } catch (const Error& e) {
      CHECK((e.code() == Errc::BadMagic || e.code() == Errc::VersionMismatch));
    }
  }

  {  // wrong magic
    std::string tampered = whole;
    tampered[0] = 'X';
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << tampered;
  }
  try {
    load_buffer(path);
    FAIL("expected BadMagic");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BadMagic);
  }

  {  // unknown version
    std::string tampered = whole;
    tampered[7] = 9;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << tampered;
  }
  try {
    load_buffer(path);
    FAIL("expected VersionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::VersionMismatch);
  }
  fs::remove(path);
}

TEST_CASE("stack_at clamps history at episode starts") {
  DomainBuffer buf = collect_random("pendulum", short_episodes(), 12, 100, 1);
  // frame 5 begins the second episode; its stack must not reach back to 4
  nd::Tensor s5 = stack_at(buf, 5, 3);
  const std::size_t hw = std::size_t(buf.frame_h) * buf.frame_w;
  for (std::size_t p = 0; p < hw; ++p) {
    CHECK(s5.data[0 * hw + p] == s5.data[2 * hw + p]);
    CHECK(s5.data[1 * hw + p] == s5.data[2 * hw + p]);
  }
  // mid-episode stacks carry three distinct frames
  nd::Tensor s8 = stack_at(buf, 8, 3);
  bool any_diff = false;
  for (std::size_t p = 0; p < hw && !any_diff; ++p)
    any_diff = s8.data[0 * hw + p] != s8.data[2 * hw + p];
  CHECK(any_diff);
}
