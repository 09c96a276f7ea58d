#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crpt/env.hpp"
#include "crpt/tensor.hpp"

namespace crpt::collect {

// Append-only store of single rendered frames from one reward-free domain.
// Episode starts are recorded so temporal pairs never cross a reset.
// `states` is an in-memory diagnostic sidecar (ground-truth vectors parallel
// to frames, used by probes); it is not part of the wire format.
struct DomainBuffer {
  std::string domain;
  std::uint64_t capacity = 0;
  std::uint32_t frame_h = 0, frame_w = 0, frame_c = 1;
  std::vector<std::uint8_t> frames;  // count * frame_h*frame_w*frame_c bytes
  std::vector<std::uint64_t> episode_starts;
  std::uint64_t collect_seed = 0;
  std::vector<std::vector<double>> states;

  std::size_t frame_bytes() const {
    return static_cast<std::size_t>(frame_h) * frame_w * frame_c;
  }
  std::size_t count() const { return frame_bytes() ? frames.size() / frame_bytes() : 0; }
  const std::uint8_t* frame(std::size_t i) const { return frames.data() + i * frame_bytes(); }

  bool is_episode_start(std::size_t i) const;
  // First frame index of the episode containing frame i.
  std::size_t episode_start_of(std::size_t i) const;

  // Indices t such that (t, t+1) lies within one episode.
  std::vector<std::size_t> valid_pair_indices() const;

  // Wire-content equality (domain, dims, frames, episode starts).
  bool same_content(const DomainBuffer& o) const;
};

// Fills a buffer by driving the domain with i.i.d. uniform actions on the
// action box. Episodes restart at the episode-length boundary. Deterministic
// given the seed. The environment is created fresh inside; nothing learned
// is reachable from here.
DomainBuffer collect_random(const std::string& domain, const envs::EnvOptions& options,
                            std::uint64_t steps, std::uint64_t capacity, std::uint64_t seed);

struct PairBatch {
  nd::Tensor current;  // {M, K*C, H, W}
  nd::Tensor next;     // {M, K*C, H, W}
  std::vector<std::size_t> indices;
};

// Draws `count` temporal pairs uniformly with replacement and assembles
// K-stacks (history clamped at the episode start). InsufficientData if the
// buffer holds no valid pair.
PairBatch sample_pairs(const DomainBuffer& buffer, std::size_t count, std::size_t stack_k,
                       std::uint64_t seed);

// Single K-stack ending at frame index i, as a {K*C, H, W} tensor.
nd::Tensor stack_at(const DomainBuffer& buffer, std::size_t i, std::size_t stack_k);

inline constexpr char kBufferMagic[7] = {'C', 'R', 'P', 'T', 'B', 'U', 'F'};
inline constexpr std::uint32_t kBufferVersion = 1;

void save_buffer(const DomainBuffer& buffer, const std::string& path);
DomainBuffer load_buffer(const std::string& path);

}  // namespace crpt::collect
