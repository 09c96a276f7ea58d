#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "crpt/rng.hpp"
#include "crpt/tensor.hpp"

namespace crpt::envs {

// Rendered image, row-major, `channels` interleaved per pixel, 8-bit.
struct Frame {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 1;
  std::vector<std::uint8_t> px;

  static Frame blank(std::uint32_t h, std::uint32_t w, std::uint32_t c);
  bool operator==(const Frame&) const = default;
};

// K consecutive frames forming one observation.
struct FrameStack {
  std::vector<Frame> frames;
  std::uint64_t timestep = 0;

  bool operator==(const FrameStack&) const = default;
};

struct Transition {
  FrameStack state;
  std::vector<double> action;
  double reward = 0.0;
  FrameStack next_state;
  bool terminal = false;  // episode length reached (these domains have no absorbing states)
};

struct EnvOptions {
  std::uint32_t render_size = 32;
  std::uint32_t channels = 1;  // 1 = grayscale, 3 = RGB
  std::size_t frame_stack = 3;
  std::uint64_t episode_length = 200;  // raw control steps per episode
  std::uint32_t action_repeat = 2;
};

struct DomainSpec {
  std::string name;
  std::size_t state_dim = 0;   // ground-truth vector length
  std::size_t action_dim = 0;  // actions live in [-1,1]^action_dim
  EnvOptions options;
};

// A reward-free/rewarded continuous-control domain with deterministic
// analytic dynamics. Control timestep is 0.05 s, integrated in fixed
// 1 ms substeps; one step() advances action_repeat control steps.
class Env {
 public:
  virtual ~Env() = default;

  const DomainSpec& spec() const { return spec_; }

  FrameStack reset(std::uint64_t seed);
  Transition step(const std::vector<double>& action);

  // Exact low-dimensional physical state view; diagnostic only, never fed
  // to training code.
  std::vector<double> ground_truth_state() const;

  // Raw physical coordinates, for tests and probes.
  const std::vector<double>& internal_state() const;
  void set_internal_state(const std::vector<double>& phys);

  const FrameStack& current_stack() const;
  std::uint64_t elapsed_steps() const { return t_; }

  static constexpr double kControlDt = 0.05;
  static constexpr int kSubsteps = 50;  // 1 ms physics substeps

 protected:
  explicit Env(DomainSpec spec) : spec_(std::move(spec)) {}

  virtual std::vector<double> sample_init(Rng& rng) const = 0;
  // Advances the physical state by one control timestep.
  virtual void integrate(std::vector<double>& s, const std::vector<double>& a) const = 0;
  virtual double reward(const std::vector<double>& s) const = 0;
  virtual void render(const std::vector<double>& s, Frame& out) const = 0;
  virtual std::vector<double> observe(const std::vector<double>& s) const = 0;

 private:
  void require_reset(const char* op) const;
  Frame render_now() const;
  void push_frame(Frame f);

  DomainSpec spec_;
  std::vector<double> phys_;
  std::deque<Frame> stack_;
  FrameStack cached_stack_;
  std::uint64_t t_ = 0;
  bool live_ = false;
};

// Registry addressable by name; UnknownDomain for anything unknown.
std::vector<std::string> domain_names();
std::unique_ptr<Env> make_env(const std::string& name, const EnvOptions& options);

// {K*channels, H, W} float tensor in [0,1] from one stack.
nd::Tensor stack_to_tensor(const FrameStack& s);
// {B, K*channels, H, W} batch.
nd::Tensor stacks_to_batch(const std::vector<const FrameStack*>& stacks);

}  // namespace crpt::envs
