#include "crpt/env.hpp"

#include <algorithm>
#include <cmath>

#include "crpt/error.hpp"

namespace crpt::envs {

Frame Frame::blank(std::uint32_t h, std::uint32_t w, std::uint32_t c) {
  Frame f;
  f.height = h;
  f.width = w;
  f.channels = c;
  f.px.assign(static_cast<std::size_t>(h) * w * c, 0);
  return f;
}

namespace {

constexpr double kPhysDt = Env::kControlDt / Env::kSubsteps;

// Coverage-style splat: writes max(existing, intensity * coverage).
void splat(Frame& f, double x, double y, double radius, double intensity) {
  const int lo_y = std::max(0, static_cast<int>(std::floor(y - radius - 1)));
  const int hi_y = std::min(static_cast<int>(f.height) - 1, static_cast<int>(std::ceil(y + radius + 1)));
  const int lo_x = std::max(0, static_cast<int>(std::floor(x - radius - 1)));
  const int hi_x = std::min(static_cast<int>(f.width) - 1, static_cast<int>(std::ceil(x + radius + 1)));
  for (int py = lo_y; py <= hi_y; ++py)
    for (int px = lo_x; px <= hi_x; ++px) {
      const double d = std::hypot(px + 0.5 - x, py + 0.5 - y);
      const double cov = std::clamp(radius + 0.5 - d, 0.0, 1.0);
      if (cov <= 0.0) continue;
      const auto v = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(intensity * cov, 0.0, 1.0)));
      for (std::uint32_t c = 0; c < f.channels; ++c) {
        std::uint8_t& dst = f.px[(static_cast<std::size_t>(py) * f.width + px) * f.channels + c];
        dst = std::max(dst, v);
      }
    }
}

void draw_segment(Frame& f, double x0, double y0, double x1, double y1, double radius,
                  double intensity) {
  const double len = std::hypot(x1 - x0, y1 - y0);
  const int n = std::max(2, static_cast<int>(std::ceil(len * 2.0)));
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    splat(f, x0 + t * (x1 - x0), y0 + t * (y1 - y0), radius, intensity);
  }
}

class PendulumEnv final : public Env {
 public:
  // theta measured from upright; gravity 10, unit mass and length,
  // torque limit 8, no damping. Sparse upright bonus.
  static constexpr double kG = 10.0;
  static constexpr double kTorque = 8.0;

  explicit PendulumEnv(DomainSpec spec) : Env(std::move(spec)) {}

 protected:
  std::vector<double> sample_init(Rng& rng) const override {
    return {rng.uniform(-M_PI, M_PI), rng.uniform(-1.0, 1.0)};
  }

  static double accel(double theta, double torque) { return kG * std::sin(theta) + torque; }

  void integrate(std::vector<double>& s, const std::vector<double>& a) const override {
    // Velocity Verlet (acceleration depends on angle only): conserves the
    // undriven energy to well under the 1e-3 integrator gate.
    const double torque = kTorque * a[0];
    double th = s[0], om = s[1];
    double acc = accel(th, torque);
    for (int i = 0; i < kSubsteps; ++i) {
      th += om * kPhysDt + 0.5 * acc * kPhysDt * kPhysDt;
      const double acc2 = accel(th, torque);
      om += 0.5 * (acc + acc2) * kPhysDt;
      acc = acc2;
    }
    // Keep the angle in [-pi, pi) so rendering and probes see one chart.
    th = std::remainder(th, 2.0 * M_PI);
    s = {th, om};
  }

  double reward(const std::vector<double>& s) const override {
    return std::cos(s[0]) > 0.95 ? 1.0 : 0.0;
  }

  void render(const std::vector<double>& s, Frame& out) const override {
    const double n = out.width;
    const double cx = n / 2.0, cy = n / 2.0;
    const double rod = 0.42 * n;
    const double tipx = cx + rod * std::sin(s[0]);
    const double tipy = cy - rod * std::cos(s[0]);
    draw_segment(out, cx, cy, tipx, tipy, n / 32.0, 0.85);
    splat(out, tipx, tipy, n / 16.0, 1.0);  // bob
  }

  std::vector<double> observe(const std::vector<double>& s) const override {
    return {std::cos(s[0]), std::sin(s[0]), s[1]};
  }
};

class CartpoleEnv final : public Env {
 public:
  // Pole angle measured from upright; classic frictionless cart-pole.
  static constexpr double kG = 9.8;
  static constexpr double kMassCart = 1.0;
  static constexpr double kMassPole = 0.1;
  static constexpr double kHalfPole = 1.0;  // slow swing keeps the pole readable across stacked frames
  static constexpr double kForce = 10.0;
  static constexpr double kTrack = 2.4;

  explicit CartpoleEnv(DomainSpec spec) : Env(std::move(spec)) {}

 protected:
  std::vector<double> sample_init(Rng& rng) const override {
    // Pole angle covers the circle so random rollouts see every pose.
    return {rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 0.5),
            rng.uniform(-M_PI, M_PI), rng.uniform(-0.5, 0.5)};
  }

  void integrate(std::vector<double>& s, const std::vector<double>& a) const override {
    const double force = kForce * a[0];
    constexpr double total = kMassCart + kMassPole;
    double x = s[0], xd = s[1], th = s[2], thd = s[3];
    for (int i = 0; i < kSubsteps; ++i) {
      const double sth = std::sin(th), cth = std::cos(th);
      const double temp = (force + kMassPole * kHalfPole * thd * thd * sth) / total;
      const double thacc =
          (kG * sth - cth * temp) / (kHalfPole * (4.0 / 3.0 - kMassPole * cth * cth / total));
      const double xacc = temp - kMassPole * kHalfPole * thacc * cth / total;
      xd += xacc * kPhysDt;
      thd += thacc * kPhysDt;
      x += xd * kPhysDt;
      th += thd * kPhysDt;
      if (x > kTrack) {
        x = kTrack;
        xd = 0.0;
      } else if (x < -kTrack) {
        x = -kTrack;
        xd = 0.0;
      }
    }
    s = {x, xd, std::remainder(th, 2.0 * M_PI), thd};
  }

  double reward(const std::vector<double>& s) const override {
    return std::cos(s[2]) > 0.95 ? 1.0 : 0.0;
  }

  void render(const std::vector<double>& s, Frame& out) const override {
    // Pivot at mid-height so the pole stays in frame at every angle.
    const double n = out.width;
    const double cartx = (s[0] / kTrack) * 0.42 * n + n / 2.0;
    const double carty = 0.5 * n;
    draw_segment(out, cartx - n / 10.0, carty, cartx + n / 10.0, carty, n / 22.0, 0.5);
    const double rod = 0.38 * n;
    const double tipx = cartx + rod * std::sin(s[2]);
    const double tipy = carty - rod * std::cos(s[2]);
    draw_segment(out, cartx, carty, tipx, tipy, n / 32.0, 0.9);
    splat(out, tipx, tipy, n / 18.0, 1.0);
  }

  std::vector<double> observe(const std::vector<double>& s) const override {
    return {s[0], s[1], std::cos(s[2]), std::sin(s[2]), s[3]};
  }
};

class PointMassEnv final : public Env {
 public:
  // Damped 2-D point mass in the unit box reaching a per-episode goal.
  static constexpr double kForceScale = 5.0;
  static constexpr double kDamping = 1.0;
  static constexpr double kGoalRadius = 0.1;

  explicit PointMassEnv(DomainSpec spec) : Env(std::move(spec)) {}

 protected:
  std::vector<double> sample_init(Rng& rng) const override {
    return {rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), 0.0, 0.0,
            rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6)};
  }

  void integrate(std::vector<double>& s, const std::vector<double>& a) const override {
    double x = s[0], y = s[1], vx = s[2], vy = s[3];
    for (int i = 0; i < kSubsteps; ++i) {
      vx += (kForceScale * a[0] - kDamping * vx) * kPhysDt;
      vy += (kForceScale * a[1] - kDamping * vy) * kPhysDt;
      x += vx * kPhysDt;
      y += vy * kPhysDt;
      if (x > 1.0) {
        x = 1.0;
        vx = 0.0;
      } else if (x < -1.0) {
        x = -1.0;
        vx = 0.0;
      }
      if (y > 1.0) {
        y = 1.0;
        vy = 0.0;
      } else if (y < -1.0) {
        y = -1.0;
        vy = 0.0;
      }
    }
    s = {x, y, vx, vy, s[4], s[5]};
  }

  double reward(const std::vector<double>& s) const override {
    const double d = std::hypot(s[0] - s[4], s[1] - s[5]);
    return d < kGoalRadius ? 1.0 : -d;
  }

  void render(const std::vector<double>& s, Frame& out) const override {
    const double n = out.width;
    auto px = [n](double v) { return (v + 1.0) * 0.5 * (n - 1); };
    splat(out, px(s[4]), px(s[5]), n / 14.0, 0.45);  // goal, dimmer
    splat(out, px(s[0]), px(s[1]), n / 18.0, 1.0);   // agent
  }

  std::vector<double> observe(const std::vector<double>& s) const override { return s; }
};

}  // namespace

void Env::require_reset(const char* op) const {
  if (!live_) raise(Errc::NotReset, std::string(op) + " called before reset");
}

Frame Env::render_now() const {
  Frame f = Frame::blank(spec_.options.render_size, spec_.options.render_size, spec_.options.channels);
  render(phys_, f);
  return f;
}

void Env::push_frame(Frame f) {
  stack_.push_back(std::move(f));
  while (stack_.size() > spec_.options.frame_stack) stack_.pop_front();
  cached_stack_.frames.assign(stack_.begin(), stack_.end());
  cached_stack_.timestep = t_;
}

FrameStack Env::reset(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "env-init"));
  phys_ = sample_init(rng);
  t_ = 0;
  live_ = true;
  stack_.clear();
  Frame f = render_now();
  for (std::size_t i = 0; i + 1 < spec_.options.frame_stack; ++i) stack_.push_back(f);
  push_frame(std::move(f));
  return cached_stack_;
}

Transition Env::step(const std::vector<double>& action) {
  require_reset("step");
  if (action.size() != spec_.action_dim)
    raise(Errc::ShapeMismatch, "action dimension " + std::to_string(action.size()) + " != " +
                                   std::to_string(spec_.action_dim));
  for (double a : action)
    if (!(std::abs(a) <= 1.0 + 1e-9))
      raise(Errc::OutOfBounds, "action component " + std::to_string(a) + " outside [-1,1]");

  Transition tr;
  tr.state = cached_stack_;
  tr.action = action;
  for (std::uint32_t r = 0; r < spec_.options.action_repeat && t_ < spec_.options.episode_length;
       ++r) {
    integrate(phys_, action);
    ++t_;
    tr.reward += reward(phys_);
  }
  push_frame(render_now());
  tr.next_state = cached_stack_;
  tr.terminal = t_ >= spec_.options.episode_length;
  return tr;
}

std::vector<double> Env::ground_truth_state() const {
  require_reset("ground_truth_state");
  return observe(phys_);
}

const std::vector<double>& Env::internal_state() const {
  require_reset("internal_state");
  return phys_;
}

void Env::set_internal_state(const std::vector<double>& phys) {
  require_reset("set_internal_state");
  if (phys.size() != phys_.size()) raise(Errc::ShapeMismatch, "physical state size mismatch");
  phys_ = phys;
  stack_.clear();
  Frame f = render_now();
  for (std::size_t i = 0; i + 1 < spec_.options.frame_stack; ++i) stack_.push_back(f);
  push_frame(std::move(f));
}

const FrameStack& Env::current_stack() const {
  require_reset("current_stack");
  return cached_stack_;
}

std::vector<std::string> domain_names() { return {"pendulum", "cartpole", "pointmass"}; }

std::unique_ptr<Env> make_env(const std::string& name, const EnvOptions& options) {
  if (options.render_size < 16) raise(Errc::ConfigInvalid, "render size must be >= 16");
  if (options.channels != 1 && options.channels != 3)
    raise(Errc::ConfigInvalid, "channels must be 1 or 3");
  DomainSpec spec;
  spec.name = name;
  spec.options = options;
  if (name == "pendulum") {
    spec.state_dim = 3;
    spec.action_dim = 1;
    return std::make_unique<PendulumEnv>(std::move(spec));
  }
  if (name == "cartpole") {
    spec.state_dim = 5;
    spec.action_dim = 1;
    return std::make_unique<CartpoleEnv>(std::move(spec));
  }
  if (name == "pointmass") {
    spec.state_dim = 6;
    spec.action_dim = 2;
    return std::make_unique<PointMassEnv>(std::move(spec));
  }
  raise(Errc::UnknownDomain, "no domain named '" + name + "'");
}

nd::Tensor stack_to_tensor(const FrameStack& s) {
  std::vector<const FrameStack*> one{&s};
  nd::Tensor b = stacks_to_batch(one);
  return nd::Tensor({b.shape[1], b.shape[2], b.shape[3]}, std::move(b.data));
}

nd::Tensor stacks_to_batch(const std::vector<const FrameStack*>& stacks) {
  if (stacks.empty()) raise(Errc::EmptyBatch, "stacks_to_batch: no stacks");
  const FrameStack& first = *stacks[0];
  if (first.frames.empty()) raise(Errc::EmptyBatch, "stacks_to_batch: empty stack");
  const std::uint32_t h = first.frames[0].height, w = first.frames[0].width,
                      c = first.frames[0].channels;
  const std::size_t k = first.frames.size();
  nd::Tensor out({stacks.size(), k * c, h, w});
  double* dst = out.data.data();
  for (const FrameStack* sp : stacks) {
    if (sp->frames.size() != k) raise(Errc::ShapeMismatch, "stacks_to_batch: ragged stack sizes");
    for (const Frame& f : sp->frames) {
      if (f.height != h || f.width != w || f.channels != c)
        raise(Errc::ShapeMismatch, "stacks_to_batch: frame geometry mismatch");
      // interleaved u8 -> planar float chw
      for (std::uint32_t ch = 0; ch < c; ++ch)
        for (std::uint32_t y = 0; y < h; ++y)
          for (std::uint32_t x = 0; x < w; ++x)
            *dst++ = f.px[(static_cast<std::size_t>(y) * w + x) * c + ch] / 255.0;
    }
  }
  return out;
}

}  // namespace crpt::envs
