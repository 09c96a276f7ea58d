#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "crpt/autodiff.hpp"
#include "crpt/tensor.hpp"

namespace crpt::nd {

// Named parameter tensors with paired gradient tensors and a step counter.
// Names are unique; a parameter's gradient always has the parameter's shape.
class ParamSet {
 public:
  void add(const std::string& name, Tensor init);
  bool has(const std::string& name) const;

  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);
  const Tensor& grad(const std::string& name) const;

  void zero_grad();
  std::size_t size() const { return order_.size(); }
  // Names in insertion order (deterministic iteration everywhere).
  const std::vector<std::string>& names() const { return order_; }

  std::uint64_t step = 0;

 private:
  struct Entry {
    Tensor value;
    Tensor grad;
  };
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;
};

// Hands out tape leaves for parameters and pushes gradients back after the
// reverse pass. One binder per forward/backward round.
class ParamBind {
 public:
  explicit ParamBind(ParamSet& ps) : ps_(ps) {}
  NodePtr operator()(const std::string& name);
  void flush_grads();

 private:
  ParamSet& ps_;
  std::vector<std::pair<std::string, NodePtr>> bound_;
};

// target <- (1 - eta) * target + eta * online, elementwise over all entries.
// ShapeMismatch if the name sets or any shapes differ.
void ema_update(ParamSet& target, const ParamSet& online, double eta);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with no weight decay. Moment accumulators are created on first use
// and always match the parameter shapes.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}
  void step(ParamSet& ps) { step(std::vector<ParamSet*>{&ps}); }
  // One optimizer step over several disjoint parameter sets (shared bias
  // correction counter).
  void step(const std::vector<ParamSet*>& sets);
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::map<std::string, Tensor> m_, v_;
  std::uint64_t t_ = 0;
};

// Builds a scalar tape from bound parameters.
using ScalarFn = std::function<NodePtr(ParamBind&)>;

// Max over all parameter coordinates of
//   |analytic - central difference| / max(1, |analytic|).
// NonFinite if any evaluation is non-finite.
double grad_check(const ScalarFn& fn, ParamSet& params, double eps);

}  // namespace crpt::nd
