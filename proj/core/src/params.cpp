#include "crpt/params.hpp"

#include <cmath>

namespace crpt::nd {

ParamSet::Entry& ParamSet::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) raise(Errc::ShapeMismatch, "unknown parameter '" + name + "'");
  return it->second;
}

const ParamSet::Entry& ParamSet::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) raise(Errc::ShapeMismatch, "unknown parameter '" + name + "'");
  return it->second;
}

void ParamSet::add(const std::string& name, Tensor init) {
  if (entries_.count(name)) raise(Errc::ShapeMismatch, "duplicate parameter '" + name + "'");
  Entry e;
  e.grad = Tensor::zeros(init.shape);
  e.value = std::move(init);
  entries_.emplace(name, std::move(e));
  order_.push_back(name);
}

bool ParamSet::has(const std::string& name) const { return entries_.count(name) != 0; }

Tensor& ParamSet::value(const std::string& name) { return at(name).value; }
const Tensor& ParamSet::value(const std::string& name) const { return at(name).value; }
Tensor& ParamSet::grad(const std::string& name) { return at(name).grad; }
const Tensor& ParamSet::grad(const std::string& name) const { return at(name).grad; }

void ParamSet::zero_grad() {
  for (auto& [_, e] : entries_) e.grad.fill(0.0);
}

NodePtr ParamBind::operator()(const std::string& name) {
  for (auto& [n, node] : bound_)
    if (n == name) return node;
  NodePtr node = leaf(ps_.value(name));
  bound_.emplace_back(name, node);
  return node;
}

void ParamBind::flush_grads() {
  for (auto& [name, node] : bound_) {
    if (node->grad.numel() == 0) continue;  // no backward pass reached it
    Tensor& g = ps_.grad(name);
    for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += node->grad.data[i];
  }
}

void ema_update(ParamSet& target, const ParamSet& online, double eta) {
  if (target.size() != online.size())
    raise(Errc::ShapeMismatch, "ema_update: parameter sets differ in size");
  for (const std::string& name : target.names()) {
    if (!online.has(name)) raise(Errc::ShapeMismatch, "ema_update: online set lacks '" + name + "'");
    Tensor& t = target.value(name);
    const Tensor& o = online.value(name);
    if (!t.same_shape(o)) raise(Errc::ShapeMismatch, "ema_update: shape mismatch for '" + name + "'");
    for (std::size_t i = 0; i < t.numel(); ++i) t.data[i] = (1.0 - eta) * t.data[i] + eta * o.data[i];
  }
}

void Adam::step(const std::vector<ParamSet*>& sets) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (ParamSet* psp : sets) {
    ParamSet& ps = *psp;
    for (const std::string& name : ps.names()) {
      Tensor& p = ps.value(name);
      const Tensor& g = ps.grad(name);
      g.require_finite("gradient of '" + name + "'");
      auto mit = m_.find(name);
      if (mit == m_.end()) {
        mit = m_.emplace(name, Tensor::zeros(p.shape)).first;
        v_.emplace(name, Tensor::zeros(p.shape));
      }
      Tensor& m = mit->second;
      Tensor& v = v_[name];
      if (!m.same_shape(p))
        raise(Errc::ShapeMismatch, "optimizer state shape drift for '" + name + "'");
      for (std::size_t i = 0; i < p.numel(); ++i) {
        m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * g.data[i];
        v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * g.data[i] * g.data[i];
        const double mhat = m.data[i] / bc1;
        const double vhat = v.data[i] / bc2;
        p.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
    ++ps.step;
  }
}

double grad_check(const ScalarFn& fn, ParamSet& params, double eps) {
  params.zero_grad();
  ParamBind bind(params);
  NodePtr root = fn(bind);
  if (!std::isfinite(root->value.item())) raise(Errc::NonFinite, "grad_check: forward value");
  backward(root);
  bind.flush_grads();

  // Snapshot analytic gradients, then probe each coordinate.
  std::map<std::string, Tensor> analytic;
  for (const std::string& name : params.names()) analytic.emplace(name, params.grad(name));

  auto eval = [&]() {
    ParamBind b(params);
    const double v = fn(b)->value.item();
    if (!std::isfinite(v)) raise(Errc::NonFinite, "grad_check: perturbed evaluation");
    return v;
  };

  double worst = 0.0;
  for (const std::string& name : params.names()) {
    Tensor& p = params.value(name);
    const Tensor& a = analytic.at(name);
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double keep = p.data[i];
      p.data[i] = keep + eps;
      const double fp = eval();
      p.data[i] = keep - eps;
      const double fm = eval();
      p.data[i] = keep;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double err = std::abs(a.data[i] - numeric) / std::max(1.0, std::abs(a.data[i]));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace crpt::nd
