#include "crpt/protolearn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>

#include "crpt/checkpoint.hpp"
#include "crpt/error.hpp"
#include "crpt/metrics.hpp"
#include "crpt/sinkhorn.hpp"

namespace crpt::proto {

std::size_t Arch::conv_out_side() const {
  if (render < 16) raise(Errc::ConfigInvalid, "render size must be >= 16");
  std::size_t s = (render - 3) / 2 + 1;  // stride-2 first layer
  for (int i = 0; i < 3; ++i) s -= 2;    // three stride-1 3x3 layers
  return s;
}

std::size_t Arch::repr_dim() const { return conv_channels * conv_out_side() * conv_out_side(); }

void SslConfig::validate() const {
  if (!(tau > 0.0)) raise(Errc::ConfigInvalid, "softmax temperature must be positive");
  if (!(intrinsic_weight > 1.0)) raise(Errc::ConfigInvalid, "intrinsic weight must exceed 1");
  if (intrinsic_coef < 0.0) raise(Errc::ConfigInvalid, "intrinsic coefficient must be >= 0");
  if (!(ema_eta > 0.0 && ema_eta <= 1.0)) raise(Errc::ConfigInvalid, "EMA momentum must be in (0,1]");
  if (batch == 0) raise(Errc::ConfigInvalid, "batch size must be positive");
  if (!(lr > 0.0)) raise(Errc::ConfigInvalid, "learning rate must be positive");
  if (!(sinkhorn_epsilon > 0.0)) raise(Errc::ConfigInvalid, "sinkhorn epsilon must be positive");
  if (sinkhorn_iterations < 1) raise(Errc::ConfigInvalid, "sinkhorn iterations must be >= 1");
  if (stack_k == 0) raise(Errc::ConfigInvalid, "frame stack must be positive");
}

PrototypeBank::PrototypeBank(std::size_t count, std::size_t dim, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "prototypes"));
  nd::Tensor raw({count, dim});
  for (double& v : raw.data) v = rng.normal();
  params_.add("proto", std::move(raw));
  check();
}

PrototypeBank::PrototypeBank(nd::Tensor raw) {
  if (raw.ndim() != 2) raise(Errc::ShapeMismatch, "prototype bank expects a matrix");
  params_.add("proto", std::move(raw));
  check();
}

void PrototypeBank::check() const {
  const nd::Tensor& p = raw();
  if (p.rows() < 2) raise(Errc::TooFewPrototypes, "need at least 2 prototypes");
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < p.cols(); ++j) s += p.at(i, j) * p.at(i, j);
    if (std::sqrt(s) <= 1e-12)
      raise(Errc::ZeroNorm, "prototype " + std::to_string(i) + " has (near-)zero norm");
  }
}

namespace {

using Lookup = std::function<nd::NodePtr(const std::string&)>;

nd::NodePtr encoder_forward(const Lookup& look, const nd::Tensor& frames) {
  if (frames.ndim() != 4) raise(Errc::ShapeMismatch, "encoder expects {B,C,H,W} input");
  nd::NodePtr x = nd::constant(frames);
  x = nd::relu(nd::conv2d(x, look("enc.c1.w"), look("enc.c1.b"), 2));
  x = nd::relu(nd::conv2d(x, look("enc.c2.w"), look("enc.c2.b"), 1));
  x = nd::relu(nd::conv2d(x, look("enc.c3.w"), look("enc.c3.b"), 1));
  x = nd::relu(nd::conv2d(x, look("enc.c4.w"), look("enc.c4.b"), 1));
  return nd::flatten_rows(x);
}

nd::NodePtr projector_forward(const Lookup& look, const nd::NodePtr& y) {
  return nd::affine(y, look("proj.w"), look("proj.b"));
}

nd::NodePtr predictor_forward(const Lookup& look, const nd::NodePtr& z) {
  nd::NodePtr h = nd::relu(nd::affine(z, look("pred.w1"), look("pred.b1")));
  return nd::affine(h, look("pred.w2"), look("pred.b2"));
}

Lookup const_lookup(const nd::ParamSet& ps) {
  return [&ps](const std::string& name) { return nd::constant(ps.value(name)); };
}

Lookup bind_lookup(nd::ParamBind& bind) {
  return [&bind](const std::string& name) { return bind(name); };
}

nd::Tensor init_normal(Rng& rng, std::vector<std::size_t> shape, double stddev) {
  nd::Tensor t(std::move(shape));
  for (double& v : t.data) v = stddev * rng.normal();
  return t;
}

}  // namespace

EncoderStack::EncoderStack(Arch arch, std::uint64_t seed) : arch_(arch) {
  Rng rng(derive_seed(seed, "encoder-init"));
  const std::size_t c = arch.conv_channels;
  auto conv_std = [](std::size_t fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); };

  online_.add("enc.c1.w", init_normal(rng, {c, arch.in_channels, 3, 3}, conv_std(arch.in_channels * 9)));
  online_.add("enc.c1.b", nd::Tensor::zeros({c}));
  for (int l = 2; l <= 4; ++l) {
    online_.add("enc.c" + std::to_string(l) + ".w", init_normal(rng, {c, c, 3, 3}, conv_std(c * 9)));
    online_.add("enc.c" + std::to_string(l) + ".b", nd::Tensor::zeros({c}));
  }
  const std::size_t repr = arch.repr_dim();
  online_.add("proj.w", init_normal(rng, {arch.latent_dim, repr}, 1.0 / std::sqrt(static_cast<double>(repr))));
  online_.add("proj.b", nd::Tensor::zeros({arch.latent_dim}));

  predictor_.add("pred.w1", init_normal(rng, {arch.predictor_hidden, arch.latent_dim},
                                        conv_std(arch.latent_dim)));
  predictor_.add("pred.b1", nd::Tensor::zeros({arch.predictor_hidden}));
  predictor_.add("pred.w2", init_normal(rng, {arch.latent_dim, arch.predictor_hidden},
                                        1.0 / std::sqrt(static_cast<double>(arch.predictor_hidden))));
  predictor_.add("pred.b2", nd::Tensor::zeros({arch.latent_dim}));

  for (const std::string& name : online_.names()) target_.add(name, online_.value(name));
}

nd::NodePtr EncoderStack::project_node(nd::ParamBind& online_bind, const nd::Tensor& frames) const {
  Lookup look = bind_lookup(online_bind);
  return projector_forward(look, encoder_forward(look, frames));
}

nd::NodePtr EncoderStack::predict_node(nd::ParamBind& predictor_bind, nd::NodePtr z) const {
  return predictor_forward(bind_lookup(predictor_bind), z);
}

nd::Tensor EncoderStack::encode(const nd::Tensor& frames) const {
  return encoder_forward(const_lookup(online_), frames)->value;
}

nd::Tensor EncoderStack::project(const nd::Tensor& frames) const {
  Lookup look = const_lookup(online_);
  return projector_forward(look, encoder_forward(look, frames))->value;
}

nd::Tensor EncoderStack::project_from_repr(const nd::Tensor& y) const {
  return projector_forward(const_lookup(online_), nd::constant(y))->value;
}

nd::Tensor EncoderStack::project_target(const nd::Tensor& frames) const {
  Lookup look = const_lookup(target_);
  return projector_forward(look, encoder_forward(look, frames))->value;
}

void EncoderStack::ema_update_targets(double eta) {
  // Targets mirror the encoder+projector name set exactly.
  nd::ema_update(target_, online_, eta);
}

void EncoderStack::copy_online_to_targets() {
  for (const std::string& name : target_.names()) target_.value(name) = online_.value(name);
}

nd::Tensor augment_shift(const nd::Tensor& batch, std::size_t pad, Rng& rng) {
  if (batch.ndim() != 4) raise(Errc::ShapeMismatch, "augment_shift expects {B,C,H,W}");
  const std::size_t B = batch.shape[0], C = batch.shape[1], H = batch.shape[2], W = batch.shape[3];
  if (pad >= H || pad >= W) raise(Errc::PadTooLarge, "shift pad must be smaller than the image");
  if (pad == 0) return batch;
  nd::Tensor out(batch.shape);
  const int p = static_cast<int>(pad);
  for (std::size_t b = 0; b < B; ++b) {
    const int dy = static_cast<int>(rng.uniform_index(2 * pad + 1)) - p;
    const int dx = static_cast<int>(rng.uniform_index(2 * pad + 1)) - p;
    for (std::size_t c = 0; c < C; ++c) {
      const double* src = batch.data.data() + (b * C + c) * H * W;
      double* dst = out.data.data() + (b * C + c) * H * W;
      for (std::size_t y = 0; y < H; ++y) {
        const int sy = std::clamp(static_cast<int>(y) + dy, 0, static_cast<int>(H) - 1);
        for (std::size_t x = 0; x < W; ++x) {
          const int sx = std::clamp(static_cast<int>(x) + dx, 0, static_cast<int>(W) - 1);
          dst[y * W + x] = src[static_cast<std::size_t>(sy) * W + sx];
        }
      }
    }
  }
  return out;
}

nd::Tensor augment_shift(const nd::Tensor& batch, std::size_t pad, std::uint64_t seed) {
  Rng rng(seed);
  return augment_shift(batch, pad, rng);
}

nd::NodePtr assign_probs_node(const nd::NodePtr& u, const nd::NodePtr& prototypes_raw, double tau) {
  if (!(tau > 0.0)) raise(Errc::ConfigInvalid, "temperature must be positive");
  nd::NodePtr u_hat = nd::l2norm_rows(u);
  nd::NodePtr c_hat = nd::l2norm_rows(prototypes_raw);
  return nd::softmax_rows(nd::scale(nd::matmul_nt(u_hat, c_hat), 1.0 / tau));
}

nd::Tensor assign_probs(const nd::Tensor& u, const PrototypeBank& bank, double tau) {
  nd::Tensor u2 = u.ndim() == 1 ? nd::Tensor({1, u.numel()}, u.data) : u;
  nd::NodePtr p = assign_probs_node(nd::constant(u2), nd::constant(bank.raw()), tau);
  if (u.ndim() == 1) return nd::Tensor({bank.count()}, p->value.data);
  return p->value;
}

nd::NodePtr comparative_loss_node(const nd::NodePtr& p, const nd::Tensor& q, double prob_floor) {
  if (!p->value.same_shape(q))
    raise(Errc::ShapeMismatch, "comparative loss: probabilities vs targets");
  const double inv_rows = 1.0 / static_cast<double>(p->value.rows());
  nd::NodePtr logp = nd::log_op(nd::clamp_min(p, prob_floor));
  return nd::scale(nd::sum(nd::mul(nd::constant(q), logp)), -inv_rows);
}

double comparative_loss(const nd::Tensor& p, const nd::Tensor& q, double prob_floor) {
  nd::NodePtr loss = comparative_loss_node(nd::constant(p), q, prob_floor);
  loss->value.require_finite("comparative loss");
  return loss->value.item();
}

namespace {
// Off-diagonal weights 1/(c_j.c_k + w) from the detached cosine values.
nd::Tensor intrinsic_weights(const nd::Tensor& c_hat_values, double w) {
  const std::size_t m = c_hat_values.rows();
  nd::Tensor cos = nd::matmul_nt(c_hat_values, c_hat_values);
  nd::Tensor weights({m, m});
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < m; ++k) {
      if (j == k) continue;
      const double denom = cos.at(j, k) + w;
      if (std::abs(denom) < 1e-6)
        raise(Errc::DegenerateDenominator, "cosine + w vanished for a prototype pair");
      weights.at(j, k) = 1.0 / denom;
    }
  return weights;
}
}  // namespace

nd::NodePtr intrinsic_loss_node(const nd::NodePtr& prototypes_raw, double w) {
  if (!(w > 1.0)) raise(Errc::ConfigInvalid, "intrinsic weight must exceed 1");
  if (prototypes_raw->value.rows() < 2)
    raise(Errc::TooFewPrototypes, "intrinsic loss needs at least 2 prototypes");
  nd::NodePtr c_hat = nd::l2norm_rows(prototypes_raw);
  nd::NodePtr c_det = nd::detach(c_hat);
  // S_jk = det(c_j)^T c_k: the (j,k) term reaches only prototype k.
  nd::NodePtr s = nd::matmul_nt(c_det, c_hat);
  nd::Tensor weights = intrinsic_weights(c_hat->value, w);
  return nd::sum(nd::mul(s, nd::constant(std::move(weights))));
}

double intrinsic_loss(const PrototypeBank& bank, double w) {
  return intrinsic_loss_node(nd::constant(bank.raw()), w)->value.item();
}

std::size_t choose_buffer(std::uint64_t step_index, std::size_t buffer_count) {
  if (buffer_count == 0) raise(Errc::InsufficientData, "no buffers to choose from");
  return static_cast<std::size_t>(step_index % buffer_count);
}

SslLearner::SslLearner(Arch arch, SslConfig config, std::uint64_t seed)
    : arch_(arch),
      config_(config),
      stack_(arch, seed),
      bank_(arch.prototypes, arch.latent_dim, seed),
      optimizer_(nd::AdamConfig{config.lr}) {
  config_.validate();
}

SslLearner::SslLearner(Arch arch, SslConfig config, EncoderStack stack, PrototypeBank bank)
    : arch_(arch),
      config_(config),
      stack_(std::move(stack)),
      bank_(std::move(bank)),
      optimizer_(nd::AdamConfig{config.lr}) {
  config_.validate();
}

StepRow SslLearner::train_step(const std::vector<const collect::DomainBuffer*>& buffers,
                               std::size_t buffer_index, Rng& rng, bool with_coverage) {
  const collect::DomainBuffer& buf = *buffers.at(buffer_index);
  collect::PairBatch pairs = collect::sample_pairs(buf, config_.batch, config_.stack_k, rng.next_u64());
  if (pairs.current.shape[1] != arch_.in_channels)
    raise(Errc::ShapeMismatch, "buffer channel count does not match the encoder input");

  nd::Tensor cur = augment_shift(pairs.current, config_.shift_pad, rng);
  nd::Tensor nxt = augment_shift(pairs.next, config_.shift_pad, rng);

  // Assignment targets from the EMA target path; constants to the tape.
  nd::Tensor z_target_hat = nd::l2_normalize_rows(stack_.project_target(nxt));
  nd::Tensor scores = nd::matmul_nt(z_target_hat, bank_.normalized());
  nd::Tensor targets =
      sinkhorn::assignment_targets(scores, config_.sinkhorn_iterations, config_.sinkhorn_epsilon);
  nd::Tensor q = config_.renorm_targets ? sinkhorn::renormalize_rows(targets) : targets;

  stack_.online().zero_grad();
  stack_.predictor().zero_grad();
  bank_.params().zero_grad();

  nd::ParamBind bind_online(stack_.online());
  nd::ParamBind bind_pred(stack_.predictor());
  nd::ParamBind bind_proto(bank_.params());

  nd::NodePtr z = stack_.project_node(bind_online, cur);
  nd::NodePtr u = stack_.predict_node(bind_pred, z);
  nd::NodePtr proto = bind_proto("proto");
  nd::NodePtr p = assign_probs_node(u, proto, config_.tau);
  nd::NodePtr l_comp = comparative_loss_node(p, q, config_.prob_floor);
  nd::NodePtr l_intr = intrinsic_loss_node(proto, config_.intrinsic_weight);
  nd::NodePtr l_ssl = nd::add(l_comp, nd::scale(l_intr, config_.intrinsic_coef));
  l_ssl->value.require_finite("ssl loss");

  nd::backward(l_ssl);
  bind_online.flush_grads();
  bind_pred.flush_grads();
  bind_proto.flush_grads();
  optimizer_.step({&stack_.online(), &stack_.predictor(), &bank_.params()});
  stack_.ema_update_targets(config_.ema_eta);
  ++total_updates_;

  StepRow row;
  row.l_comp = l_comp->value.item();
  row.l_intr = l_intr->value.item();
  row.l_ssl = l_ssl->value.item();
  row.buffer_index = buffer_index;
  if (with_coverage) {
    metrics::CoverageReport cov = metrics::coverage(bank_, 3);
    row.ane = cov.ane;
    row.kne = cov.kne;
    row.has_coverage = true;
  }
  return row;
}

namespace {
std::vector<StepRow> run_updates(SslLearner& learner,
                                 const std::vector<const collect::DomainBuffer*>& buffers,
                                 std::uint64_t steps, std::uint64_t seed) {
  learner.config().validate();
  if (buffers.empty()) raise(Errc::InsufficientData, "no buffers supplied");
  for (const auto* b : buffers)
    if (b->valid_pair_indices().size() < learner.config().batch)
      raise(Errc::InsufficientData,
            "buffer '" + b->domain + "' holds fewer valid pairs than the batch size");

  Rng rng(derive_seed(seed, "ssl-loop"));
  std::vector<StepRow> rows;
  rows.reserve(steps);
  const std::uint64_t every = learner.config().metrics_every;
  for (std::uint64_t step = 0; step < steps; ++step) {
    const std::size_t bi = choose_buffer(step, buffers.size());
    const bool cov = (every != 0 && step % every == 0) || step + 1 == steps;
    StepRow row = learner.train_step(buffers, bi, rng, cov);
    row.step = step;
    rows.push_back(row);
  }
  return rows;
}
}  // namespace

std::vector<StepRow> pretrain(SslLearner& learner,
                              const std::vector<const collect::DomainBuffer*>& buffers,
                              std::uint64_t seed) {
  return run_updates(learner, buffers, learner.config().pretrain_steps, seed);
}

std::vector<StepRow> finetune(SslLearner& learner, const collect::DomainBuffer& buffer,
                              std::uint64_t seed) {
  return run_updates(learner, {&buffer}, learner.config().finetune_steps, seed);
}

void SslLearner::save(const std::string& path) const {
  std::vector<std::pair<std::string, nd::Tensor>> entries;
  nd::Tensor meta({7});
  meta.data = {static_cast<double>(arch_.render),          static_cast<double>(arch_.in_channels),
               static_cast<double>(arch_.conv_channels),   static_cast<double>(arch_.latent_dim),
               static_cast<double>(arch_.predictor_hidden), static_cast<double>(arch_.prototypes),
               static_cast<double>(total_updates_)};
  entries.emplace_back("meta", std::move(meta));
  for (const std::string& n : stack_.online().names())
    entries.emplace_back("online/" + n, stack_.online().value(n));
  for (const std::string& n : stack_.predictor().names())
    entries.emplace_back("predictor/" + n, stack_.predictor().value(n));
  for (const std::string& n : stack_.target().names())
    entries.emplace_back("target/" + n, stack_.target().value(n));
  entries.emplace_back("proto", bank_.raw());
  nd::save_tensors(path, entries);
}

SslLearner SslLearner::load(const std::string& path, SslConfig config) {
  auto entries = nd::load_tensors(path);
  auto need = [&](const std::string& name) -> const nd::Tensor& {
    auto it = entries.find(name);
    if (it == entries.end()) raise(Errc::BadMagic, "checkpoint lacks entry '" + name + "'");
    return it->second;
  };
  const nd::Tensor& meta = need("meta");
  if (meta.numel() != 7) raise(Errc::VersionMismatch, "unexpected meta layout");
  Arch arch;
  arch.render = static_cast<std::size_t>(meta.data[0]);
  arch.in_channels = static_cast<std::size_t>(meta.data[1]);
  arch.conv_channels = static_cast<std::size_t>(meta.data[2]);
  arch.latent_dim = static_cast<std::size_t>(meta.data[3]);
  arch.predictor_hidden = static_cast<std::size_t>(meta.data[4]);
  arch.prototypes = static_cast<std::size_t>(meta.data[5]);

  EncoderStack stack(arch, 0);
  auto fill = [&](nd::ParamSet& ps, const std::string& prefix) {
    for (const std::string& n : ps.names()) {
      const nd::Tensor& t = need(prefix + n);
      if (!t.same_shape(ps.value(n)))
        raise(Errc::ShapeMismatch, "checkpoint entry '" + prefix + n + "' has the wrong shape");
      ps.value(n) = t;
    }
  };
  fill(stack.online(), "online/");
  fill(stack.predictor(), "predictor/");
  fill(stack.target(), "target/");
  PrototypeBank bank(need("proto"));

  SslLearner learner(arch, config, std::move(stack), std::move(bank));
  learner.total_updates_ = static_cast<std::uint64_t>(meta.data[6]);
  return learner;
}

void write_metrics_csv(const std::string& path, const std::vector<StepRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) raise(Errc::IoError, "cannot open '" + path + "' for writing");
  os << "step,l_comp,l_intr,l_ssl,ane,kne,buffer_index\n";
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };
  for (const StepRow& r : rows) {
    os << r.step << ',' << num(r.l_comp) << ',' << num(r.l_intr) << ',' << num(r.l_ssl) << ',';
    if (r.has_coverage) os << num(r.ane) << ',' << num(r.kne);
    else os << ',';
    os << ',' << r.buffer_index << '\n';
  }
  if (!os) raise(Errc::IoError, "write failure on '" + path + "'");
}

}  // namespace crpt::proto
