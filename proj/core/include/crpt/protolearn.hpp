#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crpt/collect.hpp"
#include "crpt/params.hpp"
#include "crpt/rng.hpp"
#include "crpt/tensor.hpp"

namespace crpt::proto {

// Network geometry. Four 3x3 convolutions with strides (2,1,1,1) and ReLU,
// flattened, projected to the latent space; the predictor is a two-layer MLP
// that preserves the latent dimension.
struct Arch {
  std::size_t render = 32;
  std::size_t in_channels = 3;  // frame_stack * frame channels
  std::size_t conv_channels = 8;
  std::size_t latent_dim = 32;
  std::size_t predictor_hidden = 64;
  std::size_t prototypes = 64;

  std::size_t conv_out_side() const;
  std::size_t repr_dim() const;  // conv_channels * conv_out_side()^2
  bool operator==(const Arch&) const = default;
};

struct SslConfig {
  double tau = 0.1;               // softmax temperature
  double intrinsic_weight = 1.5;  // w, must exceed 1
  double intrinsic_coef = 5e-3;   // alpha
  double ema_eta = 0.05;
  std::size_t batch = 64;
  std::uint64_t pretrain_steps = 2000;
  std::uint64_t finetune_steps = 500;
  double lr = 3e-4;
  std::size_t shift_pad = 4;
  bool renorm_targets = true;
  double sinkhorn_epsilon = 0.05;
  int sinkhorn_iterations = 3;
  std::size_t stack_k = 3;
  std::uint64_t metrics_every = 25;
  double prob_floor = 1e-12;

  void validate() const;  // ConfigInvalid on violated constraints
};

// M trainable latent vectors used as cluster centers, held in a ParamSet so
// the optimizer and the tape can reach them.
class PrototypeBank {
 public:
  PrototypeBank(std::size_t count, std::size_t dim, std::uint64_t seed);
  explicit PrototypeBank(nd::Tensor raw);

  std::size_t count() const { return params_.value("proto").rows(); }
  std::size_t dim() const { return params_.value("proto").cols(); }
  const nd::Tensor& raw() const { return params_.value("proto"); }
  nd::Tensor& raw() { return params_.value("proto"); }
  nd::Tensor normalized() const { return nd::l2_normalize_rows(raw()); }

  nd::ParamSet& params() { return params_; }
  const nd::ParamSet& params() const { return params_; }

 private:
  nd::ParamSet params_;
  void check() const;
};

// Online encoder f, projector g, predictor v, and EMA targets of f and g.
// The target parameter set mirrors the online encoder+projector names, so
// the plain ema_update applies verbatim.
class EncoderStack {
 public:
  EncoderStack(Arch arch, std::uint64_t seed);

  const Arch& arch() const { return arch_; }
  nd::ParamSet& online() { return online_; }          // enc.* and proj.*
  const nd::ParamSet& online() const { return online_; }
  nd::ParamSet& predictor() { return predictor_; }    // pred.*
  const nd::ParamSet& predictor() const { return predictor_; }
  nd::ParamSet& target() { return target_; }
  const nd::ParamSet& target() const { return target_; }

  // Tape-building paths (training).
  nd::NodePtr project_node(nd::ParamBind& online_bind, const nd::Tensor& frames) const;
  nd::NodePtr predict_node(nd::ParamBind& predictor_bind, nd::NodePtr z) const;

  // Forward-only paths.
  nd::Tensor encode(const nd::Tensor& frames) const;          // y = f(x)
  nd::Tensor project(const nd::Tensor& frames) const;         // z = g(f(x))
  nd::Tensor project_from_repr(const nd::Tensor& y) const;    // z = g(y)
  nd::Tensor project_target(const nd::Tensor& frames) const;  // no gradient ever

  void ema_update_targets(double eta);
  void copy_online_to_targets();

 private:
  Arch arch_;
  nd::ParamSet online_, predictor_, target_;
};

// Random pad-and-crop shift; every output pixel comes from the edge-padded
// source within a +-pad window of its position. One shift per batch item,
// shared across its channels. PadTooLarge if pad >= render size.
nd::Tensor augment_shift(const nd::Tensor& batch, std::size_t pad, Rng& rng);
nd::Tensor augment_shift(const nd::Tensor& batch, std::size_t pad, std::uint64_t seed);

// Softmax over dot products of the normalized query with the normalized
// prototypes at temperature tau.
nd::Tensor assign_probs(const nd::Tensor& u, const PrototypeBank& bank, double tau);
nd::NodePtr assign_probs_node(const nd::NodePtr& u, const nd::NodePtr& prototypes_raw,
                              double tau);

// Cross entropy of probability rows against target rows q.
double comparative_loss(const nd::Tensor& p, const nd::Tensor& q, double prob_floor = 1e-12);
nd::NodePtr comparative_loss_node(const nd::NodePtr& p, const nd::Tensor& q,
                                  double prob_floor = 1e-12);

// Prototype-diffusion loss: sum over ordered pairs j != k of
//   det(c_j_hat)^T c_k_hat / (det(c_j_hat^T c_k_hat) + w)
// where det(.) blocks gradients. The (j,k) term contributes no gradient to
// the raw prototype j; the denominator is a detached scalar.
double intrinsic_loss(const PrototypeBank& bank, double w);
nd::NodePtr intrinsic_loss_node(const nd::NodePtr& prototypes_raw, double w);

// Cross-domain schedule: cycles through N buffers.
std::size_t choose_buffer(std::uint64_t step_index, std::size_t buffer_count);

struct StepRow {
  std::uint64_t step = 0;
  double l_comp = 0.0, l_intr = 0.0, l_ssl = 0.0;
  double ane = 0.0, kne = 0.0;
  bool has_coverage = false;
  std::size_t buffer_index = 0;
};

// Learner state for the pre-training and finetuning loops.
class SslLearner {
 public:
  SslLearner(Arch arch, SslConfig config, std::uint64_t seed);

  EncoderStack& stack() { return stack_; }
  const EncoderStack& stack() const { return stack_; }
  PrototypeBank& bank() { return bank_; }
  const PrototypeBank& bank() const { return bank_; }
  const SslConfig& config() const { return config_; }
  std::uint64_t total_updates() const { return total_updates_; }

  // One SSL update against the chosen buffer.
  StepRow train_step(const std::vector<const collect::DomainBuffer*>& buffers,
                     std::size_t buffer_index, Rng& rng, bool with_coverage);

  void save(const std::string& path) const;
  static SslLearner load(const std::string& path, SslConfig config);

 private:
  SslLearner(Arch arch, SslConfig config, EncoderStack stack, PrototypeBank bank);
  Arch arch_;
  SslConfig config_;
  EncoderStack stack_;
  PrototypeBank bank_;
  nd::Adam optimizer_;
  std::uint64_t total_updates_ = 0;
};

// Runs config.pretrain_steps updates, cycling buffers per choose_buffer.
// InsufficientData unless every buffer holds >= batch valid pairs.
std::vector<StepRow> pretrain(SslLearner& learner,
                              const std::vector<const collect::DomainBuffer*>& buffers,
                              std::uint64_t seed);

// Identical update rule drawing from a single buffer for config.finetune_steps.
std::vector<StepRow> finetune(SslLearner& learner, const collect::DomainBuffer& buffer,
                              std::uint64_t seed);

void write_metrics_csv(const std::string& path, const std::vector<StepRow>& rows);

}  // namespace crpt::proto
