// Command-line front end: the four pipeline phases as standalone subcommands
// plus diagnostics and the full orchestrated pipeline.
//
// Exit codes: 0 success, 1 configuration/validation error, 2 runtime error.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "crpt/collect.hpp"
#include "crpt/config.hpp"
#include "crpt/error.hpp"
#include "crpt/metrics.hpp"
#include "crpt/pipeline.hpp"
#include "crpt/protolearn.hpp"
#include "crpt/rlagent.hpp"
#include "crpt/rng.hpp"

using namespace crpt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(Errc::IoError, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Loads and validates a config file ('' = defaults); prints every issue.
config::RunConfig load_config(const std::string& path) {
  const std::string text = path.empty() ? "" : read_file(path);
  config::ParseResult parsed = config::parse_config(text);
  if (!parsed.ok()) {
    for (const auto& issue : parsed.issues)
      std::cerr << "config error: " << issue.field << ": " << issue.message << "\n";
    raise(Errc::ConfigInvalid, std::to_string(parsed.issues.size()) + " config issue(s)");
  }
  return parsed.config;
}

std::vector<const collect::DomainBuffer*> pointers(const std::vector<collect::DomainBuffer>& v) {
  std::vector<const collect::DomainBuffer*> out;
  out.reserve(v.size());
  for (const auto& b : v) out.push_back(&b);
  return out;
}

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 1;
};

int run(int argc, char** argv) {
  CLI::App app{"cross-domain random pre-training with prototypes"};
  app.require_subcommand(1);

  // ---- collect ----------------------------------------------------------
  auto* collect_cmd = app.add_subcommand("collect", "fill one domain buffer with random rollouts");
  std::string collect_domain, collect_out;
  std::uint64_t collect_steps = 0;
  CommonOpts collect_opts;
  collect_cmd->add_option("--domain", collect_domain, "domain name")->required();
  collect_cmd->add_option("--steps", collect_steps, "environment steps to record")->required();
  collect_cmd->add_option("--seed", collect_opts.seed, "collection seed");
  collect_cmd->add_option("--out", collect_out, "output buffer file")->required();
  collect_cmd->add_option("--config", collect_opts.config_path, "config file");

  // ---- pretrain ---------------------------------------------------------
  auto* pretrain_cmd = app.add_subcommand("pretrain", "prototypical pre-training over buffers");
  std::vector<std::string> pretrain_buffers;
  std::string pretrain_out, pretrain_csv;
  std::optional<std::uint64_t> pretrain_steps;
  CommonOpts pretrain_opts;
  pretrain_cmd->add_option("--buffers", pretrain_buffers, "buffer files, cycled in order")
      ->required()
      ->delimiter(',');
  pretrain_cmd->add_option("--out", pretrain_out, "encoder checkpoint to write")->required();
  pretrain_cmd->add_option("--metrics-csv", pretrain_csv, "per-step loss CSV");
  pretrain_cmd->add_option("--steps", pretrain_steps, "update count (overrides config)");
  pretrain_cmd->add_option("--seed", pretrain_opts.seed, "training seed");
  pretrain_cmd->add_option("--config", pretrain_opts.config_path, "config file");

  // ---- finetune ---------------------------------------------------------
  auto* finetune_cmd = app.add_subcommand("finetune", "single-domain finetuning of an encoder");
  std::string finetune_encoder, finetune_buffer, finetune_out, finetune_csv;
  std::optional<std::uint64_t> finetune_steps;
  CommonOpts finetune_opts;
  finetune_cmd->add_option("--encoder", finetune_encoder, "pre-trained checkpoint")->required();
  finetune_cmd->add_option("--buffer", finetune_buffer, "target-domain buffer")->required();
  finetune_cmd->add_option("--out", finetune_out, "finetuned checkpoint to write")->required();
  finetune_cmd->add_option("--metrics-csv", finetune_csv, "per-step loss CSV");
  finetune_cmd->add_option("--steps", finetune_steps, "update count (overrides config)");
  finetune_cmd->add_option("--seed", finetune_opts.seed, "training seed");
  finetune_cmd->add_option("--config", finetune_opts.config_path, "config file");

  // ---- train ------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "downstream RL on a frozen encoder");
  std::string train_domain, train_encoder, train_eval_csv, train_policy_out;
  std::optional<std::uint64_t> train_steps;
  CommonOpts train_opts;
  train_cmd->add_option("--domain", train_domain, "domain name")->required();
  train_cmd->add_option("--encoder", train_encoder, "frozen encoder checkpoint")->required();
  train_cmd->add_option("--steps", train_steps, "environment steps (overrides config)");
  train_cmd->add_option("--seed", train_opts.seed, "training seed");
  train_cmd->add_option("--eval-csv", train_eval_csv, "evaluation log CSV");
  train_cmd->add_option("--policy-out", train_policy_out, "policy checkpoint to write");
  train_cmd->add_option("--config", train_opts.config_path, "config file");

  // ---- metrics ----------------------------------------------------------
  auto* metrics_cmd = app.add_subcommand("metrics", "diagnostics over checkpoints and buffers");
  metrics_cmd->require_subcommand(1);

  auto* coverage_cmd = metrics_cmd->add_subcommand("coverage", "prototype coverage (ANE/KNE)");
  std::string coverage_ckpt, coverage_out = "coverage.csv";
  int coverage_k = 3;
  std::string coverage_config;
  coverage_cmd->add_option("--ckpt", coverage_ckpt, "encoder checkpoint")->required();
  coverage_cmd->add_option("--k", coverage_k, "neighbor count");
  coverage_cmd->add_option("--out", coverage_out, "output CSV");
  coverage_cmd->add_option("--config", coverage_config, "config file");

  auto* pca_cmd = metrics_cmd->add_subcommand("pca", "PCA scatter of encoded buffers");
  std::vector<std::string> pca_buffers;
  std::string pca_ckpt, pca_out = "pca.csv", pca_config;
  std::size_t pca_components = 4, pca_frames = 125;
  pca_cmd->add_option("--buffers", pca_buffers, "buffer files")->required()->delimiter(',');
  pca_cmd->add_option("--ckpt", pca_ckpt, "encoder checkpoint")->required();
  pca_cmd->add_option("--components", pca_components, "principal components");
  pca_cmd->add_option("--frames-per-domain", pca_frames, "frames sampled per buffer");
  pca_cmd->add_option("--out", pca_out, "output CSV");
  pca_cmd->add_option("--config", pca_config, "config file");

  // ---- pipeline ---------------------------------------------------------
  auto* pipeline_cmd = app.add_subcommand("pipeline", "run the configured phases end to end");
  std::string pipeline_config, pipeline_manifest, pipeline_out = "runs";
  pipeline_cmd->add_option("--config", pipeline_config, "config file");
  pipeline_cmd->add_option("--from-manifest", pipeline_manifest, "re-run a recorded manifest");
  pipeline_cmd->add_option("--out", pipeline_out, "output root directory");

  CLI11_PARSE(app, argc, argv);

  if (collect_cmd->parsed()) {
    config::RunConfig cfg = load_config(collect_opts.config_path);
    collect::DomainBuffer buf = collect::collect_random(
        collect_domain, cfg.env_options(), collect_steps, cfg.buffer_capacity, collect_opts.seed);
    collect::save_buffer(buf, collect_out);
    std::printf("collected %zu frames from %s into %s\n", buf.count(), collect_domain.c_str(),
                collect_out.c_str());
    return kExitOk;
  }

  if (pretrain_cmd->parsed()) {
    config::RunConfig cfg = load_config(pretrain_opts.config_path);
    proto::SslConfig ssl = cfg.ssl();
    if (pretrain_steps) ssl.pretrain_steps = *pretrain_steps;
    std::vector<collect::DomainBuffer> buffers;
    for (const auto& path : pretrain_buffers) buffers.push_back(collect::load_buffer(path));
    proto::SslLearner learner(cfg.arch(), ssl, derive_seed(pretrain_opts.seed, "ssl-init"));
    auto rows = proto::pretrain(learner, pointers(buffers), derive_seed(pretrain_opts.seed, "ssl"));
    learner.save(pretrain_out);
    if (!pretrain_csv.empty()) proto::write_metrics_csv(pretrain_csv, rows);
    std::printf("pre-trained %llu updates over %zu buffers -> %s\n",
                static_cast<unsigned long long>(ssl.pretrain_steps), buffers.size(),
                pretrain_out.c_str());
    return kExitOk;
  }

  if (finetune_cmd->parsed()) {
    config::RunConfig cfg = load_config(finetune_opts.config_path);
    proto::SslConfig ssl = cfg.ssl();
    if (finetune_steps) ssl.finetune_steps = *finetune_steps;
    proto::SslLearner learner = proto::SslLearner::load(finetune_encoder, ssl);
    collect::DomainBuffer buf = collect::load_buffer(finetune_buffer);
    auto rows = proto::finetune(learner, buf, derive_seed(finetune_opts.seed, "finetune"));
    learner.save(finetune_out);
    if (!finetune_csv.empty()) proto::write_metrics_csv(finetune_csv, rows);
    std::printf("finetuned %llu updates on %s -> %s\n",
                static_cast<unsigned long long>(ssl.finetune_steps), buf.domain.c_str(),
                finetune_out.c_str());
    return kExitOk;
  }

  if (train_cmd->parsed()) {
    config::RunConfig cfg = load_config(train_opts.config_path);
    rl::RlConfig rlc = cfg.rl();
    if (train_steps) rlc.steps = *train_steps;
    proto::SslLearner learner = proto::SslLearner::load(train_encoder, cfg.ssl());
    rl::TrainResult res =
        rl::train_downstream(train_domain, cfg.env_options(), learner.stack(), learner.bank(),
                             rlc, train_opts.seed, train_eval_csv, train_policy_out);
    std::printf("trained %llu env steps on %s; final mean return %.3f\n",
                static_cast<unsigned long long>(rlc.steps), train_domain.c_str(),
                res.final_mean_return);
    return kExitOk;
  }

  if (coverage_cmd->parsed()) {
    config::RunConfig cfg = load_config(coverage_config);
    proto::SslLearner learner = proto::SslLearner::load(coverage_ckpt, cfg.ssl());
    metrics::write_coverage_csv(learner.bank(), coverage_k, coverage_out);
    metrics::CoverageReport rep = metrics::coverage(learner.bank(), coverage_k);
    std::printf("ane %.8g kne %.8g k %d -> %s\n", rep.ane, rep.kne, rep.k, coverage_out.c_str());
    return kExitOk;
  }

  if (pca_cmd->parsed()) {
    config::RunConfig cfg = load_config(pca_config);
    proto::SslLearner learner = proto::SslLearner::load(pca_ckpt, cfg.ssl());
    std::vector<collect::DomainBuffer> buffers;
    for (const auto& path : pca_buffers) buffers.push_back(collect::load_buffer(path));
    metrics::write_pca_csv(pointers(buffers), learner.stack(), pca_components, pca_frames,
                           cfg.frame_stack, pca_out);
    std::printf("pca of %zu buffers -> %s\n", buffers.size(), pca_out.c_str());
    return kExitOk;
  }

  if (pipeline_cmd->parsed()) {
    pipeline::PipelineResult result;
    if (!pipeline_manifest.empty()) {
      result = pipeline::run_from_manifest(pipeline_manifest, pipeline_out);
    } else {
      config::RunConfig cfg = load_config(pipeline_config);
      result = pipeline::run_pipeline(cfg, pipeline_out);
    }
    std::printf("run directory: %s\nmanifest: %s\n", result.run_dir.c_str(),
                result.manifest_path.c_str());
    return kExitOk;
  }

  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::ConfigInvalid ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
