#include "crpt/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "crpt/collect.hpp"
#include "crpt/error.hpp"
#include "crpt/hash.hpp"
#include "crpt/metrics.hpp"
#include "crpt/protolearn.hpp"
#include "crpt/rlagent.hpp"
#include "crpt/rng.hpp"

namespace crpt::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool has_phase(const config::RunConfig& cfg, const std::string& phase) {
  return std::find(cfg.phases.begin(), cfg.phases.end(), phase) != cfg.phases.end();
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(Errc::IoError, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

struct ArtifactLog {
  fs::path run_dir;
  json entries = json::array();

  void record(const std::string& phase, const fs::path& path) {
    entries.push_back({{"phase", phase},
                       {"path", fs::relative(path, run_dir).generic_string()},
                       {"sha1", git_blob_sha1_file(path.string())}});
  }
};

[[noreturn]] void phase_error(const std::string& phase, const Error& e) {
  throw Error(e.code(), "phase " + phase + ": " + e.what());
}

}  // namespace

PipelineResult run_pipeline(const config::RunConfig& cfg, const std::string& out_root) {
  {
    auto issues = config::validate(cfg);
    if (!issues.empty()) {
      std::string msg;
      for (const auto& i : issues) msg += (msg.empty() ? "" : "; ") + i.field + ": " + i.message;
      raise(Errc::ConfigInvalid, msg);
    }
  }

  const std::string config_text = config::serialize_config(cfg);
  const std::string config_hash = git_blob_sha1(config_text);
  const fs::path run_dir = fs::path(out_root) / config_hash.substr(0, 12);
  fs::create_directories(run_dir);

  ArtifactLog artifacts;
  artifacts.run_dir = run_dir;

  const envs::EnvOptions env_opts = cfg.env_options();
  const std::uint64_t root = cfg.root_seed;

  // ---- collect ---------------------------------------------------------
  auto buffer_path = [&](const std::string& domain) {
    return run_dir / "collect" / (domain + ".buf");
  };
  if (has_phase(cfg, "collect")) {
    try {
      fs::create_directories(run_dir / "collect");
      for (std::size_t i = 0; i < cfg.domains.size(); ++i) {
        const std::string& domain = cfg.domains[i];
        collect::DomainBuffer buf = collect::collect_random(
            domain, env_opts, cfg.collect_steps, cfg.buffer_capacity,
            derive_seed(root, "collect/" + domain));
        collect::save_buffer(buf, buffer_path(domain).string());
        artifacts.record("collect", buffer_path(domain));
      }
    } catch (const Error& e) {
      phase_error("collect", e);
    }
  }

  // ---- pretrain ---------------------------------------------------------
  const fs::path encoder_path = run_dir / "pretrain" / "encoder.ckpt";
  if (has_phase(cfg, "pretrain")) {
    try {
      fs::create_directories(run_dir / "pretrain");
      std::vector<collect::DomainBuffer> buffers;
      buffers.reserve(cfg.domains.size());
      for (const std::string& domain : cfg.domains)
        buffers.push_back(collect::load_buffer(buffer_path(domain).string()));
      std::vector<const collect::DomainBuffer*> ptrs;
      for (const auto& b : buffers) ptrs.push_back(&b);

      proto::SslLearner learner(cfg.arch(), cfg.ssl(), derive_seed(root, "ssl-init"));
      std::vector<proto::StepRow> rows = proto::pretrain(learner, ptrs, derive_seed(root, "ssl"));
      learner.save(encoder_path.string());
      const fs::path csv = run_dir / "pretrain" / "pretrain_metrics.csv";
      proto::write_metrics_csv(csv.string(), rows);
      artifacts.record("pretrain", encoder_path);
      artifacts.record("pretrain", csv);
    } catch (const Error& e) {
      phase_error("pretrain", e);
    }
  }

  // ---- finetune ---------------------------------------------------------
  fs::path train_encoder = encoder_path;
  if (has_phase(cfg, "finetune")) {
    try {
      fs::create_directories(run_dir / "finetune");
      const std::string& domain = cfg.finetune_domain;
      // Unseen target domain: produce its buffer by decoupled random collection.
      fs::path fbuf = buffer_path(domain);
      if (!fs::exists(fbuf)) {
        fs::create_directories(run_dir / "collect");
        collect::DomainBuffer buf = collect::collect_random(
            domain, env_opts, cfg.collect_steps, cfg.buffer_capacity,
            derive_seed(root, "collect/" + domain));
        collect::save_buffer(buf, fbuf.string());
        artifacts.record("finetune", fbuf);
      }
      collect::DomainBuffer buf = collect::load_buffer(fbuf.string());
      proto::SslLearner learner = proto::SslLearner::load(encoder_path.string(), cfg.ssl());
      std::vector<proto::StepRow> rows = proto::finetune(learner, buf, derive_seed(root, "finetune"));
      const fs::path out = run_dir / "finetune" / ("encoder_" + domain + ".ckpt");
      learner.save(out.string());
      const fs::path csv = run_dir / "finetune" / ("finetune_metrics_" + domain + ".csv");
      proto::write_metrics_csv(csv.string(), rows);
      artifacts.record("finetune", out);
      artifacts.record("finetune", csv);
      train_encoder = out;
    } catch (const Error& e) {
      phase_error("finetune", e);
    }
  }

  // ---- train ------------------------------------------------------------
  if (has_phase(cfg, "train")) {
    try {
      fs::create_directories(run_dir / "train");
      proto::SslLearner learner = proto::SslLearner::load(train_encoder.string(), cfg.ssl());
      for (const std::string& domain : cfg.effective_train_domains()) {
        const fs::path eval_csv = run_dir / "train" / (domain + "_eval.csv");
        const fs::path policy = run_dir / "train" / (domain + "_policy.ckpt");
        rl::train_downstream(domain, env_opts, learner.stack(), learner.bank(), cfg.rl(),
                             derive_seed(root, "rl/" + domain), eval_csv.string(),
                             policy.string());
        artifacts.record("train", eval_csv);
        artifacts.record("train", policy);
      }
    } catch (const Error& e) {
      phase_error("train", e);
    }
  }

  // ---- metrics ----------------------------------------------------------
  if (has_phase(cfg, "metrics")) {
    try {
      fs::create_directories(run_dir / "metrics");
      proto::SslLearner learner = proto::SslLearner::load(train_encoder.string(), cfg.ssl());

      {  // prototype coverage
        const fs::path cov = run_dir / "metrics" / "coverage.csv";
        metrics::write_coverage_csv(learner.bank(), static_cast<int>(cfg.knn_k), cov.string());
        artifacts.record("metrics", cov);
      }

      {  // cross-domain PCA scatter, tagged by domain
        std::vector<collect::DomainBuffer> buffers;
        buffers.reserve(cfg.domains.size());
        for (const std::string& domain : cfg.domains)
          buffers.push_back(collect::load_buffer(buffer_path(domain).string()));
        std::vector<const collect::DomainBuffer*> ptrs;
        for (const auto& b : buffers) ptrs.push_back(&b);
        const fs::path pca_csv = run_dir / "metrics" / "pca.csv";
        metrics::write_pca_csv(ptrs, learner.stack(), cfg.pca_components,
                               cfg.pca_frames_per_domain, cfg.frame_stack, pca_csv.string());
        artifacts.record("metrics", pca_csv);
      }
    } catch (const Error& e) {
      phase_error("metrics", e);
    }
  }

  // ---- manifest ----------------------------------------------------------
  json manifest;
  manifest["format"] = "crpt-manifest-v1";
  manifest["config_hash"] = config_hash;
  manifest["config_text"] = config_text;
  manifest["root_seed"] = root;
  manifest["phases"] = cfg.phases;
  manifest["artifacts"] = artifacts.entries;

  const fs::path manifest_path = run_dir / "manifest.json";
  std::ofstream os(manifest_path);
  if (!os) raise(Errc::IoError, "cannot write manifest");
  os << manifest.dump(2) << "\n";
  os.close();

  PipelineResult result;
  result.run_dir = run_dir.string();
  result.manifest_path = manifest_path.string();
  return result;
}

PipelineResult run_from_manifest(const std::string& manifest_path, const std::string& out_root) {
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    raise(Errc::IoError, std::string("cannot parse manifest: ") + e.what());
  }
  if (!manifest.contains("config_text"))
    raise(Errc::ConfigInvalid, "manifest lacks config_text");
  config::ParseResult parsed = config::parse_config(manifest["config_text"].get<std::string>());
  if (!parsed.ok()) raise(Errc::ConfigInvalid, "manifest config no longer validates");
  return run_pipeline(parsed.config, out_root);
}

}  // namespace crpt::pipeline
