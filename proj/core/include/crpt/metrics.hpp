#pragma once

#include <cstdint>
#include <vector>

#include "crpt/collect.hpp"
#include "crpt/protolearn.hpp"
#include "crpt/tensor.hpp"

namespace crpt::metrics {

// Prototype-coverage statistics; lower means wider coverage.
struct CoverageReport {
  double ane = 0.0;  // mean cosine over all ordered pairs j != k
  double kne = 0.0;  // mean over prototypes of the k-th largest cosine to the others
  int k = 0;
};

// TooFewPrototypes unless the bank holds more than k prototypes.
CoverageReport coverage(const proto::PrototypeBank& bank, int k);

struct PcaResult {
  nd::Tensor projections;             // {n, components}
  std::vector<double> variance_ratio; // descending, sums to <= 1
};

// PCA of row vectors: centers, eigen-decomposes the covariance (Gram trick
// when n < dim) and returns the top coordinates plus explained-variance
// ratios. RankDeficient if the covariance rank is below `components`.
PcaResult pca(const nd::Tensor& rows, std::size_t components);

// Encodes a frame batch {B,C,H,W} with the online encoder, then runs pca().
PcaResult pca_project(const nd::Tensor& frames, const proto::EncoderStack& stack,
                      std::size_t components);

// Ridge regression core: fits X -> Y on a deterministic 80/20 split (train
// means subtracted, unpenalized intercept) and returns held-out MSE.
double ridge_probe(const nd::Tensor& x, const nd::Tensor& y, std::uint64_t split_seed,
                   double lambda);

// Held-out MSE of a linear probe from encoder embeddings to the buffer's
// ground-truth state sidecar. InsufficientData below 200 labeled frames.
double linear_probe(const collect::DomainBuffer& buffer, const proto::EncoderStack& stack,
                    std::size_t stack_k, std::uint64_t split_seed, double lambda = 1e-3);

// CSV writers shared by the pipeline and the CLI.
void write_coverage_csv(const proto::PrototypeBank& bank, int k, const std::string& path);

// Encodes evenly spaced stacks from each buffer, runs one PCA over the pooled
// embeddings and writes per-frame coordinates tagged by domain plus a final
// explained-variance-ratio row.
void write_pca_csv(const std::vector<const collect::DomainBuffer*>& buffers,
                   const proto::EncoderStack& stack, std::size_t components,
                   std::size_t frames_per_domain, std::size_t stack_k, const std::string& path);

}  // namespace crpt::metrics
