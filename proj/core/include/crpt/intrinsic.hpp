#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "crpt/protolearn.hpp"
#include "crpt/tensor.hpp"

namespace crpt::intrinsic {

// FIFO set of latent projections used by the kNN exploration reward. Entries
// carry stable ids so a member can be excluded from its own neighbor query
// (exclusion is by identity; equal-valued distinct entries are neighbors).
class ProjectionSet {
 public:
  explicit ProjectionSet(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t dim() const;

  // Appends one vector, evicting the oldest beyond capacity; returns its id.
  std::uint64_t push(std::vector<double> z);

  const std::vector<double>& value(std::size_t index) const { return entries_[index].z; }
  std::uint64_t id(std::size_t index) const { return entries_[index].id; }

 private:
  struct Entry {
    std::uint64_t id;
    std::vector<double> z;
  };
  std::size_t capacity_;
  std::uint64_t next_id_ = 0;
  std::vector<Entry> entries_;  // oldest first
};

// Each prototype selects the candidate with the largest dot product between
// the normalized prototype and the normalized candidate; ties break toward
// the lowest candidate index. Selected vectors are appended as given.
void update_q(ProjectionSet& q, const nd::Tensor& candidates, const proto::PrototypeBank& bank);

// Euclidean distance from z to its k-th nearest member of Q. If exclude_id
// names a member, that member is skipped. InsufficientNeighbors when fewer
// than k members are eligible.
double knn_reward(const std::vector<double>& z, const ProjectionSet& q, std::size_t k,
                  std::optional<std::uint64_t> exclude_id = std::nullopt);

// r + beta * r_hat.
double augment_reward(double extrinsic, double r_hat, double beta);

}  // namespace crpt::intrinsic
