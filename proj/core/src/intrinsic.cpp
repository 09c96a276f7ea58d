#include "crpt/intrinsic.hpp"

#include <algorithm>
#include <cmath>

#include "crpt/error.hpp"

namespace crpt::intrinsic {

ProjectionSet::ProjectionSet(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) raise(Errc::ConfigInvalid, "projection set capacity must be positive");
}

std::size_t ProjectionSet::dim() const { return entries_.empty() ? 0 : entries_.front().z.size(); }

std::uint64_t ProjectionSet::push(std::vector<double> z) {
  for (double v : z)
    if (!std::isfinite(v)) raise(Errc::NonFinite, "projection set entry");
  if (!entries_.empty() && z.size() != dim())
    raise(Errc::ShapeMismatch, "projection dimension changed");
  const std::uint64_t id = next_id_++;
  entries_.push_back({id, std::move(z)});
  if (entries_.size() > capacity_) entries_.erase(entries_.begin());
  return id;
}

void update_q(ProjectionSet& q, const nd::Tensor& candidates, const proto::PrototypeBank& bank) {
  if (candidates.ndim() != 2 || candidates.rows() == 0)
    raise(Errc::EmptyBatch, "update_q needs a non-empty candidate batch");
  if (candidates.cols() != bank.dim())
    raise(Errc::ShapeMismatch, "candidate dimension does not match the prototypes");

  // Scores on normalized copies; the raw candidates are what gets stored.
  nd::Tensor cand_hat = nd::l2_normalize_rows(candidates);
  nd::Tensor scores = nd::matmul_nt(bank.normalized(), cand_hat);  // {M, B}
  const std::size_t m = scores.rows(), b = scores.cols();
  for (std::size_t j = 0; j < m; ++j) {
    std::size_t best = 0;
    double best_score = scores.at(j, 0);
    for (std::size_t i = 1; i < b; ++i)
      if (scores.at(j, i) > best_score) {
        best_score = scores.at(j, i);
        best = i;
      }
    std::vector<double> z(candidates.cols());
    for (std::size_t c = 0; c < z.size(); ++c) z[c] = candidates.at(best, c);
    q.push(std::move(z));
  }
}

double knn_reward(const std::vector<double>& z, const ProjectionSet& q, std::size_t k,
                  std::optional<std::uint64_t> exclude_id) {
  if (k == 0) raise(Errc::ConfigInvalid, "k must be positive");
  std::vector<double> dists;
  dists.reserve(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (exclude_id && q.id(i) == *exclude_id) continue;
    const std::vector<double>& m = q.value(i);
    if (m.size() != z.size()) raise(Errc::ShapeMismatch, "query dimension mismatch");
    double s = 0.0;
    for (std::size_t c = 0; c < m.size(); ++c) {
      const double d = z[c] - m[c];
      s += d * d;
    }
    dists.push_back(std::sqrt(s));
  }
  if (dists.size() < k)
    raise(Errc::InsufficientNeighbors,
          "need " + std::to_string(k) + " neighbors, have " + std::to_string(dists.size()));
  std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
  return dists[k - 1];
}

double augment_reward(double extrinsic, double r_hat, double beta) {
  if (!std::isfinite(extrinsic) || !std::isfinite(r_hat) || !std::isfinite(beta))
    raise(Errc::NonFinite, "augment_reward inputs");
  return extrinsic + beta * r_hat;
}

}  // namespace crpt::intrinsic
