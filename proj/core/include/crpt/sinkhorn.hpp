#pragma once

#include "crpt/tensor.hpp"

namespace crpt::sinkhorn {

// Cluster-assignment targets. All functions operate on plain tensors; no
// gradient ever flows through a target matrix.
//
// Shapes are {B, M} (rows = embeddings, columns = prototypes). After the
// full pipeline every column sums to 1/M exactly (the last operation is the
// column normalization), rows approach 1/B, and the total mass is 1.

// C_ij = z_i . c_j for unit rows; NotNormalized if any row norm strays from
// 1 by more than 1e-6.
nd::Tensor score_matrix(const nd::Tensor& embeddings, const nd::Tensor& prototypes);

// Elementwise exp(C / epsilon); Overflow if any entry of C/epsilon > 700.
nd::Tensor positify(const nd::Tensor& scores, double epsilon);

// Row normalization: entry (i,j) -> C_ij / (B * rowsum_i); rows then sum to
// exactly 1/B. NonPositive unless every entry is > 0.
nd::Tensor row_norm(const nd::Tensor& positive);

// Column normalization: entry (i,j) -> C_ij / (M * colsum_j).
nd::Tensor col_norm(const nd::Tensor& positive);

// One doubly-normalization: col_norm(row_norm(C)).
nd::Tensor doubly_normalize(const nd::Tensor& positive);

// Full target computation: `iterations` doubly-normalizations of
// positify(scores, epsilon). Default three rounds.
nd::Tensor assignment_targets(const nd::Tensor& scores, int iterations = 3,
                              double epsilon = 0.05);

// Rows of T rescaled to sum to 1 (the cross-entropy labels).
nd::Tensor renormalize_rows(const nd::Tensor& targets);

inline constexpr double kDefaultEpsilon = 0.05;
inline constexpr int kDefaultIterations = 3;

}  // namespace crpt::sinkhorn
