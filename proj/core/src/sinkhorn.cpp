#include "crpt/sinkhorn.hpp"

#include <cmath>

#include "crpt/error.hpp"

namespace crpt::sinkhorn {

namespace {
void require_unit_rows(const nd::Tensor& m, const char* who) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += m.at(i, j) * m.at(i, j);
    if (std::abs(std::sqrt(s) - 1.0) > 1e-6)
      raise(Errc::NotNormalized,
            std::string(who) + " row " + std::to_string(i) + " is not unit norm");
  }
}
}  // namespace

nd::Tensor score_matrix(const nd::Tensor& embeddings, const nd::Tensor& prototypes) {
  if (embeddings.ndim() != 2 || prototypes.ndim() != 2 || embeddings.cols() != prototypes.cols())
    raise(Errc::ShapeMismatch, "score_matrix: incompatible shapes");
  require_unit_rows(embeddings, "embeddings");
  require_unit_rows(prototypes, "prototypes");
  return nd::matmul_nt(embeddings, prototypes);
}

nd::Tensor positify(const nd::Tensor& scores, double epsilon) {
  if (epsilon <= 0.0) raise(Errc::ConfigInvalid, "positify: epsilon must be positive");
  nd::Tensor out = scores;
  for (double& v : out.data) {
    const double e = v / epsilon;
    if (e > 700.0) raise(Errc::Overflow, "positify: exponent exceeds 700");
    v = std::exp(e);
  }
  return out;
}

namespace {
void require_positive(const nd::Tensor& m, const char* who) {
  if (m.ndim() != 2) raise(Errc::ShapeMismatch, std::string(who) + " expects a matrix");
  for (double v : m.data)
    if (!(v > 0.0)) raise(Errc::NonPositive, std::string(who) + ": non-positive entry");
}
}  // namespace

nd::Tensor row_norm(const nd::Tensor& positive) {
  require_positive(positive, "row_norm");
  const std::size_t rows = positive.rows(), cols = positive.cols();
  nd::Tensor out = positive;
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += positive.at(i, j);
    const double inv = 1.0 / (static_cast<double>(rows) * s);
    for (std::size_t j = 0; j < cols; ++j) out.at(i, j) *= inv;
  }
  return out;
}

nd::Tensor col_norm(const nd::Tensor& positive) {
  require_positive(positive, "col_norm");
  const std::size_t rows = positive.rows(), cols = positive.cols();
  nd::Tensor out = positive;
  for (std::size_t j = 0; j < cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) s += positive.at(i, j);
    const double inv = 1.0 / (static_cast<double>(cols) * s);
    for (std::size_t i = 0; i < rows; ++i) out.at(i, j) *= inv;
  }
  return out;
}

nd::Tensor doubly_normalize(const nd::Tensor& positive) { return col_norm(row_norm(positive)); }

nd::Tensor assignment_targets(const nd::Tensor& scores, int iterations, double epsilon) {
  nd::Tensor t = positify(scores, epsilon);
  for (int i = 0; i < iterations; ++i) t = doubly_normalize(t);
  return t;
}

nd::Tensor renormalize_rows(const nd::Tensor& targets) {
  nd::Tensor out = targets;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < out.cols(); ++j) s += out.at(i, j);
    if (!(s > 0.0)) raise(Errc::NonPositive, "renormalize_rows: row with non-positive mass");
    for (std::size_t j = 0; j < out.cols(); ++j) out.at(i, j) /= s;
  }
  return out;
}

}  // namespace crpt::sinkhorn
