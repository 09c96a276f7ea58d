#include "crpt/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

namespace crpt::nd {

namespace {
using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapC = Eigen::Map<const MatRM>;
}  // namespace

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "}";
  return os.str();
}

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
  for (std::size_t e : shape)
    if (e == 0) raise(Errc::ShapeMismatch, "zero extent in shape " + shape_str(shape));
  data.assign(shape_numel(shape), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (data.size() != shape_numel(shape))
    raise(Errc::ShapeMismatch,
          "data length " + std::to_string(data.size()) + " != numel of " + shape_str(shape));
}

Tensor Tensor::full(std::vector<std::size_t> s, double v) {
  Tensor t(std::move(s));
  t.fill(v);
  return t;
}

Tensor Tensor::row(std::vector<double> d) {
  std::vector<std::size_t> s{d.size()};
  return Tensor(std::move(s), std::move(d));
}

double Tensor::item() const {
  if (numel() != 1) raise(Errc::ShapeMismatch, "item() on non-scalar " + shape_str(shape));
  return data[0];
}

void Tensor::fill(double v) {
  for (double& x : data) x = v;
}

bool Tensor::all_finite() const {
  for (double x : data)
    if (!std::isfinite(x)) return false;
  return true;
}

void Tensor::require_finite(const std::string& who) const {
  if (!all_finite()) raise(Errc::NonFinite, who + " contains a non-finite value");
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    raise(Errc::ShapeMismatch,
          std::string(op) + ": " + shape_str(a.shape) + " vs " + shape_str(b.shape));
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (double& x : out.data) x *= s;
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

double norm2(const Tensor& a) { return std::sqrt(dot(a, a)); }

Tensor l2_normalize(const Tensor& v) {
  const double n = norm2(v);
  if (n < 1e-12) raise(Errc::ZeroNorm, "cannot normalize a (near-)zero vector");
  return scale(v, 1.0 / n);
}

Tensor l2_normalize_rows(const Tensor& m) {
  if (m.ndim() != 2) raise(Errc::ShapeMismatch, "l2_normalize_rows expects a matrix");
  Tensor out = m;
  const std::size_t r = m.rows(), c = m.cols();
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += m.at(i, j) * m.at(i, j);
    const double n = std::sqrt(s);
    if (n < 1e-12) raise(Errc::ZeroNorm, "row " + std::to_string(i) + " has (near-)zero norm");
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = m.at(i, j) / n;
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows())
    raise(Errc::ShapeMismatch, "matmul " + shape_str(a.shape) + " x " + shape_str(b.shape));
  Tensor out({a.rows(), b.cols()});
  MapM(out.data.data(), a.rows(), b.cols()) =
      MapC(a.data.data(), a.rows(), a.cols()) * MapC(b.data.data(), b.rows(), b.cols());
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.cols())
    raise(Errc::ShapeMismatch, "matmul_nt " + shape_str(a.shape) + " x " + shape_str(b.shape) + "^T");
  Tensor out({a.rows(), b.rows()});
  MapM(out.data.data(), a.rows(), b.rows()) =
      MapC(a.data.data(), a.rows(), a.cols()) * MapC(b.data.data(), b.rows(), b.cols()).transpose();
  return out;
}

}  // namespace crpt::nd
