#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "crpt/error.hpp"

namespace crpt::nd {

// Dense row-major tensor of doubles. data.size() always equals the product
// of the shape extents; every extent is positive.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s);
  Tensor(std::vector<std::size_t> s, std::vector<double> d);

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<std::size_t> s, double v);
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor row(std::vector<double> d);  // shape {n}

  std::size_t numel() const { return data.size(); }
  std::size_t ndim() const { return shape.size(); }

  // 2-D accessors; shape checks only in debug-style entry points.
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }
  double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

  double item() const;

  void fill(double v);
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;

  // Throws NonFinite naming `who` if any entry is NaN/Inf.
  void require_finite(const std::string& who) const;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);
std::string shape_str(const std::vector<std::size_t>& shape);

// Elementwise helpers on plain tensors (no gradient tracking).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

double dot(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);

// Unit-norm copy of a vector; ZeroNorm if ||v|| < 1e-12.
Tensor l2_normalize(const Tensor& v);

// Row-wise unit normalization of a {rows, cols} matrix.
Tensor l2_normalize_rows(const Tensor& m);

// {m,k} x {k,n} -> {m,n} and {m,k} x {n,k}^T -> {m,n}; Eigen-backed.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);

}  // namespace crpt::nd
