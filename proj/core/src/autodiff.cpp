#include "crpt/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace crpt::nd {

namespace {
using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapC = Eigen::Map<const MatRM>;

bool any_requires_grad(const std::vector<NodePtr>& parents) {
  for (const auto& p : parents)
    if (p->requires_grad) return true;
  return false;
}

void require_matrix(const NodePtr& x, const char* op) {
  if (x->value.ndim() != 2) raise(Errc::ShapeMismatch, std::string(op) + " expects a matrix");
}
}  // namespace

NodePtr Node::make(Tensor v, std::vector<NodePtr> parents) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = any_requires_grad(parents);
  if (n->requires_grad) n->parents = std::move(parents);
  return n;
}

NodePtr leaf(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = true;
  return n;
}

NodePtr constant(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return n;
}

NodePtr detach(const NodePtr& x) { return constant(x->value); }

namespace {
// Adds g into p->grad when p participates in differentiation.
inline void accum(const NodePtr& p, const double* g, std::size_t n) {
  if (!p->requires_grad) return;
  double* dst = p->grad.data.data();
  for (std::size_t i = 0; i < n; ++i) dst[i] += g[i];
}
}  // namespace

NodePtr add(const NodePtr& a, const NodePtr& b) {
  auto n = Node::make(nd::add(a->value, b->value), {a, b});
  if (n->requires_grad)
    n->backprop = [a, b](Node& self) {
      accum(a, self.grad.data.data(), self.grad.numel());
      accum(b, self.grad.data.data(), self.grad.numel());
    };
  return n;
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
  auto n = Node::make(nd::sub(a->value, b->value), {a, b});
  if (n->requires_grad)
    n->backprop = [a, b](Node& self) {
      accum(a, self.grad.data.data(), self.grad.numel());
      if (b->requires_grad)
        for (std::size_t i = 0; i < self.grad.numel(); ++i) b->grad.data[i] -= self.grad.data[i];
    };
  return n;
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
  auto n = Node::make(nd::mul(a->value, b->value), {a, b});
  if (n->requires_grad)
    n->backprop = [a, b](Node& self) {
      const std::size_t m = self.grad.numel();
      if (a->requires_grad)
        for (std::size_t i = 0; i < m; ++i) a->grad.data[i] += self.grad.data[i] * b->value.data[i];
      if (b->requires_grad)
        for (std::size_t i = 0; i < m; ++i) b->grad.data[i] += self.grad.data[i] * a->value.data[i];
    };
  return n;
}

NodePtr min_elem(const NodePtr& a, const NodePtr& b) {
  if (!a->value.same_shape(b->value)) raise(Errc::ShapeMismatch, "min_elem shape mismatch");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = std::min(a->value.data[i], b->value.data[i]);
  auto n = Node::make(std::move(out), {a, b});
  if (n->requires_grad)
    n->backprop = [a, b](Node& self) {
      // Ties route to the first argument.
      for (std::size_t i = 0; i < self.grad.numel(); ++i) {
        if (a->value.data[i] <= b->value.data[i]) {
          if (a->requires_grad) a->grad.data[i] += self.grad.data[i];
        } else if (b->requires_grad) {
          b->grad.data[i] += self.grad.data[i];
        }
      }
    };
  return n;
}

NodePtr scale(const NodePtr& x, double s) {
  auto n = Node::make(nd::scale(x->value, s), {x});
  if (n->requires_grad)
    n->backprop = [x, s](Node& self) {
      for (std::size_t i = 0; i < self.grad.numel(); ++i) x->grad.data[i] += self.grad.data[i] * s;
    };
  return n;
}

NodePtr add_scalar(const NodePtr& x, double s) {
  Tensor out = x->value;
  for (double& v : out.data) v += s;
  auto n = Node::make(std::move(out), {x});
  if (n->requires_grad)
    n->backprop = [x](Node& self) { accum(x, self.grad.data.data(), self.grad.numel()); };
  return n;
}

NodePtr clamp_min(const NodePtr& x, double floor) {
  Tensor out = x->value;
  for (double& v : out.data) v = std::max(v, floor);
  auto n = Node::make(std::move(out), {x});
  if (n->requires_grad)
    n->backprop = [x, floor](Node& self) {
      for (std::size_t i = 0; i < self.grad.numel(); ++i)
        if (x->value.data[i] > floor) x->grad.data[i] += self.grad.data[i];
    };
  return n;
}

NodePtr relu(const NodePtr& x) {
  Tensor out = x->value;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  auto n = Node::make(std::move(out), {x});
  if (n->requires_grad)
    n->backprop = [x](Node& self) {
      for (std::size_t i = 0; i < self.grad.numel(); ++i)
        if (x->value.data[i] > 0.0) x->grad.data[i] += self.grad.data[i];
    };
  return n;
}

NodePtr tanh_op(const NodePtr& x) {
  Tensor out = x->value;
  for (double& v : out.data) v = std::tanh(v);
  auto n = Node::make(std::move(out), {x});
  if (n->requires_grad)
    n->backprop = [x](Node& self) {
      for (std::size_t i = 0; i < self.grad.numel(); ++i) {
        const double y = self.value.data[i];
        x->grad.data[i] += self.grad.data[i] * (1.0 - y * y);
      }
    };
  return n;
}

NodePtr exp_op(const NodePtr& x) {
  Tensor out = x->value;
  for (double& v : out.data) v = std::exp(v);
  auto n = Node::make(std::move(out), {x});
  if (n->requires_grad)
    n->backprop = [x](Node& self) {
      for (std::size_t i = 0; i < self.grad.numel(); ++i)
        x->grad.data[i] += self.grad.data[i] * self.value.data[i];
    };
  return n;
}

NodePtr log_op(const NodePtr& x) {
  Tensor out = x->value;
  for (double& v : out.data) v = std::log(v);
  auto n = Node::make(std::move(out), {x});
  if (n->requires_grad)
    n->backprop = [x](Node& self) {
      for (std::size_t i = 0; i < self.grad.numel(); ++i)
        x->grad.data[i] += self.grad.data[i] / x->value.data[i];
    };
  return n;
}

NodePtr mul_scalar_node(const NodePtr& x, const NodePtr& s) {
  if (s->value.numel() != 1) raise(Errc::ShapeMismatch, "mul_scalar_node expects a scalar node");
  const double sv = s->value.data[0];
  auto n = Node::make(nd::scale(x->value, sv), {x, s});
  if (n->requires_grad)
    n->backprop = [x, s, sv](Node& self) {
      if (x->requires_grad)
        for (std::size_t i = 0; i < self.grad.numel(); ++i) x->grad.data[i] += self.grad.data[i] * sv;
      if (s->requires_grad) {
        double acc = 0.0;
        for (std::size_t i = 0; i < self.grad.numel(); ++i) acc += self.grad.data[i] * x->value.data[i];
        s->grad.data[0] += acc;
      }
    };
  return n;
}

NodePtr softmax_rows(const NodePtr& x) {
  require_matrix(x, "softmax_rows");
  const std::size_t r = x->value.rows(), c = x->value.cols();
  Tensor out({r, c});
  for (std::size_t i = 0; i < r; ++i) {
    double mx = x->value.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x->value.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(x->value.at(i, j) - mx);
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = std::exp(x->value.at(i, j) - mx) / z;
  }
  auto n = Node::make(std::move(out), {x});
  if (n->requires_grad)
    n->backprop = [x, r, c](Node& self) {
      for (std::size_t i = 0; i < r; ++i) {
        double gy = 0.0;
        for (std::size_t j = 0; j < c; ++j) gy += self.grad.at(i, j) * self.value.at(i, j);
        for (std::size_t j = 0; j < c; ++j)
          x->grad.at(i, j) += self.value.at(i, j) * (self.grad.at(i, j) - gy);
      }
    };
  return n;
}

NodePtr l2norm_rows(const NodePtr& x) {
  require_matrix(x, "l2norm_rows");
  const std::size_t r = x->value.rows(), c = x->value.cols();
  Tensor out({r, c});
  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += x->value.at(i, j) * x->value.at(i, j);
    const double nn = std::sqrt(s);
    if (nn < 1e-12) raise(Errc::ZeroNorm, "l2norm_rows: row " + std::to_string(i) + " is (near-)zero");
    norms[i] = nn;
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = x->value.at(i, j) / nn;
  }
  auto n = Node::make(std::move(out), {x});
  if (n->requires_grad)
    n->backprop = [x, r, c, norms = std::move(norms)](Node& self) {
      // d/dx (x/||x||) = (g - y (y.g)) / ||x||
      for (std::size_t i = 0; i < r; ++i) {
        double yg = 0.0;
        for (std::size_t j = 0; j < c; ++j) yg += self.value.at(i, j) * self.grad.at(i, j);
        for (std::size_t j = 0; j < c; ++j)
          x->grad.at(i, j) += (self.grad.at(i, j) - self.value.at(i, j) * yg) / norms[i];
      }
    };
  return n;
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
  auto n = Node::make(nd::matmul(a->value, b->value), {a, b});
  if (n->requires_grad)
    n->backprop = [a, b](Node& self) {
      const std::size_t m = a->value.rows(), k = a->value.cols(), c = b->value.cols();
      MapC g(self.grad.data.data(), m, c);
      if (a->requires_grad)
        MapM(a->grad.data.data(), m, k).noalias() += g * MapC(b->value.data.data(), k, c).transpose();
      if (b->requires_grad)
        MapM(b->grad.data.data(), k, c).noalias() += MapC(a->value.data.data(), m, k).transpose() * g;
    };
  return n;
}

NodePtr matmul_nt(const NodePtr& a, const NodePtr& b) {
  auto n = Node::make(nd::matmul_nt(a->value, b->value), {a, b});
  if (n->requires_grad)
    n->backprop = [a, b](Node& self) {
      const std::size_t m = a->value.rows(), k = a->value.cols(), r = b->value.rows();
      MapC g(self.grad.data.data(), m, r);
      if (a->requires_grad)
        MapM(a->grad.data.data(), m, k).noalias() += g * MapC(b->value.data.data(), r, k);
      if (b->requires_grad)
        MapM(b->grad.data.data(), r, k).noalias() += g.transpose() * MapC(a->value.data.data(), m, k);
    };
  return n;
}

NodePtr affine(const NodePtr& x, const NodePtr& w, const NodePtr& b) {
  require_matrix(x, "affine");
  if (w->value.ndim() != 2 || b->value.ndim() != 1 || w->value.rows() != b->value.shape[0] ||
      x->value.cols() != w->value.cols())
    raise(Errc::ShapeMismatch, "affine: x " + shape_str(x->value.shape) + ", w " +
                                   shape_str(w->value.shape) + ", b " + shape_str(b->value.shape));
  const std::size_t B = x->value.rows(), in = x->value.cols(), out = w->value.rows();
  Tensor y({B, out});
  MapM(y.data.data(), B, out).noalias() =
      MapC(x->value.data.data(), B, in) * MapC(w->value.data.data(), out, in).transpose();
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = 0; j < out; ++j) y.at(i, j) += b->value.data[j];
  auto n = Node::make(std::move(y), {x, w, b});
  if (n->requires_grad)
    n->backprop = [x, w, b, B, in, out](Node& self) {
      MapC g(self.grad.data.data(), B, out);
      if (x->requires_grad)
        MapM(x->grad.data.data(), B, in).noalias() += g * MapC(w->value.data.data(), out, in);
      if (w->requires_grad)
        MapM(w->grad.data.data(), out, in).noalias() += g.transpose() * MapC(x->value.data.data(), B, in);
      if (b->requires_grad)
        for (std::size_t i = 0; i < B; ++i)
          for (std::size_t j = 0; j < out; ++j) b->grad.data[j] += self.grad.at(i, j);
    };
  return n;
}

namespace {
struct ConvDims {
  std::size_t B, C, H, W, O, K, S, Ho, Wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride) {
  if (x.ndim() != 4 || w.ndim() != 4 || b.ndim() != 1)
    raise(Errc::ShapeMismatch, "conv2d expects x {B,C,H,W}, w {O,C,K,K}, b {O}");
  ConvDims d{x.shape[0], x.shape[1], x.shape[2], x.shape[3],
             w.shape[0], w.shape[2], stride, 0, 0};
  if (w.shape[1] != d.C || w.shape[3] != d.K || b.shape[0] != d.O)
    raise(Errc::ShapeMismatch, "conv2d: kernel/bias shapes inconsistent with input");
  if (d.K > d.H || d.K > d.W) raise(Errc::ShapeMismatch, "conv2d: kernel larger than input");
  if (stride == 0) raise(Errc::ShapeMismatch, "conv2d: zero stride");
  d.Ho = (d.H - d.K) / d.S + 1;
  d.Wo = (d.W - d.K) / d.S + 1;
  return d;
}

// Patch matrix {B*Ho*Wo, C*K*K} for valid-padding convolution.
Tensor im2col(const Tensor& x, const ConvDims& d) {
  Tensor p({d.B * d.Ho * d.Wo, d.C * d.K * d.K});
  const double* src = x.data.data();
  double* dst = p.data.data();
  const std::size_t cols = d.C * d.K * d.K;
  for (std::size_t b = 0; b < d.B; ++b)
    for (std::size_t i = 0; i < d.Ho; ++i)
      for (std::size_t j = 0; j < d.Wo; ++j) {
        double* row = dst + ((b * d.Ho + i) * d.Wo + j) * cols;
        for (std::size_t c = 0; c < d.C; ++c)
          for (std::size_t ki = 0; ki < d.K; ++ki) {
            const double* s =
                src + ((b * d.C + c) * d.H + (i * d.S + ki)) * d.W + (j * d.S);
            double* t = row + (c * d.K + ki) * d.K;
            for (std::size_t kj = 0; kj < d.K; ++kj) t[kj] = s[kj];
          }
      }
  return p;
}

void col2im_accum(const Tensor& p, const ConvDims& d, Tensor& dx) {
  const std::size_t cols = d.C * d.K * d.K;
  double* dst = dx.data.data();
  const double* src = p.data.data();
  for (std::size_t b = 0; b < d.B; ++b)
    for (std::size_t i = 0; i < d.Ho; ++i)
      for (std::size_t j = 0; j < d.Wo; ++j) {
        const double* row = src + ((b * d.Ho + i) * d.Wo + j) * cols;
        for (std::size_t c = 0; c < d.C; ++c)
          for (std::size_t ki = 0; ki < d.K; ++ki) {
            double* t = dst + ((b * d.C + c) * d.H + (i * d.S + ki)) * d.W + (j * d.S);
            const double* s = row + (c * d.K + ki) * d.K;
            for (std::size_t kj = 0; kj < d.K; ++kj) t[kj] += s[kj];
          }
      }
}
}  // namespace

NodePtr conv2d(const NodePtr& x, const NodePtr& w, const NodePtr& b, std::size_t stride) {
  const ConvDims d = conv_dims(x->value, w->value, b->value, stride);
  auto patches = std::make_shared<Tensor>(im2col(x->value, d));
  const std::size_t rows = d.B * d.Ho * d.Wo, cols = d.C * d.K * d.K;

  // y2 {rows, O} = patches * w^T, then bias; reorder into {B,O,Ho,Wo}.
  Tensor y2({rows, d.O});
  MapM(y2.data.data(), rows, d.O).noalias() =
      MapC(patches->data.data(), rows, cols) * MapC(w->value.data.data(), d.O, cols).transpose();
  Tensor y({d.B, d.O, d.Ho, d.Wo});
  for (std::size_t bb = 0; bb < d.B; ++bb)
    for (std::size_t o = 0; o < d.O; ++o)
      for (std::size_t i = 0; i < d.Ho; ++i)
        for (std::size_t j = 0; j < d.Wo; ++j)
          y.data[((bb * d.O + o) * d.Ho + i) * d.Wo + j] =
              y2.at((bb * d.Ho + i) * d.Wo + j, o) + b->value.data[o];

  auto n = Node::make(std::move(y), {x, w, b});
  if (n->requires_grad)
    n->backprop = [x, w, b, d, patches, rows, cols](Node& self) {
      Tensor g2({rows, d.O});
      for (std::size_t bb = 0; bb < d.B; ++bb)
        for (std::size_t o = 0; o < d.O; ++o)
          for (std::size_t i = 0; i < d.Ho; ++i)
            for (std::size_t j = 0; j < d.Wo; ++j)
              g2.at((bb * d.Ho + i) * d.Wo + j, o) =
                  self.grad.data[((bb * d.O + o) * d.Ho + i) * d.Wo + j];
      MapC g(g2.data.data(), rows, d.O);
      if (w->requires_grad)
        MapM(w->grad.data.data(), d.O, cols).noalias() +=
            g.transpose() * MapC(patches->data.data(), rows, cols);
      if (b->requires_grad)
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t o = 0; o < d.O; ++o) b->grad.data[o] += g2.at(r, o);
      if (x->requires_grad) {
        Tensor dp({rows, cols});
        MapM(dp.data.data(), rows, cols).noalias() = g * MapC(w->value.data.data(), d.O, cols);
        col2im_accum(dp, d, x->grad);
      }
    };
  return n;
}

NodePtr flatten_rows(const NodePtr& x) {
  if (x->value.ndim() < 2) raise(Errc::ShapeMismatch, "flatten_rows expects ndim >= 2");
  const std::size_t B = x->value.shape[0];
  const std::size_t rest = x->value.numel() / B;
  Tensor out({B, rest}, x->value.data);
  auto n = Node::make(std::move(out), {x});
  if (n->requires_grad)
    n->backprop = [x](Node& self) { accum(x, self.grad.data.data(), self.grad.numel()); };
  return n;
}

NodePtr concat_cols(const NodePtr& a, const NodePtr& b) {
  require_matrix(a, "concat_cols");
  require_matrix(b, "concat_cols");
  if (a->value.rows() != b->value.rows()) raise(Errc::ShapeMismatch, "concat_cols: row mismatch");
  const std::size_t B = a->value.rows(), ca = a->value.cols(), cb = b->value.cols();
  Tensor out({B, ca + cb});
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < ca; ++j) out.at(i, j) = a->value.at(i, j);
    for (std::size_t j = 0; j < cb; ++j) out.at(i, ca + j) = b->value.at(i, j);
  }
  auto n = Node::make(std::move(out), {a, b});
  if (n->requires_grad)
    n->backprop = [a, b, B, ca, cb](Node& self) {
      for (std::size_t i = 0; i < B; ++i) {
        if (a->requires_grad)
          for (std::size_t j = 0; j < ca; ++j) a->grad.at(i, j) += self.grad.at(i, j);
        if (b->requires_grad)
          for (std::size_t j = 0; j < cb; ++j) b->grad.at(i, j) += self.grad.at(i, ca + j);
      }
    };
  return n;
}

NodePtr slice_cols(const NodePtr& x, std::size_t lo, std::size_t hi) {
  require_matrix(x, "slice_cols");
  if (lo >= hi || hi > x->value.cols()) raise(Errc::ShapeMismatch, "slice_cols: bad range");
  const std::size_t B = x->value.rows(), w = hi - lo;
  Tensor out({B, w});
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = 0; j < w; ++j) out.at(i, j) = x->value.at(i, lo + j);
  auto n = Node::make(std::move(out), {x});
  if (n->requires_grad)
    n->backprop = [x, B, w, lo](Node& self) {
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < w; ++j) x->grad.at(i, lo + j) += self.grad.at(i, j);
    };
  return n;
}

NodePtr sum(const NodePtr& x) {
  double s = 0.0;
  for (double v : x->value.data) s += v;
  auto n = Node::make(Tensor::scalar(s), {x});
  if (n->requires_grad)
    n->backprop = [x](Node& self) {
      const double g = self.grad.data[0];
      for (double& gv : x->grad.data) gv += g;
    };
  return n;
}

NodePtr mean(const NodePtr& x) {
  const double inv = 1.0 / static_cast<double>(x->value.numel());
  double s = 0.0;
  for (double v : x->value.data) s += v;
  auto n = Node::make(Tensor::scalar(s * inv), {x});
  if (n->requires_grad)
    n->backprop = [x, inv](Node& self) {
      const double g = self.grad.data[0] * inv;
      for (double& gv : x->grad.data) gv += g;
    };
  return n;
}

NodePtr sum_rows(const NodePtr& x) {
  require_matrix(x, "sum_rows");
  const std::size_t B = x->value.rows(), c = x->value.cols();
  Tensor out({B, 1});
  for (std::size_t i = 0; i < B; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += x->value.at(i, j);
    out.at(i, 0) = s;
  }
  auto n = Node::make(std::move(out), {x});
  if (n->requires_grad)
    n->backprop = [x, B, c](Node& self) {
      for (std::size_t i = 0; i < B; ++i) {
        const double g = self.grad.at(i, 0);
        for (std::size_t j = 0; j < c; ++j) x->grad.at(i, j) += g;
      }
    };
  return n;
}

void backward(const NodePtr& root) {
  if (root->value.numel() != 1) raise(Errc::ShapeMismatch, "backward expects a scalar root");
  if (!root->requires_grad) return;

  // Iterative post-order DFS; parents of non-differentiable nodes were pruned
  // at construction so traversal stops at constants.
  std::vector<Node*> topo;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node* p = n->parents[idx++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : topo) n->grad = Tensor::zeros(n->value.shape);
  root->grad.data[0] = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop(**it);
}

}  // namespace crpt::nd
