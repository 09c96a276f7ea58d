#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "crpt/tensor.hpp"

namespace crpt::nd {

class Node;
using NodePtr = std::shared_ptr<Node>;

// One entry of the reverse-mode tape. Nodes that do not require gradients
// drop their parent edges, so constant subgraphs (target networks, frozen
// encoders) cost a plain forward pass and nothing else.
class Node {
 public:
  Tensor value;
  Tensor grad;  // allocated by backward(); same shape as value
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backprop;  // accumulates into parents' grads

  static NodePtr make(Tensor v, std::vector<NodePtr> parents);
};

// Leaf that participates in differentiation.
NodePtr leaf(Tensor v);
// Leaf treated as a constant.
NodePtr constant(Tensor v);
// Copies the value and severs the tape: gradients never flow through.
NodePtr detach(const NodePtr& x);

// Elementwise (shapes must match).
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr min_elem(const NodePtr& a, const NodePtr& b);

NodePtr scale(const NodePtr& x, double s);
NodePtr add_scalar(const NodePtr& x, double s);
NodePtr clamp_min(const NodePtr& x, double floor);

NodePtr relu(const NodePtr& x);
NodePtr tanh_op(const NodePtr& x);
NodePtr exp_op(const NodePtr& x);
NodePtr log_op(const NodePtr& x);

// x {B,N} times scalar node s {1} -> {B,N}; gradient reaches both.
NodePtr mul_scalar_node(const NodePtr& x, const NodePtr& s);

// Row-wise softmax / l2 normalization of a matrix.
NodePtr softmax_rows(const NodePtr& x);
NodePtr l2norm_rows(const NodePtr& x);

// Linear algebra. affine: y = x w^T + b with x {B,In}, w {Out,In}, b {Out}.
NodePtr matmul(const NodePtr& a, const NodePtr& b);
NodePtr matmul_nt(const NodePtr& a, const NodePtr& b);
NodePtr affine(const NodePtr& x, const NodePtr& w, const NodePtr& b);

// conv2d: x {B,C,H,W}, w {O,C,K,K}, b {O}, valid padding, square stride.
NodePtr conv2d(const NodePtr& x, const NodePtr& w, const NodePtr& b, std::size_t stride);

// {B,C,H,W} -> {B, C*H*W} (and general flatten-to-2D).
NodePtr flatten_rows(const NodePtr& x);

NodePtr concat_cols(const NodePtr& a, const NodePtr& b);
NodePtr slice_cols(const NodePtr& x, std::size_t lo, std::size_t hi);

NodePtr sum(const NodePtr& x);                // -> {1}
NodePtr mean(const NodePtr& x);               // -> {1}
NodePtr sum_rows(const NodePtr& x);           // {B,N} -> {B,1}

// Reverse pass from a scalar root. Allocates/zeroes grads of the reachable
// subgraph, seeds d(root)=1 and runs the tape in reverse topological order.
void backward(const NodePtr& root);

}  // namespace crpt::nd
