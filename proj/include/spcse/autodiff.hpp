#pragma once

#include <memory>
#include <vector>

#include "spcse/common.hpp"

namespace spcse::ad {

// Reverse-mode tape over row-major float Eigen matrices. Nodes are created in forward
// (topological) order; the backward sweep walks them in reverse, so every consumer has
// finished accumulating into a node's grad before that node propagates to its parents.
struct Node {
  Mat val;
  Mat grad;

  virtual ~Node() = default;
  virtual void backward() = 0;

  void init_grad() { grad = Mat::Zero(val.rows(), val.cols()); }
};

using Var = Node*;

class Tape {
public:
  template <typename T, typename... Args>
  T* make(Args&&... args) {
    auto node = std::make_unique<T>(std::forward<Args>(args)...);
    node->init_grad();
    T* raw = node.get();
    nodes_.push_back(std::move(node));
    return raw;
  }

  // Seeds root (must be 1x1) with gradient 1 and sweeps the whole tape in reverse.
  // Leaf nodes flush their accumulated gradients into their sinks during the sweep.
  void backward(Var root);

  void reset();
  size_t size() const { return nodes_.size(); }

private:
  std::vector<std::unique_ptr<Node>> nodes_;
  bool backward_done_ = false;
};

// Leaf over an external parameter. The value is copied; after the backward sweep the
// accumulated gradient is added into *sink (nullptr discards it).
Var leaf(Tape& t, const Mat& value, Mat* sink);

// Row gather: out.row(r) = x.row(indices[r]); duplicate indices accumulate gradient.
Var rows(Tape& t, Var x, std::vector<int> indices);

Var slice_rows(Tape& t, Var x, int start, int count);
Var concat_rows(Tape& t, const std::vector<Var>& parts);

Var matmul(Tape& t, Var a, Var b);
// scale * a * b^T
Var matmul_nt(Tape& t, Var a, Var b, real scale);

Var add(Tape& t, Var a, Var b);
// a + broadcast row bias (1 x cols)
Var add_row_vector(Tape& t, Var a, Var bias);

// sum_i coeffs(0, i) * parts[i]; coeffs is a 1 x k variable (the head-mask row).
Var scale_sum(Tape& t, const std::vector<Var>& parts, Var coeffs);

// a with every row scaled elementwise by v (1 x cols); v is a variable (the neuron-mask row).
Var mul_row_broadcast(Tape& t, Var a, Var v);

// Elementwise product with a constant matrix (dropout mask with inverted scaling).
Var mul_const(Tape& t, Var a, Mat m);

Var scale_const(Tape& t, Var a, real c);

Var softmax_rows(Tape& t, Var a);
Var gelu(Tape& t, Var a);
Var layer_norm_rows(Tape& t, Var x, Var gamma, Var beta, real eps);

// Rows scaled to unit L2 norm; zero-norm row is a numeric error.
Var row_normalize(Tape& t, Var x);

Var sum_all(Tape& t, Var a);

// log(max(mean_i ||h_i - hplus_i||^2, eps)); the clamp branch has zero gradient.
Var alignment_head(Tape& t, Var h, Var hplus, real eps);

// log(mean_{i<j} exp(-2 ||z_i - z_j||^2)) over all row pairs of z.
Var uniformity_head(Tape& t, Var z);

// mean_i [logsumexp_j(m_ij) - m_ii]; the InfoNCE objective on a precomputed logit matrix.
Var softmax_xent_diag(Tape& t, Var m);

// mean_i [logsumexp_j(logits_ij) - logits_{i,targets[i]}]
Var softmax_xent_rows(Tape& t, Var logits, std::vector<int> targets);

real gelu_scalar(real x);

}  // namespace spcse::ad
