#pragma once

// Reverse-mode autodiff over 2-d tensors. Ops evaluate eagerly and record a
// backward closure; backward() walks the graph in reverse creation order.
// Graph recording can be switched off (NoGradGuard) for inference, in which
// case ops return plain values with no parents.

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "hvtrack/rng.hpp"
#include "hvtrack/tensor.hpp"

namespace hvt::ag {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor val;
  Tensor grad;  // allocated lazily, same shape as val
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backprop;  // accumulates into parents' grads

  void ensure_grad();
};

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : n_(std::move(n)) {}

  bool defined() const { return n_ != nullptr; }
  const Tensor& val() const { return n_->val; }
  Tensor& grad() { return n_->grad; }
  const Tensor& grad() const { return n_->grad; }
  std::size_t rows() const { return n_->val.rows; }
  std::size_t cols() const { return n_->val.cols; }
  bool requires_grad() const { return n_ && n_->requires_grad; }
  NodePtr node() const { return n_; }

  // leaf mutation (optimizer updates); invalid on non-leaf nodes
  Tensor& leaf_value();
  void zero_grad();

 private:
  NodePtr n_;
};

Var constant(Tensor t);
Var param(Tensor t);  // leaf with requires_grad

// true while gradients are being recorded (default)
bool grad_enabled();

struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  bool prev;
};

// ---- ops ----
Var add(const Var& a, const Var& b);         // same shape
Var sub(const Var& a, const Var& b);         // same shape
Var mul(const Var& a, const Var& b);         // elementwise, same shape
Var scale(const Var& a, double s);
Var add_rowvec(const Var& x, const Var& b);  // x: NxC, b: 1xC
Var mul_colvec(const Var& x, const Var& w);  // x: NxC, w: Nx1
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var softmax_rows(const Var& x);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
Var concat_rows(const std::vector<Var>& xs);
Var concat_cols(const std::vector<Var>& xs);
Var slice_rows(const Var& x, std::size_t r0, std::size_t r1);
Var slice_cols(const Var& x, std::size_t c0, std::size_t c1);
Var gather_rows(const Var& x, const std::vector<std::size_t>& idx);
// x: (groups*group_size) x C -> groups x C, max over each consecutive block
Var group_maxpool_rows(const Var& x, std::size_t group_size);
// x: (clusters*members) x C, w: members x 1 -> clusters x C,
// out[c] = sum_j w[j] * x[c*members + j]
Var cluster_aggregate(const Var& x, const Var& w);
Var sum_all(const Var& x);    // 1x1
Var mean_all(const Var& x);   // 1x1
Var row_sum(const Var& x);    // Nx1
Var col_sum(const Var& x);    // 1xC
Var div_by_scalar(const Var& x, const Var& s);  // s: 1x1
Var l2_normalize_rows(const Var& x, double eps = 1e-12);
Var dropout(const Var& x, double rate, Rng& rng, bool train);
// wrap elementwise to (-pi, pi]; derivative 1 a.e.
Var wrap_angle(const Var& x);

// ---- losses (scalar outputs) ----
Var mse_mean(const Var& x, const Tensor& target);
Var huber_mean(const Var& x, const Tensor& target, double delta);
Var bce_mean(const Var& p, const Tensor& target);  // p in [0,1]

void backward(const Var& root);  // root must be 1x1

}  // namespace hvt::ag
