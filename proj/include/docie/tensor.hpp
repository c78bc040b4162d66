#ifndef DOCIE_TENSOR_HPP_
#define DOCIE_TENSOR_HPP_

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "docie/rng.hpp"

namespace docie {

// Node in a reverse-mode differentiation graph. All tensors are 2-D row-major
// matrices of 64-bit floats; scalars are [1,1] and row vectors [1,n].
struct TensorNode {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;
  std::vector<double> grad;  // allocated on first backward touch
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  int size() const { return rows * cols; }
  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  static Tensor zeros(int rows, int cols);
  static Tensor full(int rows, int cols, double value);
  static Tensor from_values(int rows, int cols, std::vector<double> values);
  static Tensor scalar(double value);
  // Leaf with requires_grad set: a trainable parameter.
  static Tensor param(int rows, int cols, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  int size() const { return node_->size(); }
  double at(int r, int c) const { return node_->values[r * node_->cols + c]; }
  double item() const;

  const std::vector<double>& values() const { return node_->values; }
  std::vector<double>& values_mut() { return node_->values; }
  const std::vector<double>& grad() const;
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad();

  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

// While alive, ops do not record provenance (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Fills grads of every parameter reachable from `loss` with d loss / d param.
// Gradients accumulate across calls until zero_grad.
void backward(const Tensor& loss);

// --- primitives ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& a, const Tensor& bias);  // bias is [1, cols]
Tensor sub(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, const Tensor& s);  // s is [1,1], broadcast
Tensor mul_scalar(const Tensor& a, const Tensor& s);  // s is [1,1], broadcast
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, int r0, int r1);
Tensor slice_cols(const Tensor& a, int c0, int c1);
Tensor row(const Tensor& a, int r);
Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids);
// Collects arbitrary elements (flat row-major indices) into a [1, n] row.
Tensor gather(const Tensor& a, const std::vector<int>& flat_indices);
Tensor mean_rows(const Tensor& a);  // [m,n] -> [1,n]
Tensor sum_all(const Tensor& a);    // -> [1,1]
Tensor mean_all(const Tensor& a);   // -> [1,1]
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);
Tensor dropout(const Tensor& a, double p, Rng& rng, bool training);

// x W y^T pair scores: [m,d] x [d,d] x [n,d] -> [m,n].
Tensor bilinear(const Tensor& x, const Tensor& w, const Tensor& y);

// Standard multi-head self-attention block over x [n, d]; the projection
// weights are [d, d] with [1, d] biases.
Tensor multi_head_attention(const Tensor& x, const Tensor& wq, const Tensor& bq,
                            const Tensor& wk, const Tensor& bk,
                            const Tensor& wv, const Tensor& bv,
                            const Tensor& wo, const Tensor& bo, int n_heads);

// --- losses (numerically stable, computed from logits) ----------------------

// Masked mean of per-element binary cross-entropy. `targets` must be 0/1 and
// shape-match `logits`; an empty `mask` means all elements count. All-masked
// input yields zero loss.
Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets,
                       const std::vector<double>& mask = {});

// Mean negative log-softmax of the target class; logits [n, C].
Tensor ce_with_logits(const Tensor& logits, const std::vector<int>& targets);

}  // namespace docie

#endif  // DOCIE_TENSOR_HPP_
