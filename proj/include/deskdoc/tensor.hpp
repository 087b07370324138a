#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "deskdoc/common.hpp"

namespace deskdoc {

// Dense row-major tensor node with reverse-mode autodiff bookkeeping.
// Built define-by-run: every op allocates a fresh node holding the result
// plus edges to its inputs; backward() walks the graph once and then frees
// the edges. Leaves (parameters) keep their gradient buffers.
template <typename S>
struct TensorNode {
  std::vector<int> shape;
  std::vector<S> values;
  bool requires_grad = false;
  std::vector<S> grad;  // allocated on demand, same length as values

  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  void ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), S(0));
  }
};

template <typename S>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor from_values(std::vector<int> shape, std::vector<S> values,
                            bool requires_grad = false);
  static Tensor scalar(S value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape[i]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->values.size()); }

  const std::vector<S>& values() const { return node_->values; }
  std::vector<S>& mutable_values() { return node_->values; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<S>& grad() const { return node_->grad; }
  std::vector<S>& mutable_grad() { return node_->grad; }
  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.assign(node_->values.size(), S(0));
  }

  S item() const;

  std::shared_ptr<TensorNode<S>> node() const { return node_; }
  static Tensor wrap(std::shared_ptr<TensorNode<S>> n) { return Tensor(std::move(n)); }

 private:
  explicit Tensor(std::shared_ptr<TensorNode<S>> n) : node_(std::move(n)) {}
  std::shared_ptr<TensorNode<S>> node_;
};

std::string shape_to_string(const std::vector<int>& shape);

// ---- differentiable ops ----------------------------------------------------

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b);  // [m,k]x[k,n]

template <typename S>
Tensor<S> transpose(const Tensor<S>& a);  // 2-d

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);  // same shape

// mat[m,n] + row broadcast over every row; row is [n] or [1,n].
template <typename S>
Tensor<S> add_row(const Tensor<S>& mat, const Tensor<S>& row);

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S c);

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b);  // elementwise

template <typename S>
Tensor<S> sum(const Tensor<S>& a);  // scalar

template <typename S>
Tensor<S> relu(const Tensor<S>& a);

template <typename S>
Tensor<S> softmax(const Tensor<S>& a, int axis);

// Row-wise softmax over the last axis of a [q,k] matrix where mask[i*k+j]
// marks the keys row i may attend to. Rows with no valid key come out as
// exact zeros (and propagate zero gradient).
template <typename S>
Tensor<S> masked_softmax_rows(const Tensor<S>& a, const std::vector<std::uint8_t>& mask);

template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias, S eps);

// Non-overlapping 2x2/stride-2 patch projection: image [c,h,w] with even h,w,
// kernel [d,c,2,2], bias [d] -> [d,h/2,w/2].
template <typename S>
Tensor<S> conv2x2(const Tensor<S>& image, const Tensor<S>& kernel, const Tensor<S>& bias);

// [c,h,w] -> [h*w, c] with rows in raster order.
template <typename S>
Tensor<S> channels_to_rows(const Tensor<S>& x);

template <typename S>
Tensor<S> embedding_lookup(const Tensor<S>& table, const std::vector<int>& ids);

// Like embedding_lookup but id == rows(table) selects a fixed all-zero row
// that never receives gradient. Used for the masked spatial features.
template <typename S>
Tensor<S> embedding_lookup_or_zero(const Tensor<S>& table, const std::vector<int>& ids);

template <typename S>
Tensor<S> gather_rows(const Tensor<S>& x, const std::vector<int>& idx);

template <typename S>
Tensor<S> slice_rows(const Tensor<S>& x, int start, int count);

template <typename S>
Tensor<S> slice_cols(const Tensor<S>& x, int start, int count);

template <typename S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& parts);

template <typename S>
Tensor<S> concat_cols(const std::vector<Tensor<S>>& parts);

// Mean negative log-softmax of logits [n,c] at the target classes, skipping
// rows whose target equals ignore_index. Every row ignored -> exact 0 loss
// with zero gradient.
template <typename S>
Tensor<S> cross_entropy(const Tensor<S>& logits, const std::vector<int>& targets,
                        int ignore_index = -1);

// Reverse-mode sweep from a scalar loss. Frees the graph; repeated forward +
// backward passes accumulate into leaf gradients until zero_grad().
template <typename S>
void backward(const Tensor<S>& loss);

// ---- optimizer -------------------------------------------------------------

template <typename S>
struct AdamWOptions {
  S lr = S(5e-5);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
  S weight_decay = S(0);
  S clip_norm = S(1.0);  // global gradient norm clip; <= 0 disables
};

// AdamW with bias correction and decoupled weight decay. Gradients are
// clipped to clip_norm (global norm over all parameters) before the moment
// updates. A step with any non-finite gradient is refused: returns false and
// leaves parameters, moments and the step counter untouched.
template <typename S>
class AdamW {
 public:
  explicit AdamW(AdamWOptions<S> options) : options_(options) {}

  bool step(std::vector<Tensor<S>>& params);

  std::int64_t step_count() const { return t_; }
  AdamWOptions<S>& options() { return options_; }
  const AdamWOptions<S>& options() const { return options_; }

 private:
  struct Slot {
    std::vector<S> m, v;
  };
  AdamWOptions<S> options_;
  std::vector<Slot> slots_;
  std::int64_t t_ = 0;
};

}  // namespace deskdoc
