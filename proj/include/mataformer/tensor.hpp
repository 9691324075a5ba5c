#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mata {

// Dense row-major tensor of 64-bit floats with reverse-mode differentiation.
// Operations record a dynamic tape; Tensor::backward() on a scalar output
// accumulates gradients into every reachable leaf. A tensor is a cheap handle
// (shared node); values are treated as immutable once an op has consumed them.
// One tape is single-threaded; independent tapes may run in parallel.
class Tensor {
 public:
  struct Node {
    std::vector<size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated lazily, same length as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;  // reads grad, scatters to parents

    void ensure_grad() {
      if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
  };

  Tensor() = default;

  static Tensor zeros(std::vector<size_t> shape);
  static Tensor full(std::vector<size_t> shape, double v);
  static Tensor from_data(std::vector<size_t> shape, std::vector<double> data);
  static Tensor scalar(double v);
  // leaf tensor participating in gradient accumulation
  static Tensor param(std::vector<size_t> shape, std::vector<double> data);

  bool defined() const { return node_ != nullptr; }
  const std::vector<size_t>& shape() const { return node_->shape; }
  size_t ndim() const { return node_->shape.size(); }
  size_t size() const { return node_->value.size(); }
  size_t dim(size_t i) const { return node_->shape[i]; }

  const std::vector<double>& data() const { return node_->value; }
  // in-place mutation for leaves (optimizer updates, finite differences)
  std::vector<double>& data_mut() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  const std::vector<double>& grad() const;
  void zero_grad();

  double item() const;
  double at(std::initializer_list<size_t> idx) const;

  // reverse pass from a scalar output; seeds d(out)/d(out) = 1
  void backward() const;

  std::shared_ptr<Node> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;

  friend Tensor make_op(std::vector<size_t> shape, std::vector<double> value,
                        std::vector<Tensor> parents,
                        std::function<void(Tensor::Node&)> backward_fn);
};

size_t shape_numel(const std::vector<size_t>& shape);

// --- elementwise binary ops with numpy-style right-aligned broadcasting ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, double b);
Tensor sub(const Tensor& a, double b);
Tensor sub(double a, const Tensor& b);
Tensor mul(const Tensor& a, double b);
Tensor div(const Tensor& a, double b);
Tensor neg(const Tensor& a);

// --- elementwise unary ---
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
// zero gradient outside [lo, hi]; boundary values pass gradient through
Tensor clamp(const Tensor& a, double lo, double hi);

// --- linear algebra (2-D) ---
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor slice_cols(const Tensor& a, size_t start, size_t count);
Tensor concat_cols(const std::vector<Tensor>& parts);

// --- reductions / structure ---
Tensor sum(const Tensor& a);
Tensor reshape(const Tensor& a, std::vector<size_t> shape);
// stack 2-D tensors [S_b, C] into [B, S_max, C], zero padded
Tensor stack_rows_padded(const std::vector<Tensor>& rows, size_t s_max);

// numerically stabilized softmax over the last dimension. -inf entries are
// legal masks; an all -inf slice yields an all zero slice. NaN input throws.
Tensor softmax_lastdim(const Tensor& a);

// y = x / sqrt(mean(x^2) + eps) * gain over the last dimension
Tensor rmsnorm(const Tensor& x, const Tensor& gain, double eps);

}  // namespace mata
