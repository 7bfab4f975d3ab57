#pragma once

#include "n2r/common.hpp"

#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace n2r::nn {

using Shape = std::vector<int>;

inline std::size_t numel(Shape const &s)
{
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, [](std::size_t a, int b) { return a * b; });
}
std::string to_string(Shape const &s);

template <typename T>
struct Node
{
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad; // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads self.grad and accumulates into the parents' grads.
  std::function<void(Node &self)> backward;

  std::vector<T> &grad_buffer()
  {
    if (grad.empty()) { grad.assign(value.size(), T{0}); }
    return grad;
  }
};

// Gradient recording is on by default; NoGrad switches it off for the
// current thread (evaluation and stop-gradient branches).
class NoGrad
{
public:
  NoGrad();
  ~NoGrad();
  NoGrad(NoGrad const &) = delete;
  NoGrad &operator=(NoGrad const &) = delete;
  static bool active();

private:
  bool prev_;
};

// Shared handle to a node of the dynamic computation graph. Copies alias
// the same storage; use clone() for a deep copy.
template <typename T>
class Tensor
{
public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(T v, bool requires_grad = false);

  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] Shape const &shape() const { return node_->shape; }
  [[nodiscard]] int dim(int i) const { return node_->shape.at(static_cast<std::size_t>(i)); }
  [[nodiscard]] std::size_t numel() const { return node_->value.size(); }
  [[nodiscard]] std::span<T const> data() const { return node_->value; }
  [[nodiscard]] std::span<T> mutable_data() { return node_->value; }
  [[nodiscard]] T item() const;

  [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
  [[nodiscard]] bool has_grad() const { return !node_->grad.empty(); }
  [[nodiscard]] std::span<T const> grad() const { return node_->grad; }
  [[nodiscard]] std::span<T> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.clear(); }

  // New leaf with a copy of the values and no history.
  [[nodiscard]] Tensor detach() const;
  [[nodiscard]] Tensor clone() const;

  [[nodiscard]] std::shared_ptr<Node<T>> const &node() const { return node_; }
  static Tensor from_node(std::shared_ptr<Node<T>> n)
  {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

private:
  std::shared_ptr<Node<T>> node_;
};

// Reverse-mode sweep from a scalar. Gradients accumulate into every leaf
// that requires them.
template <typename T>
void backward(Tensor<T> const &loss);

// ---------------------------------------------------------------- operations
// Single-instance layout: activations are [C, H, W].

// 'Same' cross-correlation with an odd square kernel k[Co, Ci, K, K],
// stride 1, zero padding K/2, plus bias b[Co].
template <typename T>
Tensor<T> conv2d(Tensor<T> const &x, Tensor<T> const &k, Tensor<T> const &b);

// Stride-2 transposed convolution, kernel k[Ci, Co, 2, 2], bias b[Co].
template <typename T>
Tensor<T> conv_transpose2x2(Tensor<T> const &x, Tensor<T> const &k, Tensor<T> const &b);

template <typename T>
Tensor<T> instance_norm(Tensor<T> const &x, Tensor<T> const &gamma, Tensor<T> const &beta, double eps = 1e-5);

template <typename T>
Tensor<T> leaky_relu(Tensor<T> const &x, double slope = 0.2);

// 2x2 average pooling.
template <typename T>
Tensor<T> avg_pool2(Tensor<T> const &x);

template <typename T>
Tensor<T> concat_channels(Tensor<T> const &a, Tensor<T> const &b);

template <typename T>
Tensor<T> add(Tensor<T> const &a, Tensor<T> const &b);

template <typename T>
Tensor<T> mul(Tensor<T> const &a, Tensor<T> const &b);

template <typename T>
Tensor<T> scale(Tensor<T> const &a, double s);

template <typename T>
Tensor<T> sum(Tensor<T> const &a);

// mean over pixels of sqrt(dre^2 + dim^2 + eps^2); inputs are [2, H, W].
template <typename T>
Tensor<T> complex_l1(Tensor<T> const &pred, Tensor<T> const &target, double eps = 1e-8);

} // namespace n2r::nn
