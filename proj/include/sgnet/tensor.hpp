#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sgnet/common.hpp"
#include "sgnet/random.hpp"

namespace sgnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

template <typename S>
struct Node {
  Shape shape;
  std::shared_ptr<std::vector<S>> values;
  std::vector<S> grad;  // sized lazily on first contribution
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // empty for leaves

  std::size_t size() const { return values ? values->size() : 0; }
  std::vector<S>& ensure_grad() {
    if (grad.empty()) grad.assign(size(), S(0));
    return grad;
  }
};

}  // namespace detail

// Dense tensor participating in a per-pass computation graph. Copying the
// handle shares the node. The tape lives as long as handles keep it alive
// and is discarded when the last handle goes away.
template <typename S>
class Tensor {
 public:
  using NodePtr = std::shared_ptr<detail::Node<S>>;

  Tensor() = default;

  static Tensor leaf(Shape shape, std::vector<S> vals, bool requires_grad = false);
  static Tensor constant(Shape shape, std::vector<S> vals) {
    return leaf(std::move(shape), std::move(vals), false);
  }
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(S v) { return leaf({1}, {v}, false); }
  static Tensor from_node(NodePtr n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->size(); }
  std::size_t rows() const { return node_->shape.size() == 2 ? node_->shape[0] : 1; }
  std::size_t cols() const { return node_->shape.back(); }

  std::span<const S> values() const { return {node_->values->data(), node_->size()}; }
  // In-place access to storage; meant for leaves between passes (parameter
  // updates, test setup). Mutating mid-graph invalidates the tape.
  std::span<S> values_mut() { return {node_->values->data(), node_->size()}; }

  S item() const {
    check_contract(node_ && node_->size() == 1, "item() requires a size-1 tensor");
    return (*node_->values)[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  std::span<const S> grad() const { return {node_->grad.data(), node_->grad.size()}; }
  std::span<S> grad_mut() {
    auto& g = node_->ensure_grad();
    return {g.data(), g.size()};
  }
  void zero_grad() { node_->grad.clear(); }

  // Fresh leaf node sharing this tensor's value storage. Workers use this to
  // evaluate against shared read-only parameters while accumulating their
  // own gradients.
  Tensor leaf_view(bool requires_grad) const;
  Tensor detach() const { return leaf_view(false); }

  detail::Node<S>* node() const { return node_.get(); }
  NodePtr node_ptr() const { return node_; }

 private:
  NodePtr node_;
};

// Reverse-mode sweep from a scalar loss. Leaf grads accumulate across calls
// until zero_grad().
template <typename S>
void backward(const Tensor<S>& loss);

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> transpose(const Tensor<S>& a);
template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> scale(const Tensor<S>& a, double c);
template <typename S>
Tensor<S> add_scalar(const Tensor<S>& a, double c);
// m: [R x C], v: [C]; adds v to every row of m.
template <typename S>
Tensor<S> add_rowwise(const Tensor<S>& m, const Tensor<S>& v);
template <typename S>
Tensor<S> relu(const Tensor<S>& a);
template <typename S>
Tensor<S> tanh_op(const Tensor<S>& a);
template <typename S>
Tensor<S> sigmoid(const Tensor<S>& a);
template <typename S>
Tensor<S> exp_op(const Tensor<S>& a);
template <typename S>
Tensor<S> sqrt_op(const Tensor<S>& a);
template <typename S>
Tensor<S> softmax_lastaxis(const Tensor<S>& a);
template <typename S>
Tensor<S> concat_lastaxis(const std::vector<Tensor<S>>& parts);
template <typename S>
Tensor<S> concat_lastaxis(const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> slice_lastaxis(const Tensor<S>& a, std::size_t start, std::size_t len);
template <typename S>
Tensor<S> slice_rows(const Tensor<S>& a, std::size_t start, std::size_t len);
// v: [1 x C] replicated to [n x C].
template <typename S>
Tensor<S> tile_rows(const Tensor<S>& v, std::size_t n);
// rows: each [1 x C], stacked to [N x C].
template <typename S>
Tensor<S> stack_rows(const std::vector<Tensor<S>>& rows);
template <typename S>
Tensor<S> reshape(const Tensor<S>& a, Shape shape);
template <typename S>
Tensor<S> mean_all(const Tensor<S>& a);
template <typename S>
Tensor<S> sum_all(const Tensor<S>& a);

// 1-D convolution over the leading (temporal) axis.
// x: [L x Cin], w: [k x Cin x Cout], b: [Cout].
template <typename S>
Tensor<S> conv1d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b,
                 std::size_t stride, std::size_t pad);
// Transposed counterpart; out_pad extends the output by 0 or 1 step.
template <typename S>
Tensor<S> deconv1d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b,
                   std::size_t stride, std::size_t pad, std::size_t out_pad);

template <typename S>
Tensor<S> affine(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  return add_rowwise(matmul(x, w), b);
}

template <typename S>
Tensor<S> glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out,
                         RandomStream& rng, bool requires_grad = true);

template <typename S>
bool all_finite(std::span<const S> v);

// Test hook: when enabled, the tanh backward rule is deliberately wrong so
// gradient-check harnesses can prove they detect a bad rule.
void testing_inject_backward_fault(bool enable);
bool testing_backward_fault_enabled();

}  // namespace sgnet
