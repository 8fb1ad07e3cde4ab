#include "sgnet/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace sgnet {

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return s.empty() ? 0 : n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

namespace {

std::atomic<bool> g_backward_fault{false};

template <typename S>
using NodePtr = std::shared_ptr<detail::Node<S>>;

template <typename S>
NodePtr<S> make_node(Shape shape, std::size_t n) {
  auto node = std::make_shared<detail::Node<S>>();
  node->shape = std::move(shape);
  node->values = std::make_shared<std::vector<S>>(n, S(0));
  return node;
}

template <typename S>
NodePtr<S> make_op(Shape shape, std::vector<NodePtr<S>> parents) {
  const std::size_t n = shape_size(shape);
  auto node = make_node<S>(std::move(shape), n);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  node->requires_grad = rg;
  node->parents = std::move(parents);
  return node;
}

template <typename S>
void require_defined(const Tensor<S>& t, const char* who) {
  check_contract(t.defined(), std::string(who) + ": undefined tensor");
}

template <typename S>
void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* who) {
  check_dim(a.shape() == b.shape(), std::string(who) + ": shape mismatch " +
                                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Elementwise unary helper: y = f(x), dx += dfdx(x, y) * dy.
template <typename S, typename F, typename DF>
Tensor<S> unary_op(const Tensor<S>& a, F f, DF dfdx) {
  require_defined(a, "unary op");
  auto node = make_op<S>(a.shape(), {a.node_ptr()});
  const auto& x = *a.node()->values;
  auto& y = *node->values;
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  if (node->requires_grad) {
    node->backprop = [dfdx](detail::Node<S>& self) {
      auto& p = *self.parents[0];
      if (!p.requires_grad) return;
      auto& pg = p.ensure_grad();
      const auto& x = *p.values;
      const auto& y = *self.values;
      for (std::size_t i = 0; i < pg.size(); ++i)
        pg[i] += self.grad[i] * dfdx(x[i], y[i]);
    };
  }
  return Tensor<S>::from_node(node);
}

}  // namespace

void testing_inject_backward_fault(bool enable) { g_backward_fault.store(enable); }
bool testing_backward_fault_enabled() { return g_backward_fault.load(); }

template <typename S>
Tensor<S> Tensor<S>::leaf(Shape shape, std::vector<S> vals, bool requires_grad) {
  check_dim(shape_size(shape) == vals.size(),
            "leaf: " + shape_str(shape) + " does not hold " + std::to_string(vals.size()) +
                " values");
  auto node = std::make_shared<detail::Node<S>>();
  node->shape = std::move(shape);
  node->values = std::make_shared<std::vector<S>>(std::move(vals));
  node->requires_grad = requires_grad;
  return from_node(node);
}

template <typename S>
Tensor<S> Tensor<S>::zeros(Shape shape, bool requires_grad) {
  std::size_t n = shape_size(shape);
  return leaf(std::move(shape), std::vector<S>(n, S(0)), requires_grad);
}

template <typename S>
Tensor<S> Tensor<S>::leaf_view(bool requires_grad) const {
  auto node = std::make_shared<detail::Node<S>>();
  node->shape = node_->shape;
  node->values = node_->values;  // shared storage, independent grad
  node->requires_grad = requires_grad;
  return from_node(node);
}

template <typename S>
void backward(const Tensor<S>& loss) {
  check_contract(loss.defined(), "backward: undefined tensor");
  check_contract(loss.size() == 1, "backward: loss must be scalar, got " +
                                       shape_str(loss.shape()));
  using Node = detail::Node<S>;
  Node* root = loss.node();
  if (!root->requires_grad) return;

  // Iterative postorder DFS; parents visited in declaration order so the
  // sweep order (and float accumulation order) is identical across runs.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  visited.insert(root);
  stack.emplace_back(root, 0);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && !n->grad.empty()) n->backprop(*n);
  }
}

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  check_dim(a.shape().size() == 2 && b.shape().size() == 2,
            "matmul: rank-2 tensors required, got " + shape_str(a.shape()) + " and " +
                shape_str(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  const std::size_t k2 = b.shape()[0], n = b.shape()[1];
  check_dim(k == k2, "matmul: inner extents disagree, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  auto node = make_op<S>({m, n}, {a.node_ptr(), b.node_ptr()});
  {
    const S* av = a.node()->values->data();
    const S* bv = b.node()->values->data();
    S* cv = node->values->data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < k; ++t)
          acc += static_cast<double>(av[i * k + t]) * static_cast<double>(bv[t * n + j]);
        cv[i * n + j] = static_cast<S>(acc);
      }
    }
  }
  if (node->requires_grad) {
    node->backprop = [m, k, n](detail::Node<S>& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      const S* g = self.grad.data();
      if (pa.requires_grad) {
        auto& ga = pa.ensure_grad();
        const S* bv = pb.values->data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t t = 0; t < k; ++t) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j)
              acc += static_cast<double>(g[i * n + j]) * static_cast<double>(bv[t * n + j]);
            ga[i * k + t] += static_cast<S>(acc);
          }
      }
      if (pb.requires_grad) {
        auto& gb = pb.ensure_grad();
        const S* av = pa.values->data();
        for (std::size_t t = 0; t < k; ++t)
          for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i)
              acc += static_cast<double>(av[i * k + t]) * static_cast<double>(g[i * n + j]);
            gb[t * n + j] += static_cast<S>(acc);
          }
      }
    };
  }
  return Tensor<S>::from_node(node);
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& a) {
  require_defined(a, "transpose");
  check_dim(a.shape().size() == 2, "transpose: rank-2 tensor required");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  auto node = make_op<S>({c, r}, {a.node_ptr()});
  const S* x = a.node()->values->data();
  S* y = node->values->data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[j * r + i] = x[i * c + j];
  if (node->requires_grad) {
    node->backprop = [r, c](detail::Node<S>& self) {
      auto& p = *self.parents[0];
      if (!p.requires_grad) return;
      auto& pg = p.ensure_grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) pg[i * c + j] += self.grad[j * r + i];
    };
  }
  return Tensor<S>::from_node(node);
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  require_same_shape(a, b, "add");
  auto node = make_op<S>(a.shape(), {a.node_ptr(), b.node_ptr()});
  const auto& x = *a.node()->values;
  const auto& y = *b.node()->values;
  auto& z = *node->values;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + y[i];
  if (node->requires_grad) {
    node->backprop = [](detail::Node<S>& self) {
      for (auto& pp : self.parents) {
        auto& p = *pp;
        if (!p.requires_grad) continue;
        auto& pg = p.ensure_grad();
        for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i];
      }
    };
  }
  return Tensor<S>::from_node(node);
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  require_defined(a, "sub");
  require_defined(b, "sub");
  require_same_shape(a, b, "sub");
  auto node = make_op<S>(a.shape(), {a.node_ptr(), b.node_ptr()});
  const auto& x = *a.node()->values;
  const auto& y = *b.node()->values;
  auto& z = *node->values;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] - y[i];
  if (node->requires_grad) {
    node->backprop = [](detail::Node<S>& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      if (pa.requires_grad) {
        auto& g = pa.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (pb.requires_grad) {
        auto& g = pb.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
      }
    };
  }
  return Tensor<S>::from_node(node);
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  require_same_shape(a, b, "mul");
  auto node = make_op<S>(a.shape(), {a.node_ptr(), b.node_ptr()});
  const auto& x = *a.node()->values;
  const auto& y = *b.node()->values;
  auto& z = *node->values;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * y[i];
  if (node->requires_grad) {
    node->backprop = [](detail::Node<S>& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      if (pa.requires_grad) {
        auto& g = pa.ensure_grad();
        const auto& y = *pb.values;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y[i];
      }
      if (pb.requires_grad) {
        auto& g = pb.ensure_grad();
        const auto& x = *pa.values;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x[i];
      }
    };
  }
  return Tensor<S>::from_node(node);
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, double c) {
  const S cs = static_cast<S>(c);
  return unary_op(
      a, [cs](S x) { return static_cast<S>(x * cs); },
      [cs](S, S) { return cs; });
}

template <typename S>
Tensor<S> add_scalar(const Tensor<S>& a, double c) {
  const S cs = static_cast<S>(c);
  return unary_op(
      a, [cs](S x) { return static_cast<S>(x + cs); }, [](S, S) { return S(1); });
}

template <typename S>
Tensor<S> add_rowwise(const Tensor<S>& m, const Tensor<S>& v) {
  require_defined(m, "add_rowwise");
  require_defined(v, "add_rowwise");
  check_dim(m.shape().size() == 2 && v.shape().size() == 1 && v.shape()[0] == m.shape()[1],
            "add_rowwise: need [RxC] and [C], got " + shape_str(m.shape()) + " and " +
                shape_str(v.shape()));
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  auto node = make_op<S>({r, c}, {m.node_ptr(), v.node_ptr()});
  const S* x = m.node()->values->data();
  const S* bv = v.node()->values->data();
  S* y = node->values->data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] = x[i * c + j] + bv[j];
  if (node->requires_grad) {
    node->backprop = [r, c](detail::Node<S>& self) {
      auto& pm = *self.parents[0];
      auto& pv = *self.parents[1];
      if (pm.requires_grad) {
        auto& g = pm.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (pv.requires_grad) {
        auto& g = pv.ensure_grad();
        for (std::size_t j = 0; j < c; ++j) {
          double acc = 0.0;
          for (std::size_t i = 0; i < r; ++i)
            acc += static_cast<double>(self.grad[i * c + j]);
          g[j] += static_cast<S>(acc);
        }
      }
    };
  }
  return Tensor<S>::from_node(node);
}

template <typename S>
Tensor<S> relu(const Tensor<S>& a) {
  return unary_op(
      a, [](S x) { return x > S(0) ? x : S(0); },
      [](S x, S) { return x > S(0) ? S(1) : S(0); });
}

template <typename S>
Tensor<S> tanh_op(const Tensor<S>& a) {
  return unary_op(
      a, [](S x) { return static_cast<S>(std::tanh(static_cast<double>(x))); },
      [](S, S y) {
        S d = S(1) - y * y;
        if (g_backward_fault.load(std::memory_order_relaxed)) d *= S(1.01);
        return d;
      });
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& a) {
  return unary_op(
      a,
      [](S x) {
        return static_cast<S>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
      },
      [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
Tensor<S> exp_op(const Tensor<S>& a) {
  return unary_op(
      a, [](S x) { return static_cast<S>(std::exp(static_cast<double>(x))); },
      [](S, S y) { return y; });
}

template <typename S>
Tensor<S> sqrt_op(const Tensor<S>& a) {
  return unary_op(
      a, [](S x) { return static_cast<S>(std::sqrt(static_cast<double>(x))); },
      [](S, S y) { return S(0.5) / y; });
}

template <typename S>
Tensor<S> softmax_lastaxis(const Tensor<S>& a) {
  require_defined(a, "softmax_lastaxis");
  check_dim(!a.shape().empty() && a.shape().back() > 0,
            "softmax_lastaxis: empty axis");
  const std::size_t c = a.shape().back();
  const std::size_t slices = a.size() / c;
  auto node = make_op<S>(a.shape(), {a.node_ptr()});
  const S* x = a.node()->values->data();
  S* y = node->values->data();
  for (std::size_t s = 0; s < slices; ++s) {
    const S* xs = x + s * c;
    S* ys = y + s * c;
    S mx = xs[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, xs[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      double e = std::exp(static_cast<double>(xs[j] - mx));
      ys[j] = static_cast<S>(e);
      denom += e;
    }
    for (std::size_t j = 0; j < c; ++j)
      ys[j] = static_cast<S>(static_cast<double>(ys[j]) / denom);
  }
  if (node->requires_grad) {
    node->backprop = [c, slices](detail::Node<S>& self) {
      auto& p = *self.parents[0];
      if (!p.requires_grad) return;
      auto& pg = p.ensure_grad();
      const S* y = self.values->data();
      const S* g = self.grad.data();
      for (std::size_t s = 0; s < slices; ++s) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j)
          dot += static_cast<double>(g[s * c + j]) * static_cast<double>(y[s * c + j]);
        for (std::size_t j = 0; j < c; ++j)
          pg[s * c + j] += static_cast<S>(
              static_cast<double>(y[s * c + j]) *
              (static_cast<double>(g[s * c + j]) - dot));
      }
    };
  }
  return Tensor<S>::from_node(node);
}

template <typename S>
Tensor<S> concat_lastaxis(const std::vector<Tensor<S>>& parts) {
  check_contract(!parts.empty(), "concat_lastaxis: no inputs");
  for (const auto& p : parts) require_defined(p, "concat_lastaxis");
  Shape base = parts[0].shape();
  std::size_t total_c = 0;
  for (const auto& p : parts) {
    check_dim(p.shape().size() == base.size(), "concat_lastaxis: rank mismatch");
    for (std::size_t d = 0; d + 1 < base.size(); ++d)
      check_dim(p.shape()[d] == base[d], "concat_lastaxis: leading extent mismatch");
    total_c += p.shape().back();
  }
  Shape out = base;
  out.back() = total_c;
  std::vector<NodePtr<S>> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) parents.push_back(p.node_ptr());
  auto node = make_op<S>(out, std::move(parents));
  const std::size_t slices = shape_size(out) / total_c;
  std::vector<std::size_t> widths;
  widths.reserve(parts.size());
  for (const auto& p : parts) widths.push_back(p.shape().back());
  {
    S* y = node->values->data();
    for (std::size_t s = 0; s < slices; ++s) {
      std::size_t off = 0;
      for (std::size_t k = 0; k < parts.size(); ++k) {
        const S* x = parts[k].node()->values->data();
        for (std::size_t j = 0; j < widths[k]; ++j)
          y[s * total_c + off + j] = x[s * widths[k] + j];
        off += widths[k];
      }
    }
  }
  if (node->requires_grad) {
    node->backprop = [slices, total_c, widths](detail::Node<S>& self) {
      std::size_t off = 0;
      for (std::size_t k = 0; k < self.parents.size(); ++k) {
        auto& p = *self.parents[k];
        const std::size_t w = widths[k];
        if (p.requires_grad) {
          auto& pg = p.ensure_grad();
          for (std::size_t s = 0; s < slices; ++s)
            for (std::size_t j = 0; j < w; ++j)
              pg[s * w + j] += self.grad[s * total_c + off + j];
        }
        off += w;
      }
    };
  }
  return Tensor<S>::from_node(node);
}

template <typename S>
Tensor<S> concat_lastaxis(const Tensor<S>& a, const Tensor<S>& b) {
  return concat_lastaxis(std::vector<Tensor<S>>{a, b});
}

template <typename S>
Tensor<S> slice_lastaxis(const Tensor<S>& a, std::size_t start, std::size_t len) {
  require_defined(a, "slice_lastaxis");
  const std::size_t c = a.shape().back();
  check_dim(start + len <= c && len > 0, "slice_lastaxis: range [" + std::to_string(start) +
                                             ", " + std::to_string(start + len) +
                                             ") out of axis " + std::to_string(c));
  Shape out = a.shape();
  out.back() = len;
  auto node = make_op<S>(out, {a.node_ptr()});
  const std::size_t slices = a.size() / c;
  const S* x = a.node()->values->data();
  S* y = node->values->data();
  for (std::size_t s = 0; s < slices; ++s)
    for (std::size_t j = 0; j < len; ++j) y[s * len + j] = x[s * c + start + j];
  if (node->requires_grad) {
    node->backprop = [slices, c, start, len](detail::Node<S>& self) {
      auto& p = *self.parents[0];
      if (!p.requires_grad) return;
      auto& pg = p.ensure_grad();
      for (std::size_t s = 0; s < slices; ++s)
        for (std::size_t j = 0; j < len; ++j)
          pg[s * c + start + j] += self.grad[s * len + j];
    };
  }
  return Tensor<S>::from_node(node);
}

template <typename S>
Tensor<S> slice_rows(const Tensor<S>& a, std::size_t start, std::size_t len) {
  require_defined(a, "slice_rows");
  check_dim(a.shape().size() == 2, "slice_rows: rank-2 tensor required");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  check_dim(start + len <= r && len > 0, "slice_rows: range [" + std::to_string(start) + ", " +
                                             std::to_string(start + len) + ") out of " +
                                             std::to_string(r) + " rows");
  auto node = make_op<S>({len, c}, {a.node_ptr()});
  const S* x = a.node()->values->data();
  S* y = node->values->data();
  for (std::size_t i = 0; i < len * c; ++i) y[i] = x[start * c + i];
  if (node->requires_grad) {
    node->backprop = [start, len, c](detail::Node<S>& self) {
      auto& p = *self.parents[0];
      if (!p.requires_grad) return;
      auto& pg = p.ensure_grad();
      for (std::size_t i = 0; i < len * c; ++i) pg[start * c + i] += self.grad[i];
    };
  }
  return Tensor<S>::from_node(node);
}

template <typename S>
Tensor<S> tile_rows(const Tensor<S>& v, std::size_t n) {
  require_defined(v, "tile_rows");
  check_dim(v.shape().size() == 2 && v.shape()[0] == 1, "tile_rows: need [1xC]");
  check_contract(n >= 1, "tile_rows: n must be >= 1");
  const std::size_t c = v.shape()[1];
  auto node = make_op<S>({n, c}, {v.node_ptr()});
  const S* x = v.node()->values->data();
  S* y = node->values->data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] = x[j];
  if (node->requires_grad) {
    node->backprop = [n, c](detail::Node<S>& self) {
      auto& p = *self.parents[0];
      if (!p.requires_grad) return;
      auto& pg = p.ensure_grad();
      for (std::size_t j = 0; j < c; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          acc += static_cast<double>(self.grad[i * c + j]);
        pg[j] += static_cast<S>(acc);
      }
    };
  }
  return Tensor<S>::from_node(node);
}

template <typename S>
Tensor<S> stack_rows(const std::vector<Tensor<S>>& rows) {
  check_contract(!rows.empty(), "stack_rows: no inputs");
  const std::size_t c = rows[0].cols();
  for (const auto& r : rows) {
    require_defined(r, "stack_rows");
    check_dim(r.shape().size() == 2 && r.shape()[0] == 1 && r.shape()[1] == c,
              "stack_rows: every row must be [1x" + std::to_string(c) + "]");
  }
  std::vector<NodePtr<S>> parents;
  parents.reserve(rows.size());
  for (const auto& r : rows) parents.push_back(r.node_ptr());
  auto node = make_op<S>({rows.size(), c}, std::move(parents));
  S* y = node->values->data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const S* x = rows[i].node()->values->data();
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] = x[j];
  }
  if (node->requires_grad) {
    node->backprop = [c](detail::Node<S>& self) {
      for (std::size_t i = 0; i < self.parents.size(); ++i) {
        auto& p = *self.parents[i];
        if (!p.requires_grad) continue;
        auto& pg = p.ensure_grad();
        for (std::size_t j = 0; j < c; ++j) pg[j] += self.grad[i * c + j];
      }
    };
  }
  return Tensor<S>::from_node(node);
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& a, Shape shape) {
  require_defined(a, "reshape");
  check_dim(shape_size(shape) == a.size(), "reshape: " + shape_str(a.shape()) +
                                               " cannot become " + shape_str(shape));
  auto node = make_op<S>(std::move(shape), {a.node_ptr()});
  *node->values = *a.node()->values;
  if (node->requires_grad) {
    node->backprop = [](detail::Node<S>& self) {
      auto& p = *self.parents[0];
      if (!p.requires_grad) return;
      auto& pg = p.ensure_grad();
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i];
    };
  }
  return Tensor<S>::from_node(node);
}

template <typename S>
Tensor<S> sum_all(const Tensor<S>& a) {
  require_defined(a, "sum_all");
  auto node = make_op<S>({1}, {a.node_ptr()});
  const auto& x = *a.node()->values;
  double acc = 0.0;
  for (S v : x) acc += static_cast<double>(v);
  (*node->values)[0] = static_cast<S>(acc);
  if (node->requires_grad) {
    node->backprop = [](detail::Node<S>& self) {
      auto& p = *self.parents[0];
      if (!p.requires_grad) return;
      auto& pg = p.ensure_grad();
      const S g = self.grad[0];
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g;
    };
  }
  return Tensor<S>::from_node(node);
}

template <typename S>
Tensor<S> mean_all(const Tensor<S>& a) {
  require_defined(a, "mean_all");
  check_dim(a.size() > 0, "mean_all: empty tensor");
  const std::size_t n = a.size();
  auto node = make_op<S>({1}, {a.node_ptr()});
  const auto& x = *a.node()->values;
  double acc = 0.0;
  for (S v : x) acc += static_cast<double>(v);
  (*node->values)[0] = static_cast<S>(acc / static_cast<double>(n));
  if (node->requires_grad) {
    node->backprop = [n](detail::Node<S>& self) {
      auto& p = *self.parents[0];
      if (!p.requires_grad) return;
      auto& pg = p.ensure_grad();
      const S g = static_cast<S>(static_cast<double>(self.grad[0]) / static_cast<double>(n));
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g;
    };
  }
  return Tensor<S>::from_node(node);
}

namespace {

// Output length of a strided convolution; negative windows are a dim error.
std::size_t conv_out_len(std::size_t l, std::size_t k, std::size_t stride, std::size_t pad) {
  check_dim(l + 2 * pad >= k, "conv1d: kernel longer than padded input");
  return (l + 2 * pad - k) / stride + 1;
}

}  // namespace

template <typename S>
Tensor<S> conv1d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b,
                 std::size_t stride, std::size_t pad) {
  require_defined(x, "conv1d");
  require_defined(w, "conv1d");
  require_defined(b, "conv1d");
  check_dim(x.shape().size() == 2 && w.shape().size() == 3 && b.shape().size() == 1,
            "conv1d: need x[LxCin], w[kxCinxCout], b[Cout]");
  const std::size_t l = x.shape()[0], cin = x.shape()[1];
  const std::size_t k = w.shape()[0], cout = w.shape()[2];
  check_dim(w.shape()[1] == cin, "conv1d: channel mismatch");
  check_dim(b.shape()[0] == cout, "conv1d: bias width mismatch");
  check_contract(stride >= 1, "conv1d: stride must be >= 1");
  const std::size_t lo = conv_out_len(l, k, stride, pad);
  auto node = make_op<S>({lo, cout}, {x.node_ptr(), w.node_ptr(), b.node_ptr()});
  const S* xv = x.node()->values->data();
  const S* wv = w.node()->values->data();
  const S* bv = b.node()->values->data();
  S* yv = node->values->data();
  for (std::size_t o = 0; o < lo; ++o) {
    for (std::size_t co = 0; co < cout; ++co) {
      double acc = static_cast<double>(bv[co]);
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t li = static_cast<std::ptrdiff_t>(o * stride + j) -
                                  static_cast<std::ptrdiff_t>(pad);
        if (li < 0 || li >= static_cast<std::ptrdiff_t>(l)) continue;
        for (std::size_t ci = 0; ci < cin; ++ci)
          acc += static_cast<double>(xv[li * cin + ci]) *
                 static_cast<double>(wv[(j * cin + ci) * cout + co]);
      }
      yv[o * cout + co] = static_cast<S>(acc);
    }
  }
  if (node->requires_grad) {
    node->backprop = [l, cin, k, cout, lo, stride, pad](detail::Node<S>& self) {
      auto& px = *self.parents[0];
      auto& pw = *self.parents[1];
      auto& pb = *self.parents[2];
      const S* g = self.grad.data();
      const S* xv = px.values->data();
      const S* wv = pw.values->data();
      S* gx = px.requires_grad ? px.ensure_grad().data() : nullptr;
      S* gw = pw.requires_grad ? pw.ensure_grad().data() : nullptr;
      for (std::size_t o = 0; o < lo; ++o) {
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t li = static_cast<std::ptrdiff_t>(o * stride + j) -
                                    static_cast<std::ptrdiff_t>(pad);
          if (li < 0 || li >= static_cast<std::ptrdiff_t>(l)) continue;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            for (std::size_t co = 0; co < cout; ++co) {
              const S go = g[o * cout + co];
              if (gx) gx[li * cin + ci] += go * wv[(j * cin + ci) * cout + co];
              if (gw) gw[(j * cin + ci) * cout + co] += go * xv[li * cin + ci];
            }
          }
        }
      }
      if (pb.requires_grad) {
        auto& gb = pb.ensure_grad();
        for (std::size_t co = 0; co < cout; ++co) {
          double acc = 0.0;
          for (std::size_t o = 0; o < lo; ++o)
            acc += static_cast<double>(g[o * cout + co]);
          gb[co] += static_cast<S>(acc);
        }
      }
    };
  }
  return Tensor<S>::from_node(node);
}

template <typename S>
Tensor<S> deconv1d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b,
                   std::size_t stride, std::size_t pad, std::size_t out_pad) {
  require_defined(x, "deconv1d");
  require_defined(w, "deconv1d");
  require_defined(b, "deconv1d");
  check_dim(x.shape().size() == 2 && w.shape().size() == 3 && b.shape().size() == 1,
            "deconv1d: need x[LxCin], w[kxCinxCout], b[Cout]");
  const std::size_t l = x.shape()[0], cin = x.shape()[1];
  const std::size_t k = w.shape()[0], cout = w.shape()[2];
  check_dim(w.shape()[1] == cin, "deconv1d: channel mismatch");
  check_dim(b.shape()[0] == cout, "deconv1d: bias width mismatch");
  check_contract(stride >= 1 && out_pad < stride, "deconv1d: need out_pad < stride");
  const std::size_t raw = (l - 1) * stride + k + out_pad;
  check_dim(raw >= 2 * pad + 1, "deconv1d: padding exceeds output");
  const std::size_t lo = raw - 2 * pad;
  auto node = make_op<S>({lo, cout}, {x.node_ptr(), w.node_ptr(), b.node_ptr()});
  const S* xv = x.node()->values->data();
  const S* wv = w.node()->values->data();
  const S* bv = b.node()->values->data();
  S* yv = node->values->data();
  // Gather form: out[o] = b + sum over (i, j) with i*stride + j == o + pad.
  for (std::size_t o = 0; o < lo; ++o) {
    for (std::size_t co = 0; co < cout; ++co) {
      double acc = static_cast<double>(bv[co]);
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t num = static_cast<std::ptrdiff_t>(o + pad) -
                                   static_cast<std::ptrdiff_t>(j);
        if (num < 0 || num % static_cast<std::ptrdiff_t>(stride) != 0) continue;
        const std::ptrdiff_t i = num / static_cast<std::ptrdiff_t>(stride);
        if (i >= static_cast<std::ptrdiff_t>(l)) continue;
        for (std::size_t ci = 0; ci < cin; ++ci)
          acc += static_cast<double>(xv[i * cin + ci]) *
                 static_cast<double>(wv[(j * cin + ci) * cout + co]);
      }
      yv[o * cout + co] = static_cast<S>(acc);
    }
  }
  if (node->requires_grad) {
    node->backprop = [l, cin, k, cout, lo, stride, pad](detail::Node<S>& self) {
      auto& px = *self.parents[0];
      auto& pw = *self.parents[1];
      auto& pb = *self.parents[2];
      const S* g = self.grad.data();
      const S* xv = px.values->data();
      const S* wv = pw.values->data();
      S* gx = px.requires_grad ? px.ensure_grad().data() : nullptr;
      S* gw = pw.requires_grad ? pw.ensure_grad().data() : nullptr;
      for (std::size_t o = 0; o < lo; ++o) {
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t num = static_cast<std::ptrdiff_t>(o + pad) -
                                     static_cast<std::ptrdiff_t>(j);
          if (num < 0 || num % static_cast<std::ptrdiff_t>(stride) != 0) continue;
          const std::ptrdiff_t i = num / static_cast<std::ptrdiff_t>(stride);
          if (i >= static_cast<std::ptrdiff_t>(l)) continue;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            for (std::size_t co = 0; co < cout; ++co) {
              const S go = g[o * cout + co];
              if (gx) gx[i * cin + ci] += go * wv[(j * cin + ci) * cout + co];
              if (gw) gw[(j * cin + ci) * cout + co] += go * xv[i * cin + ci];
            }
          }
        }
      }
      if (pb.requires_grad) {
        auto& gb = pb.ensure_grad();
        for (std::size_t co = 0; co < cout; ++co) {
          double acc = 0.0;
          for (std::size_t o = 0; o < lo; ++o)
            acc += static_cast<double>(g[o * cout + co]);
          gb[co] += static_cast<S>(acc);
        }
      }
    };
  }
  return Tensor<S>::from_node(node);
}

template <typename S>
Tensor<S> glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out,
                         RandomStream& rng, bool requires_grad) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<S> vals(shape_size(shape));
  for (auto& v : vals) v = static_cast<S>(rng.uniform(-limit, limit));
  return Tensor<S>::leaf(std::move(shape), std::move(vals), requires_grad);
}

template <typename S>
bool all_finite(std::span<const S> v) {
  for (S x : v)
    if (!std::isfinite(static_cast<double>(x))) return false;
  return true;
}

#define SGNET_INSTANTIATE_TENSOR(S)                                                          \
  template class Tensor<S>;                                                                  \
  template void backward<S>(const Tensor<S>&);                                               \
  template Tensor<S> matmul<S>(const Tensor<S>&, const Tensor<S>&);                          \
  template Tensor<S> transpose<S>(const Tensor<S>&);                                         \
  template Tensor<S> add<S>(const Tensor<S>&, const Tensor<S>&);                             \
  template Tensor<S> sub<S>(const Tensor<S>&, const Tensor<S>&);                             \
  template Tensor<S> mul<S>(const Tensor<S>&, const Tensor<S>&);                             \
  template Tensor<S> scale<S>(const Tensor<S>&, double);                                     \
  template Tensor<S> add_scalar<S>(const Tensor<S>&, double);                                \
  template Tensor<S> add_rowwise<S>(const Tensor<S>&, const Tensor<S>&);                     \
  template Tensor<S> relu<S>(const Tensor<S>&);                                              \
  template Tensor<S> tanh_op<S>(const Tensor<S>&);                                           \
  template Tensor<S> sigmoid<S>(const Tensor<S>&);                                           \
  template Tensor<S> exp_op<S>(const Tensor<S>&);                                            \
  template Tensor<S> sqrt_op<S>(const Tensor<S>&);                                           \
  template Tensor<S> softmax_lastaxis<S>(const Tensor<S>&);                                  \
  template Tensor<S> concat_lastaxis<S>(const std::vector<Tensor<S>>&);                      \
  template Tensor<S> concat_lastaxis<S>(const Tensor<S>&, const Tensor<S>&);                 \
  template Tensor<S> slice_lastaxis<S>(const Tensor<S>&, std::size_t, std::size_t);          \
  template Tensor<S> slice_rows<S>(const Tensor<S>&, std::size_t, std::size_t);              \
  template Tensor<S> tile_rows<S>(const Tensor<S>&, std::size_t);                            \
  template Tensor<S> stack_rows<S>(const std::vector<Tensor<S>>&);                           \
  template Tensor<S> reshape<S>(const Tensor<S>&, Shape);                                    \
  template Tensor<S> mean_all<S>(const Tensor<S>&);                                          \
  template Tensor<S> sum_all<S>(const Tensor<S>&);                                           \
  template Tensor<S> conv1d<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,         \
                               std::size_t, std::size_t);                                    \
  template Tensor<S> deconv1d<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,       \
                                 std::size_t, std::size_t, std::size_t);                     \
  template Tensor<S> glorot_uniform<S>(Shape, std::size_t, std::size_t, RandomStream&,       \
                                       bool);                                                \
  template bool all_finite<S>(std::span<const S>);

SGNET_INSTANTIATE_TENSOR(float)
SGNET_INSTANTIATE_TENSOR(double)

#undef SGNET_INSTANTIATE_TENSOR

}  // namespace sgnet
