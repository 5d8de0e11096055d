#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "smg/core/tensor.hpp"

namespace smg {

// Reverse-mode autodiff over Tensor<S>. The graph is rebuilt every step; leaf
// parameter nodes persist across steps and accumulate gradients until cleared.
template <typename S>
struct Node {
  Tensor<S> val;
  Tensor<S> grad;
  bool requires_grad = false;
  bool grad_alloc = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad, scatters into parents' grads. No captures of self to
  // avoid shared_ptr cycles; the node is passed back in.
  std::function<void(Node&)> backprop;

  void ensure_grad() {
    if (!grad_alloc) {
      grad = Tensor<S>::zeros(val.shape);
      grad_alloc = true;
    }
  }
  void clear_grad() {
    if (grad_alloc) grad.fill(S(0));
  }
};

template <typename S>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<S>> n) : n_(std::move(n)) {}

  static Var constant(Tensor<S> t) {
    auto n = std::make_shared<Node<S>>();
    n->val = std::move(t);
    return Var(std::move(n));
  }
  static Var param(Tensor<S> t) {
    auto n = std::make_shared<Node<S>>();
    n->val = std::move(t);
    n->requires_grad = true;
    n->ensure_grad();
    return Var(std::move(n));
  }
  static Var scalar_const(S v) { return constant(Tensor<S>::scalar(v)); }

  bool defined() const { return static_cast<bool>(n_); }
  const Tensor<S>& val() const { return n_->val; }
  Tensor<S>& mutable_val() { return n_->val; }
  const Tensor<S>& grad() const { return n_->grad; }
  bool requires_grad() const { return n_->requires_grad; }
  std::shared_ptr<Node<S>> node() const { return n_; }

  // New constant leaf sharing a copy of the value (stop-gradient).
  Var detach() const { return constant(n_->val); }

  void zero_grad() { n_->clear_grad(); }

  S item() const {
    if (n_->val.numel() != 1) throw InputError("item() on non-scalar");
    return n_->val.data[0];
  }

 private:
  std::shared_ptr<Node<S>> n_;
};

namespace detail {

template <typename S>
inline std::shared_ptr<Node<S>> make_node(Tensor<S> val, std::vector<std::shared_ptr<Node<S>>> parents,
                                          std::function<void(Node<S>&)> backprop) {
  auto n = std::make_shared<Node<S>>();
  n->val = std::move(val);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backprop = std::move(backprop);
  return n;
}

} // namespace detail

// Backpropagate from a scalar root. Gradients accumulate into every
// grad-requiring node reachable from the root.
template <typename S>
inline void backward(const Var<S>& root) {
  if (root.val().numel() != 1) throw InputError("backward() requires a scalar root");
  if (!root.requires_grad()) return;

  // iterative post-order DFS over grad-requiring subgraph
  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> visited;
  std::vector<std::pair<Node<S>*, std::size_t>> stack;
  stack.push_back({root.node().get(), 0});
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<S>* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->ensure_grad();
  root.node()->grad.data[0] += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<S>* n = *it;
    if (n->backprop) {
      for (auto& p : n->parents)
        if (p->requires_grad) p->ensure_grad();
      n->backprop(*n);
    }
  }
}

// ---- elementwise ops ----

template <typename S>
inline Var<S> add(const Var<S>& a, const Var<S>& b) {
  require_same_shape(a.val(), b.val(), "add");
  Tensor<S> out = a.val();
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += b.val().data[i];
  return Var<S>(detail::make_node<S>(std::move(out), {a.node(), b.node()}, [](Node<S>& self) {
    for (int k = 0; k < 2; ++k) {
      auto& p = self.parents[k];
      if (!p->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.numel(); ++i) p->grad.data[i] += self.grad.data[i];
    }
  }));
}

template <typename S>
inline Var<S> sub(const Var<S>& a, const Var<S>& b) {
  require_same_shape(a.val(), b.val(), "sub");
  Tensor<S> out = a.val();
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= b.val().data[i];
  return Var<S>(detail::make_node<S>(std::move(out), {a.node(), b.node()}, [](Node<S>& self) {
    if (self.parents[0]->requires_grad)
      for (std::size_t i = 0; i < self.grad.numel(); ++i)
        self.parents[0]->grad.data[i] += self.grad.data[i];
    if (self.parents[1]->requires_grad)
      for (std::size_t i = 0; i < self.grad.numel(); ++i)
        self.parents[1]->grad.data[i] -= self.grad.data[i];
  }));
}

template <typename S>
inline Var<S> mul(const Var<S>& a, const Var<S>& b) {
  require_same_shape(a.val(), b.val(), "mul");
  Tensor<S> out = a.val();
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= b.val().data[i];
  return Var<S>(detail::make_node<S>(std::move(out), {a.node(), b.node()}, [](Node<S>& self) {
    auto& a = self.parents[0];
    auto& b = self.parents[1];
    if (a->requires_grad)
      for (std::size_t i = 0; i < self.grad.numel(); ++i)
        a->grad.data[i] += self.grad.data[i] * b->val.data[i];
    if (b->requires_grad)
      for (std::size_t i = 0; i < self.grad.numel(); ++i)
        b->grad.data[i] += self.grad.data[i] * a->val.data[i];
  }));
}

// y = k*x + c
template <typename S>
inline Var<S> affine(const Var<S>& x, S k, S c) {
  Tensor<S> out = x.val();
  for (auto& v : out.data) v = k * v + c;
  return Var<S>(detail::make_node<S>(std::move(out), {x.node()}, [k](Node<S>& self) {
    auto& x = self.parents[0];
    for (std::size_t i = 0; i < self.grad.numel(); ++i) x->grad.data[i] += k * self.grad.data[i];
  }));
}

template <typename S>
inline Var<S> neg(const Var<S>& x) { return affine(x, S(-1), S(0)); }
template <typename S>
inline Var<S> one_minus(const Var<S>& x) { return affine(x, S(-1), S(1)); }
template <typename S>
inline Var<S> scale(const Var<S>& x, S k) { return affine(x, k, S(0)); }

// y = x * s where s is a scalar Var (broadcast)
template <typename S>
inline Var<S> mul_scalar_var(const Var<S>& x, const Var<S>& s) {
  if (s.val().numel() != 1) throw InputError("mul_scalar_var: s must be scalar");
  Tensor<S> out = x.val();
  const S sv = s.val().data[0];
  for (auto& v : out.data) v *= sv;
  return Var<S>(detail::make_node<S>(std::move(out), {x.node(), s.node()}, [](Node<S>& self) {
    auto& x = self.parents[0];
    auto& s = self.parents[1];
    const S sv = s->val.data[0];
    if (x->requires_grad)
      for (std::size_t i = 0; i < self.grad.numel(); ++i)
        x->grad.data[i] += self.grad.data[i] * sv;
    if (s->requires_grad) {
      S acc = 0;
      for (std::size_t i = 0; i < self.grad.numel(); ++i)
        acc += self.grad.data[i] * x->val.data[i];
      s->grad.data[0] += acc;
    }
  }));
}

namespace detail {
// unary op with derivative expressed in terms of (x, y)
template <typename S, typename F, typename DF>
inline Var<S> unary(const Var<S>& x, F f, DF df) {
  Tensor<S> out = x.val();
  for (auto& v : out.data) v = f(v);
  return Var<S>(make_node<S>(std::move(out), {x.node()}, [df](Node<S>& self) {
    auto& x = self.parents[0];
    for (std::size_t i = 0; i < self.grad.numel(); ++i)
      x->grad.data[i] += self.grad.data[i] * df(x->val.data[i], self.val.data[i]);
  }));
}
} // namespace detail

template <typename S>
inline Var<S> relu(const Var<S>& x) {
  return detail::unary(x, [](S v) { return v > S(0) ? v : S(0); },
                       [](S v, S) { return v > S(0) ? S(1) : S(0); });
}

template <typename S>
inline Var<S> sigmoid(const Var<S>& x) {
  return detail::unary(x,
                       [](S v) {
                         if (v >= S(0)) {
                           S e = std::exp(-v);
                           return S(1) / (S(1) + e);
                         }
                         S e = std::exp(v);
                         return e / (S(1) + e);
                       },
                       [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
inline Var<S> tanh_(const Var<S>& x) {
  return detail::unary(x, [](S v) { return std::tanh(v); }, [](S, S y) { return S(1) - y * y; });
}

template <typename S>
inline Var<S> exp_(const Var<S>& x) {
  return detail::unary(x, [](S v) { return std::exp(v); }, [](S, S y) { return y; });
}

template <typename S>
inline Var<S> log_(const Var<S>& x) {
  return detail::unary(x, [](S v) { return std::log(v); }, [](S v, S) { return S(1) / v; });
}

template <typename S>
inline Var<S> square(const Var<S>& x) {
  return detail::unary(x, [](S v) { return v * v; }, [](S v, S) { return S(2) * v; });
}

template <typename S>
inline Var<S> softplus(const Var<S>& x) {
  return detail::unary(x,
                       [](S v) { return v > S(30) ? v : std::log1p(std::exp(v)); },
                       [](S v, S) {
                         if (v >= S(0)) {
                           S e = std::exp(-v);
                           return S(1) / (S(1) + e);
                         }
                         S e = std::exp(v);
                         return e / (S(1) + e);
                       });
}

// elementwise min; ties route the gradient to a
template <typename S>
inline Var<S> min_elem(const Var<S>& a, const Var<S>& b) {
  require_same_shape(a.val(), b.val(), "min_elem");
  Tensor<S> out = a.val();
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = std::min(out.data[i], b.val().data[i]);
  return Var<S>(detail::make_node<S>(std::move(out), {a.node(), b.node()}, [](Node<S>& self) {
    auto& a = self.parents[0];
    auto& b = self.parents[1];
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      if (a->val.data[i] <= b->val.data[i]) {
        if (a->requires_grad) a->grad.data[i] += self.grad.data[i];
      } else {
        if (b->requires_grad) b->grad.data[i] += self.grad.data[i];
      }
    }
  }));
}

template <typename S>
inline Var<S> sum_all(const Var<S>& x) {
  S acc = 0;
  for (S v : x.val().data) acc += v;
  return Var<S>(detail::make_node<S>(Tensor<S>::scalar(acc), {x.node()}, [](Node<S>& self) {
    auto& x = self.parents[0];
    const S g = self.grad.data[0];
    for (auto& v : x->grad.data) v += g;
  }));
}

template <typename S>
inline Var<S> mean_all(const Var<S>& x) {
  S acc = 0;
  for (S v : x.val().data) acc += v;
  const S n = static_cast<S>(x.val().numel());
  return Var<S>(detail::make_node<S>(Tensor<S>::scalar(acc / n), {x.node()}, [n](Node<S>& self) {
    auto& x = self.parents[0];
    const S g = self.grad.data[0] / n;
    for (auto& v : x->grad.data) v += g;
  }));
}

// mean squared error over all elements
template <typename S>
inline Var<S> mse_loss(const Var<S>& a, const Var<S>& b) {
  require_same_shape(a.val(), b.val(), "mse_loss");
  S acc = 0;
  for (std::size_t i = 0; i < a.val().numel(); ++i) {
    S d = a.val().data[i] - b.val().data[i];
    acc += d * d;
  }
  const S n = static_cast<S>(a.val().numel());
  return Var<S>(detail::make_node<S>(Tensor<S>::scalar(acc / n), {a.node(), b.node()}, [n](Node<S>& self) {
    auto& a = self.parents[0];
    auto& b = self.parents[1];
    const S g = S(2) * self.grad.data[0] / n;
    for (std::size_t i = 0; i < a->val.numel(); ++i) {
      S d = g * (a->val.data[i] - b->val.data[i]);
      if (a->requires_grad) a->grad.data[i] += d;
      if (b->requires_grad) b->grad.data[i] -= d;
    }
  }));
}

// mean absolute error over all elements; subgradient 0 at ties
template <typename S>
inline Var<S> l1_loss(const Var<S>& a, const Var<S>& b) {
  require_same_shape(a.val(), b.val(), "l1_loss");
  S acc = 0;
  for (std::size_t i = 0; i < a.val().numel(); ++i) acc += std::abs(a.val().data[i] - b.val().data[i]);
  const S n = static_cast<S>(a.val().numel());
  return Var<S>(detail::make_node<S>(Tensor<S>::scalar(acc / n), {a.node(), b.node()}, [n](Node<S>& self) {
    auto& a = self.parents[0];
    auto& b = self.parents[1];
    const S g = self.grad.data[0] / n;
    for (std::size_t i = 0; i < a->val.numel(); ++i) {
      S d = a->val.data[i] - b->val.data[i];
      S s = d > S(0) ? g : (d < S(0) ? -g : S(0));
      if (a->requires_grad) a->grad.data[i] += s;
      if (b->requires_grad) b->grad.data[i] -= s;
    }
  }));
}

// MSE restricted to rows with weight > 0 (first dim indexes rows). Mean is
// taken over included elements; all-zero weights give a constant 0.
template <typename S>
inline Var<S> row_weighted_mse(const Var<S>& a, const Var<S>& b, const std::vector<S>& w) {
  require_same_shape(a.val(), b.val(), "row_weighted_mse");
  const int rows = a.val().shape[0];
  if (static_cast<int>(w.size()) != rows) throw InputError("row_weighted_mse: weight count != rows");
  const std::size_t cols = a.val().numel() / static_cast<std::size_t>(rows);
  S wsum = 0;
  for (S v : w) wsum += v;
  if (wsum <= S(0)) return Var<S>::scalar_const(S(0));
  S acc = 0;
  for (int r = 0; r < rows; ++r) {
    if (w[static_cast<std::size_t>(r)] <= S(0)) continue;
    const std::size_t base = static_cast<std::size_t>(r) * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      S d = a.val().data[base + j] - b.val().data[base + j];
      acc += w[static_cast<std::size_t>(r)] * d * d;
    }
  }
  const S denom = wsum * static_cast<S>(cols);
  return Var<S>(detail::make_node<S>(Tensor<S>::scalar(acc / denom), {a.node(), b.node()},
                                     [w, cols, denom](Node<S>& self) {
    auto& a = self.parents[0];
    auto& b = self.parents[1];
    const S g = S(2) * self.grad.data[0] / denom;
    for (std::size_t r = 0; r < w.size(); ++r) {
      if (w[r] <= S(0)) continue;
      const std::size_t base = r * cols;
      for (std::size_t j = 0; j < cols; ++j) {
        S d = g * w[r] * (a->val.data[base + j] - b->val.data[base + j]);
        if (a->requires_grad) a->grad.data[base + j] += d;
        if (b->requires_grad) b->grad.data[base + j] -= d;
      }
    }
  }));
}

} // namespace smg
