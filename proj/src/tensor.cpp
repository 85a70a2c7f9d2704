// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace rerender {

std::string Shape::str() const {
  std::ostringstream oss;
  oss << "(" << n << "," << c << "," << h << "," << w << ")";
  return oss.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

template <typename T>
TensorT<T> TensorT<T>::zeros(Shape s, bool requires_grad) {
  RR_CHECK(s.numel() > 0, "tensor shape must be non-empty, got " << s.str());
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = s;
  impl->data.assign(static_cast<size_t>(s.numel()), T(0));
  impl->requires_grad = requires_grad;
  return wrap(std::move(impl));
}

template <typename T>
TensorT<T> TensorT<T>::full(Shape s, T value) {
  TensorT t = zeros(s);
  for (auto& v : t.vec()) v = value;
  return t;
}

template <typename T>
TensorT<T> TensorT<T>::from_data(Shape s, std::vector<T> data) {
  RR_CHECK(static_cast<int64_t>(data.size()) == s.numel(),
           "data length " << data.size() << " does not match shape " << s.str());
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = s;
  impl->data = std::move(data);
  return wrap(std::move(impl));
}

template <typename T>
void check_finite(const TensorT<T>& t, const char* op_name) {
  for (const T v : t.vec()) {
    if (!std::isfinite(static_cast<double>(v))) {
      throw RuntimeError(std::string("non-finite value produced by ") + op_name +
                         " with shape " + t.shape().str());
    }
  }
}

template <typename T>
TensorT<T> make_op_output(Shape shape, std::vector<T> data,
                          const std::vector<TensorT<T>>& inputs,
                          BackpropFn<T> backprop, const char* op_name) {
  TensorT<T> out = TensorT<T>::from_data(shape, std::move(data));
  check_finite(out, op_name);
  if (!grad_enabled()) return out;
  bool needs_grad = false;
  for (const auto& in : inputs) {
    if (in.defined() && in.requires_grad()) {
      needs_grad = true;
      break;
    }
  }
  if (!needs_grad) return out;
  auto impl = out.impl();
  impl->requires_grad = true;
  for (const auto& in : inputs) {
    if (in.defined()) impl->parents.push_back(in.impl());
  }
  impl->backprop = std::move(backprop);
  return out;
}

template <typename T>
void backward(const TensorT<T>& loss) {
  RR_CHECK(loss.defined(), "backward on undefined tensor");
  RR_CHECK(loss.shape() == (Shape{1, 1, 1, 1}),
           "backward requires a scalar loss, got " << loss.shape().str());

  using Impl = TensorImpl<T>;
  // Iterative post-order over the graph.
  std::vector<Impl*> order;
  std::unordered_set<Impl*> visited;
  struct Frame {
    Impl* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  Impl* root = loss.impl().get();
  if (root->requires_grad) stack.push_back({root, 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent == 0) {
      if (visited.count(f.node)) {
        stack.pop_back();
        continue;
      }
      visited.insert(f.node);
    }
    if (f.next_parent < f.node->parents.size()) {
      Impl* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  // Op outputs get fresh gradients every sweep; only leaves (parameters,
  // data) accumulate across calls.
  for (Impl* node : order)
    if (node->backprop) node->grad.assign(node->data.size(), T(0));

  root->ensure_grad();
  root->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Impl* node = *it;
    if (node->backprop && !node->grad.empty()) node->backprop(*node);
  }
}

template class TensorT<float>;
template class TensorT<double>;
template void check_finite<float>(const TensorT<float>&, const char*);
template void check_finite<double>(const TensorT<double>&, const char*);
template TensorT<float> make_op_output<float>(Shape, std::vector<float>,
                                              const std::vector<TensorT<float>>&,
                                              BackpropFn<float>, const char*);
template TensorT<double> make_op_output<double>(Shape, std::vector<double>,
                                                const std::vector<TensorT<double>>&,
                                                BackpropFn<double>, const char*);
template void backward<float>(const TensorT<float>&);
template void backward<double>(const TensorT<double>&);

}  // namespace rerender
