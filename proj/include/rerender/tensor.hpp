// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rerender/common.hpp"

namespace rerender {

// All tensors are dense row-major N x C x H x W.
struct Shape {
  int n = 0, c = 0, h = 0, w = 0;

  int64_t numel() const {
    return static_cast<int64_t>(n) * c * h * w;
  }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

template <typename T>
struct TensorImpl;

// Backward closure attached to an op output. Reads the output gradient and
// accumulates into the inputs' gradients.
template <typename T>
using BackpropFn = std::function<void(TensorImpl<T>&)>;

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl<T>>> parents;
  BackpropFn<T> backprop;

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
  }
};

// Thread-local autograd mode; inference paths disable graph recording.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Value-semantic handle to a shared tensor payload.
template <typename T>
class TensorT {
 public:
  TensorT() = default;

  static TensorT zeros(Shape s, bool requires_grad = false);
  static TensorT full(Shape s, T value);
  static TensorT from_data(Shape s, std::vector<T> data);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int64_t numel() const { return impl_->shape.numel(); }

  T* data() { return impl_->data.data(); }
  const T* data() const { return impl_->data.data(); }
  std::vector<T>& vec() { return impl_->data; }
  const std::vector<T>& vec() const { return impl_->data; }

  T& at(int n, int c, int y, int x) {
    const Shape& s = impl_->shape;
    return impl_->data[((static_cast<int64_t>(n) * s.c + c) * s.h + y) * s.w + x];
  }
  T at(int n, int c, int y, int x) const {
    const Shape& s = impl_->shape;
    return impl_->data[((static_cast<int64_t>(n) * s.c + c) * s.h + y) * s.w + x];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }

  bool has_grad() const { return !impl_->grad.empty(); }
  const std::vector<T>& grad() const { return impl_->grad; }
  std::vector<T>& grad_mutable() {
    impl_->ensure_grad();
    return impl_->grad;
  }
  void zero_grad() { impl_->grad.clear(); }

  // Copy of the data with no graph attached.
  TensorT detach_copy() const {
    TensorT out;
    out.impl_ = std::make_shared<TensorImpl<T>>();
    out.impl_->shape = impl_->shape;
    out.impl_->data = impl_->data;
    return out;
  }

  std::shared_ptr<TensorImpl<T>> impl() const { return impl_; }
  static TensorT wrap(std::shared_ptr<TensorImpl<T>> impl) {
    TensorT t;
    t.impl_ = std::move(impl);
    return t;
  }

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

// Throws RuntimeError if any entry is not finite. Every op output passes
// through this; a NaN/Inf anywhere in a forward pass is a hard error.
template <typename T>
void check_finite(const TensorT<T>& t, const char* op_name);

// Builds an op output: validates finiteness and, when grad mode is on and any
// input requires grad, wires the node into the graph.
template <typename T>
TensorT<T> make_op_output(Shape shape, std::vector<T> data,
                          const std::vector<TensorT<T>>& inputs,
                          BackpropFn<T> backprop, const char* op_name);

// Reverse-mode sweep from a scalar (1x1x1x1) loss. Gradients accumulate; a
// second call without clearing doubles them.
template <typename T>
void backward(const TensorT<T>& loss);

}  // namespace rerender
