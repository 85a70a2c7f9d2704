// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rerender/tensor.hpp"

namespace rerender {

// 2D convolution, square kernel, symmetric padding. weight is
// (C_out, C_in, k, k), bias is (1, C_out, 1, 1).
template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight,
                  const TensorT<T>& bias, int stride = 1, int padding = 0);

// 2x2 average pooling; requires even spatial dims.
template <typename T>
TensorT<T> avg_pool2(const TensorT<T>& input);

// Bilinear resize (align-corners false).
template <typename T>
TensorT<T> bilinear_resize(const TensorT<T>& input, int out_h, int out_w);

// Warp by a per-pixel displacement field. flow is (N, 2, H, W) in normalized
// [-1, 1] image coordinates (channel 0 = x, channel 1 = y); output(p) samples
// input at p + flow(p) bilinearly, reading border values outside the image.
template <typename T>
TensorT<T> grid_sample(const TensorT<T>& input, const TensorT<T>& flow);

// Per-(sample, channel) normalization to zero mean / unit variance.
template <typename T>
TensorT<T> instance_norm(const TensorT<T>& input, T eps = T(1e-5));

template <typename T>
TensorT<T> relu(const TensorT<T>& x);

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x);

// Stack b's channels after a's; non-channel dims must match.
template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b);

// Channel slice [c0, c0+count).
template <typename T>
TensorT<T> narrow_channels(const TensorT<T>& x, int c0, int count);

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b);

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b);

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b);

template <typename T>
TensorT<T> add_scalar(const TensorT<T>& x, T s);

template <typename T>
TensorT<T> mul_scalar(const TensorT<T>& x, T s);

template <typename T>
TensorT<T> clamp01(const TensorT<T>& x);

// Scalar mean absolute difference.
template <typename T>
TensorT<T> l1_loss(const TensorT<T>& a, const TensorT<T>& b);

template <typename T>
TensorT<T> mean_all(const TensorT<T>& x);

template <typename T>
TensorT<T> sum_all(const TensorT<T>& x);

// Output spatial size of a conv along one axis; throws if non-positive.
int conv_out_size(int in, int k, int stride, int padding);

}  // namespace rerender
