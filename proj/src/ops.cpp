// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "rerender/parallel.hpp"

#if defined(__GNUC__) || defined(__clang__)
#define RR_RESTRICT __restrict__
#else
#define RR_RESTRICT
#endif

namespace rerender {

namespace {

// C[M,N] += A[M,K] * B[K,N], all row-major. Rows are processed in blocks of
// four so each loaded B row feeds four accumulations; each output row is
// owned by one worker and accumulated in a fixed k order.
template <typename T>
void gemm_acc(const T* RR_RESTRICT A, const T* RR_RESTRICT B, T* RR_RESTRICT C,
              int64_t M, int64_t K, int64_t N) {
  const int64_t blocks = (M + 3) / 4;
  parallel_for(
      blocks,
      [&](int64_t blk0, int64_t blk1) {
        for (int64_t blk = blk0; blk < blk1; ++blk) {
          const int64_t m = blk * 4;
          const int64_t rows = std::min<int64_t>(4, M - m);
          if (rows == 4) {
            T* RR_RESTRICT c0 = C + (m + 0) * N;
            T* RR_RESTRICT c1 = C + (m + 1) * N;
            T* RR_RESTRICT c2 = C + (m + 2) * N;
            T* RR_RESTRICT c3 = C + (m + 3) * N;
            const T* a0 = A + (m + 0) * K;
            const T* a1 = A + (m + 1) * K;
            const T* a2 = A + (m + 2) * K;
            const T* a3 = A + (m + 3) * K;
            for (int64_t k = 0; k < K; ++k) {
              const T v0 = a0[k], v1 = a1[k], v2 = a2[k], v3 = a3[k];
              const T* RR_RESTRICT b = B + k * N;
              for (int64_t j = 0; j < N; ++j) {
                const T bj = b[j];
                c0[j] += v0 * bj;
                c1[j] += v1 * bj;
                c2[j] += v2 * bj;
                c3[j] += v3 * bj;
              }
            }
          } else {
            for (int64_t r = 0; r < rows; ++r) {
              T* RR_RESTRICT c = C + (m + r) * N;
              const T* a = A + (m + r) * K;
              for (int64_t k = 0; k < K; ++k) {
                const T av = a[k];
                const T* RR_RESTRICT b = B + k * N;
                for (int64_t j = 0; j < N; ++j) c[j] += av * b[j];
              }
            }
          }
        }
      },
      1);
}

// C[M,N] += A[K,M]^T * B[K,N]  (dX_col = W^T * dY). A is transposed into a
// scratch row-major matrix first so the hot loop matches gemm_acc.
template <typename T>
void gemm_tn_acc(const T* A, const T* B, T* C, int64_t M, int64_t K, int64_t N) {
  std::vector<T> at(static_cast<size_t>(M) * K);
  for (int64_t k = 0; k < K; ++k)
    for (int64_t m = 0; m < M; ++m) at[static_cast<size_t>(m) * K + k] = A[k * M + m];
  gemm_acc(at.data(), B, C, M, K, N);
}

// C[M,K] += A[M,N] * B[K,N]^T  (dW = dY * X_col^T). Four A rows share each
// loaded B row.
template <typename T>
void gemm_nt_acc(const T* RR_RESTRICT A, const T* RR_RESTRICT B, T* RR_RESTRICT C,
                 int64_t M, int64_t N, int64_t K) {
  const int64_t blocks = (M + 3) / 4;
  parallel_for(
      blocks,
      [&](int64_t blk0, int64_t blk1) {
        for (int64_t blk = blk0; blk < blk1; ++blk) {
          const int64_t m = blk * 4;
          const int64_t rows = std::min<int64_t>(4, M - m);
          if (rows == 4) {
            const T* a0 = A + (m + 0) * N;
            const T* a1 = A + (m + 1) * N;
            const T* a2 = A + (m + 2) * N;
            const T* a3 = A + (m + 3) * N;
            for (int64_t k = 0; k < K; ++k) {
              const T* RR_RESTRICT b = B + k * N;
              T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
              for (int64_t j = 0; j < N; ++j) {
                const T bj = b[j];
                s0 += a0[j] * bj;
                s1 += a1[j] * bj;
                s2 += a2[j] * bj;
                s3 += a3[j] * bj;
              }
              C[(m + 0) * K + k] += s0;
              C[(m + 1) * K + k] += s1;
              C[(m + 2) * K + k] += s2;
              C[(m + 3) * K + k] += s3;
            }
          } else {
            for (int64_t r = 0; r < rows; ++r) {
              const T* a = A + (m + r) * N;
              for (int64_t k = 0; k < K; ++k) {
                const T* RR_RESTRICT b = B + k * N;
                T acc = 0;
                for (int64_t j = 0; j < N; ++j) acc += a[j] * b[j];
                C[(m + r) * K + k] += acc;
              }
            }
          }
        }
      },
      1);
}

// Patch matrix for one sample: rows = C_in*k*k, cols = H_out*W_out.
template <typename T>
void im2col(const T* x, int C, int H, int W, int k, int stride, int pad,
            int Ho, int Wo, T* col) {
  const int64_t cols = static_cast<int64_t>(Ho) * Wo;
  parallel_for(
      static_cast<int64_t>(C) * k * k,
      [&](int64_t r0, int64_t r1) {
        for (int64_t r = r0; r < r1; ++r) {
          const int ci = static_cast<int>(r / (k * k));
          const int ky = static_cast<int>((r / k) % k);
          const int kx = static_cast<int>(r % k);
          T* dst = col + r * cols;
          const T* src = x + static_cast<int64_t>(ci) * H * W;
          for (int oy = 0; oy < Ho; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= H) {
              std::fill(dst, dst + Wo, T(0));
              dst += Wo;
              continue;
            }
            const T* row = src + static_cast<int64_t>(iy) * W;
            for (int ox = 0; ox < Wo; ++ox) {
              const int ix = ox * stride - pad + kx;
              *dst++ = (ix >= 0 && ix < W) ? row[ix] : T(0);
            }
          }
        }
      },
      4);
}

// Transpose of im2col: dX accumulates every kernel tap that read it. The
// stride-1 case runs as contiguous row adds.
template <typename T>
void col2im_acc(const T* col, int C, int H, int W, int k, int stride, int pad,
                int Ho, int Wo, T* dx) {
  const int64_t cols = static_cast<int64_t>(Ho) * Wo;
  if (stride == 1) {
    parallel_for(
        C,
        [&](int64_t c0, int64_t c1) {
          for (int64_t ci = c0; ci < c1; ++ci) {
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const T* RR_RESTRICT src = col + ((ci * k + ky) * k + kx) * cols;
                for (int oy = 0; oy < Ho; ++oy) {
                  const int iy = oy - pad + ky;
                  if (iy < 0 || iy >= H) continue;
                  const int ox_lo = std::max(0, pad - kx);
                  const int ox_hi = std::min(Wo, W + pad - kx);
                  T* RR_RESTRICT dst = dx + (ci * H + iy) * W - pad + kx;
                  const T* s = src + static_cast<int64_t>(oy) * Wo;
                  for (int ox = ox_lo; ox < ox_hi; ++ox) dst[ox] += s[ox];
                }
              }
            }
          }
        },
        1);
    return;
  }
  parallel_for(
      C,
      [&](int64_t c0, int64_t c1) {
        for (int64_t ci = c0; ci < c1; ++ci) {
          T* dst = dx + ci * H * W;
          for (int iy = 0; iy < H; ++iy) {
            for (int ix = 0; ix < W; ++ix) {
              T acc = T(0);
              for (int ky = 0; ky < k; ++ky) {
                const int oy_num = iy + pad - ky;
                if (oy_num < 0 || oy_num % stride) continue;
                const int oy = oy_num / stride;
                if (oy >= Ho) continue;
                for (int kx = 0; kx < k; ++kx) {
                  const int ox_num = ix + pad - kx;
                  if (ox_num < 0 || ox_num % stride) continue;
                  const int ox = ox_num / stride;
                  if (ox >= Wo) continue;
                  const int64_t r = (ci * k + ky) * k + kx;
                  acc += col[r * cols + oy * Wo + ox];
                }
              }
              dst[iy * static_cast<int64_t>(W) + ix] += acc;
            }
          }
        }
      },
      1);
}

template <typename T>
void accumulate(TensorImpl<T>& t, const std::vector<T>& delta) {
  t.ensure_grad();
  for (size_t i = 0; i < delta.size(); ++i) t.grad[i] += delta[i];
}

}  // namespace

int conv_out_size(int in, int k, int stride, int padding) {
  const int out = (in + 2 * padding - k) / stride + 1;
  RR_CHECK(out > 0, "conv output size non-positive for input " << in << ", kernel "
                                                               << k << ", stride " << stride
                                                               << ", padding " << padding);
  return out;
}

template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight,
                  const TensorT<T>& bias, int stride, int padding) {
  const Shape xs = input.shape();
  const Shape ws = weight.shape();
  RR_CHECK(ws.h == ws.w, "conv2d kernel must be square, got " << ws.str());
  RR_CHECK(xs.c == ws.c, "conv2d channel mismatch: input " << xs.str() << " vs weight "
                                                           << ws.str());
  RR_CHECK(bias.shape() == (Shape{1, ws.n, 1, 1}),
           "conv2d bias must be (1," << ws.n << ",1,1), got " << bias.shape().str());
  RR_CHECK(stride >= 1 && padding >= 0, "conv2d invalid stride/padding");
  const int k = ws.h;
  const int Ho = conv_out_size(xs.h, k, stride, padding);
  const int Wo = conv_out_size(xs.w, k, stride, padding);
  const int Cout = ws.n;
  const int64_t cols = static_cast<int64_t>(Ho) * Wo;
  const int64_t K = static_cast<int64_t>(xs.c) * k * k;

  std::vector<T> out(static_cast<size_t>(xs.n) * Cout * cols);
  std::vector<T> col(static_cast<size_t>(K) * cols);
  for (int n = 0; n < xs.n; ++n) {
    im2col(input.data() + static_cast<int64_t>(n) * xs.c * xs.h * xs.w, xs.c, xs.h, xs.w,
           k, stride, padding, Ho, Wo, col.data());
    T* y = out.data() + static_cast<int64_t>(n) * Cout * cols;
    for (int co = 0; co < Cout; ++co)
      std::fill(y + co * cols, y + (co + 1) * cols, bias.data()[co]);
    gemm_acc(weight.data(), col.data(), y, Cout, K, cols);
  }

  auto xi = input.impl();
  auto wi = weight.impl();
  auto bi = bias.impl();
  BackpropFn<T> bp = [xi, wi, bi, k, stride, padding, Ho, Wo](TensorImpl<T>& o) {
    const Shape xs = xi->shape;
    const int Cout = wi->shape.n;
    const int64_t cols = static_cast<int64_t>(Ho) * Wo;
    const int64_t K = static_cast<int64_t>(xs.c) * k * k;
    std::vector<T> col;
    if (wi->requires_grad) col.resize(static_cast<size_t>(K) * cols);
    if (wi->requires_grad) wi->ensure_grad();
    if (xi->requires_grad) xi->ensure_grad();
    if (bi->requires_grad) bi->ensure_grad();

    // Stride-1 input gradients run as a full convolution of dY with the
    // channel-swapped, spatially flipped kernel: one fast GEMM accumulating
    // straight into the gradient buffer.
    std::vector<T> wflip;
    std::vector<T> dycol;
    if (xi->requires_grad && stride == 1) {
      wflip.resize(wi->data.size());
      for (int co = 0; co < Cout; ++co)
        for (int ci = 0; ci < xs.c; ++ci)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
              wflip[((static_cast<int64_t>(ci) * Cout + co) * k + (k - 1 - ky)) * k +
                    (k - 1 - kx)] =
                  wi->data[((static_cast<int64_t>(co) * xs.c + ci) * k + ky) * k + kx];
      dycol.resize(static_cast<size_t>(Cout) * k * k * xs.h * xs.w);
    }
    std::vector<T> dcol;
    if (xi->requires_grad && stride != 1) dcol.resize(static_cast<size_t>(K) * cols);

    for (int n = 0; n < xs.n; ++n) {
      const T* dy = o.grad.data() + static_cast<int64_t>(n) * Cout * cols;
      if (bi->requires_grad) {
        for (int co = 0; co < Cout; ++co) {
          T acc = T(0);
          const T* g = dy + co * cols;
          for (int64_t j = 0; j < cols; ++j) acc += g[j];
          bi->grad[co] += acc;
        }
      }
      if (wi->requires_grad) {
        im2col(xi->data.data() + static_cast<int64_t>(n) * xs.c * xs.h * xs.w, xs.c, xs.h,
               xs.w, k, stride, padding, Ho, Wo, col.data());
        gemm_nt_acc(dy, col.data(), wi->grad.data(), Cout, cols, K);
      }
      if (xi->requires_grad) {
        T* dx = xi->grad.data() + static_cast<int64_t>(n) * xs.c * xs.h * xs.w;
        if (stride == 1) {
          im2col(dy, Cout, Ho, Wo, k, 1, k - 1 - padding, xs.h, xs.w, dycol.data());
          gemm_acc(wflip.data(), dycol.data(), dx, xs.c,
                   static_cast<int64_t>(Cout) * k * k,
                   static_cast<int64_t>(xs.h) * xs.w);
        } else {
          std::fill(dcol.begin(), dcol.end(), T(0));
          gemm_tn_acc(wi->data.data(), dy, dcol.data(), K, Cout, cols);
          col2im_acc(dcol.data(), xs.c, xs.h, xs.w, k, stride, padding, Ho, Wo, dx);
        }
      }
    }
  };
  return make_op_output<T>({xs.n, Cout, Ho, Wo}, std::move(out), {input, weight, bias},
                           std::move(bp), "conv2d");
}

template <typename T>
TensorT<T> avg_pool2(const TensorT<T>& input) {
  const Shape xs = input.shape();
  RR_CHECK(xs.h % 2 == 0 && xs.w % 2 == 0,
           "avg_pool2 requires even spatial dims, got " << xs.str());
  const int Ho = xs.h / 2, Wo = xs.w / 2;
  std::vector<T> out(static_cast<size_t>(xs.n) * xs.c * Ho * Wo);
  const T* x = input.data();
  for (int64_t nc = 0; nc < static_cast<int64_t>(xs.n) * xs.c; ++nc) {
    const T* src = x + nc * xs.h * xs.w;
    T* dst = out.data() + nc * Ho * Wo;
    for (int y = 0; y < Ho; ++y)
      for (int xo = 0; xo < Wo; ++xo)
        dst[y * Wo + xo] =
            (src[(2 * y) * xs.w + 2 * xo] + src[(2 * y) * xs.w + 2 * xo + 1] +
             src[(2 * y + 1) * xs.w + 2 * xo] + src[(2 * y + 1) * xs.w + 2 * xo + 1]) *
            T(0.25);
  }
  auto xi = input.impl();
  BackpropFn<T> bp = [xi, Ho, Wo](TensorImpl<T>& o) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    const Shape xs = xi->shape;
    for (int64_t nc = 0; nc < static_cast<int64_t>(xs.n) * xs.c; ++nc) {
      const T* g = o.grad.data() + nc * Ho * Wo;
      T* dx = xi->grad.data() + nc * xs.h * xs.w;
      for (int y = 0; y < Ho; ++y)
        for (int xo = 0; xo < Wo; ++xo) {
          const T v = g[y * Wo + xo] * T(0.25);
          dx[(2 * y) * xs.w + 2 * xo] += v;
          dx[(2 * y) * xs.w + 2 * xo + 1] += v;
          dx[(2 * y + 1) * xs.w + 2 * xo] += v;
          dx[(2 * y + 1) * xs.w + 2 * xo + 1] += v;
        }
    }
  };
  return make_op_output<T>({xs.n, xs.c, Ho, Wo}, std::move(out), {input}, std::move(bp),
                           "avg_pool2");
}

namespace {

struct ResizeTap {
  int i0, i1;
  double w1;  // weight of i1; i0 gets (1 - w1)
};

inline ResizeTap resize_tap(int out_idx, int in_size, int out_size) {
  const double src = (out_idx + 0.5) * (static_cast<double>(in_size) / out_size) - 0.5;
  double f = std::floor(src);
  int i0 = static_cast<int>(f);
  double w1 = src - f;
  int i1 = i0 + 1;
  i0 = std::clamp(i0, 0, in_size - 1);
  i1 = std::clamp(i1, 0, in_size - 1);
  return {i0, i1, w1};
}

}  // namespace

template <typename T>
TensorT<T> bilinear_resize(const TensorT<T>& input, int out_h, int out_w) {
  const Shape xs = input.shape();
  RR_CHECK(out_h >= 1 && out_w >= 1, "bilinear_resize target must be >= 1");
  if (out_h == xs.h && out_w == xs.w) {
    auto xi = input.impl();
    BackpropFn<T> bp = [xi](TensorImpl<T>& o) {
      if (xi->requires_grad) accumulate(*xi, o.grad);
    };
    std::vector<T> out = input.vec();
    return make_op_output<T>(xs, std::move(out), {input}, std::move(bp), "bilinear_resize");
  }

  std::vector<ResizeTap> ty(out_h), tx(out_w);
  for (int y = 0; y < out_h; ++y) ty[y] = resize_tap(y, xs.h, out_h);
  for (int x = 0; x < out_w; ++x) tx[x] = resize_tap(x, xs.w, out_w);

  std::vector<T> out(static_cast<size_t>(xs.n) * xs.c * out_h * out_w);
  const int64_t planes = static_cast<int64_t>(xs.n) * xs.c;
  parallel_for(planes, [&](int64_t p0, int64_t p1) {
    for (int64_t nc = p0; nc < p1; ++nc) {
      const T* src = input.data() + nc * xs.h * xs.w;
      T* dst = out.data() + nc * out_h * out_w;
      for (int y = 0; y < out_h; ++y) {
        const ResizeTap& a = ty[y];
        for (int x = 0; x < out_w; ++x) {
          const ResizeTap& b = tx[x];
          const double v00 = src[a.i0 * xs.w + b.i0];
          const double v01 = src[a.i0 * xs.w + b.i1];
          const double v10 = src[a.i1 * xs.w + b.i0];
          const double v11 = src[a.i1 * xs.w + b.i1];
          dst[y * out_w + x] = static_cast<T>((1 - a.w1) * ((1 - b.w1) * v00 + b.w1 * v01) +
                                              a.w1 * ((1 - b.w1) * v10 + b.w1 * v11));
        }
      }
    }
  });

  auto xi = input.impl();
  BackpropFn<T> bp = [xi, ty, tx, out_h, out_w](TensorImpl<T>& o) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    const Shape xs = xi->shape;
    for (int64_t nc = 0; nc < static_cast<int64_t>(xs.n) * xs.c; ++nc) {
      const T* g = o.grad.data() + nc * out_h * out_w;
      T* dx = xi->grad.data() + nc * xs.h * xs.w;
      for (int y = 0; y < out_h; ++y) {
        const ResizeTap& a = ty[y];
        for (int x = 0; x < out_w; ++x) {
          const ResizeTap& b = tx[x];
          const T gv = g[y * out_w + x];
          dx[a.i0 * xs.w + b.i0] += static_cast<T>((1 - a.w1) * (1 - b.w1)) * gv;
          dx[a.i0 * xs.w + b.i1] += static_cast<T>((1 - a.w1) * b.w1) * gv;
          dx[a.i1 * xs.w + b.i0] += static_cast<T>(a.w1 * (1 - b.w1)) * gv;
          dx[a.i1 * xs.w + b.i1] += static_cast<T>(a.w1 * b.w1) * gv;
        }
      }
    }
  };
  return make_op_output<T>({xs.n, xs.c, out_h, out_w}, std::move(out), {input},
                           std::move(bp), "bilinear_resize");
}

template <typename T>
TensorT<T> grid_sample(const TensorT<T>& input, const TensorT<T>& flow) {
  const Shape xs = input.shape();
  const Shape fs = flow.shape();
  RR_CHECK(fs.c == 2, "grid_sample flow must have 2 channels, got " << fs.str());
  RR_CHECK(fs.n == xs.n && fs.h == xs.h && fs.w == xs.w,
           "grid_sample flow " << fs.str() << " does not match input " << xs.str());
  const int H = xs.h, W = xs.w;
  const int64_t plane = static_cast<int64_t>(H) * W;

  std::vector<T> out(input.vec().size());
  const int64_t rows = static_cast<int64_t>(xs.n) * H;
  parallel_for(rows, [&](int64_t r0, int64_t r1) {
    for (int64_t r = r0; r < r1; ++r) {
      const int n = static_cast<int>(r / H);
      const int y = static_cast<int>(r % H);
      const T* fx = flow.data() + (static_cast<int64_t>(n) * 2 + 0) * plane + y * W;
      const T* fy = flow.data() + (static_cast<int64_t>(n) * 2 + 1) * plane + y * W;
      for (int x = 0; x < W; ++x) {
        const double u = (2.0 * x + 1.0) / W - 1.0 + fx[x];
        const double v = (2.0 * y + 1.0) / H - 1.0 + fy[x];
        const double sx = ((u + 1.0) * W - 1.0) / 2.0;
        const double sy = ((v + 1.0) * H - 1.0) / 2.0;
        const int x0 = static_cast<int>(std::floor(sx));
        const int y0 = static_cast<int>(std::floor(sy));
        const double wx = sx - x0, wy = sy - y0;
        const int xi0 = std::clamp(x0, 0, W - 1), xi1 = std::clamp(x0 + 1, 0, W - 1);
        const int yi0 = std::clamp(y0, 0, H - 1), yi1 = std::clamp(y0 + 1, 0, H - 1);
        for (int c = 0; c < xs.c; ++c) {
          const T* src = input.data() + (static_cast<int64_t>(n) * xs.c + c) * plane;
          const double v00 = src[yi0 * W + xi0], v01 = src[yi0 * W + xi1];
          const double v10 = src[yi1 * W + xi0], v11 = src[yi1 * W + xi1];
          out[(static_cast<int64_t>(n) * xs.c + c) * plane + y * W + x] =
              static_cast<T>((1 - wy) * ((1 - wx) * v00 + wx * v01) +
                             wy * ((1 - wx) * v10 + wx * v11));
        }
      }
    }
  });

  auto xi = input.impl();
  auto fi = flow.impl();
  BackpropFn<T> bp = [xi, fi](TensorImpl<T>& o) {
    const Shape xs = xi->shape;
    const int H = xs.h, W = xs.w;
    const int64_t plane = static_cast<int64_t>(H) * W;
    if (xi->requires_grad) xi->ensure_grad();
    if (fi->requires_grad) fi->ensure_grad();
    for (int n = 0; n < xs.n; ++n) {
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          const T fxv = fi->data[(static_cast<int64_t>(n) * 2 + 0) * plane + y * W + x];
          const T fyv = fi->data[(static_cast<int64_t>(n) * 2 + 1) * plane + y * W + x];
          const double u = (2.0 * x + 1.0) / W - 1.0 + fxv;
          const double v = (2.0 * y + 1.0) / H - 1.0 + fyv;
          const double sx = ((u + 1.0) * W - 1.0) / 2.0;
          const double sy = ((v + 1.0) * H - 1.0) / 2.0;
          const int x0 = static_cast<int>(std::floor(sx));
          const int y0 = static_cast<int>(std::floor(sy));
          const double wx = sx - x0, wy = sy - y0;
          const int xi0 = std::clamp(x0, 0, W - 1), xi1 = std::clamp(x0 + 1, 0, W - 1);
          const int yi0 = std::clamp(y0, 0, H - 1), yi1 = std::clamp(y0 + 1, 0, H - 1);
          double dsx = 0, dsy = 0;
          for (int c = 0; c < xs.c; ++c) {
            const int64_t base = (static_cast<int64_t>(n) * xs.c + c) * plane;
            const T gv = o.grad[base + y * W + x];
            if (gv == T(0)) continue;
            if (xi->requires_grad) {
              xi->grad[base + yi0 * W + xi0] += static_cast<T>((1 - wy) * (1 - wx)) * gv;
              xi->grad[base + yi0 * W + xi1] += static_cast<T>((1 - wy) * wx) * gv;
              xi->grad[base + yi1 * W + xi0] += static_cast<T>(wy * (1 - wx)) * gv;
              xi->grad[base + yi1 * W + xi1] += static_cast<T>(wy * wx) * gv;
            }
            if (fi->requires_grad) {
              const double v00 = xi->data[base + yi0 * W + xi0];
              const double v01 = xi->data[base + yi0 * W + xi1];
              const double v10 = xi->data[base + yi1 * W + xi0];
              const double v11 = xi->data[base + yi1 * W + xi1];
              dsx += gv * ((1 - wy) * (v01 - v00) + wy * (v11 - v10));
              dsy += gv * ((1 - wx) * (v10 - v00) + wx * (v11 - v01));
            }
          }
          if (fi->requires_grad) {
            fi->grad[(static_cast<int64_t>(n) * 2 + 0) * plane + y * W + x] +=
                static_cast<T>(dsx * W / 2.0);
            fi->grad[(static_cast<int64_t>(n) * 2 + 1) * plane + y * W + x] +=
                static_cast<T>(dsy * H / 2.0);
          }
        }
      }
    }
  };
  return make_op_output<T>(xs, std::move(out), {input, flow}, std::move(bp), "grid_sample");
}

template <typename T>
TensorT<T> instance_norm(const TensorT<T>& input, T eps) {
  const Shape xs = input.shape();
  RR_CHECK(static_cast<int64_t>(xs.h) * xs.w >= 2,
           "instance_norm needs at least 2 spatial elements, got " << xs.str());
  const int64_t m = static_cast<int64_t>(xs.h) * xs.w;
  std::vector<T> out(input.vec().size());
  const int64_t planes = static_cast<int64_t>(xs.n) * xs.c;
  parallel_for(
      planes,
      [&](int64_t p0, int64_t p1) {
        for (int64_t nc = p0; nc < p1; ++nc) {
          const T* src = input.data() + nc * m;
          T* dst = out.data() + nc * m;
          double mean = 0;
          for (int64_t i = 0; i < m; ++i) mean += src[i];
          mean /= static_cast<double>(m);
          double var = 0;
          for (int64_t i = 0; i < m; ++i) {
            const double d = src[i] - mean;
            var += d * d;
          }
          var /= static_cast<double>(m);
          const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
          for (int64_t i = 0; i < m; ++i)
            dst[i] = static_cast<T>((src[i] - mean) * inv);
        }
      },
      8);

  auto xi = input.impl();
  BackpropFn<T> bp = [xi, eps, m](TensorImpl<T>& o) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    const Shape xs = xi->shape;
    for (int64_t nc = 0; nc < static_cast<int64_t>(xs.n) * xs.c; ++nc) {
      const T* src = xi->data.data() + nc * m;
      const T* g = o.grad.data() + nc * m;
      T* dx = xi->grad.data() + nc * m;
      double mean = 0;
      for (int64_t i = 0; i < m; ++i) mean += src[i];
      mean /= static_cast<double>(m);
      double var = 0;
      for (int64_t i = 0; i < m; ++i) {
        const double d = src[i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(m);
      const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
      double gsum = 0, gysum = 0;
      for (int64_t i = 0; i < m; ++i) {
        const double yh = (src[i] - mean) * inv;
        gsum += g[i];
        gysum += g[i] * yh;
      }
      const double gmean = gsum / static_cast<double>(m);
      const double gymean = gysum / static_cast<double>(m);
      for (int64_t i = 0; i < m; ++i) {
        const double yh = (src[i] - mean) * inv;
        dx[i] += static_cast<T>(inv * (g[i] - gmean - yh * gymean));
      }
    }
  };
  return make_op_output<T>(xs, std::move(out), {input}, std::move(bp), "instance_norm");
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  std::vector<T> out(x.vec().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
  auto xi = x.impl();
  BackpropFn<T> bp = [xi](TensorImpl<T>& o) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    for (size_t i = 0; i < o.grad.size(); ++i)
      if (xi->data[i] > T(0)) xi->grad[i] += o.grad[i];
  };
  return make_op_output<T>(x.shape(), std::move(out), {x}, std::move(bp), "relu");
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
  std::vector<T> out(x.vec().size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x.data()[i]))));
  auto xi = x.impl();
  auto oi = std::make_shared<std::vector<T>>(out);
  BackpropFn<T> bp = [xi, oi](TensorImpl<T>& o) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    for (size_t i = 0; i < o.grad.size(); ++i) {
      const T y = (*oi)[i];
      xi->grad[i] += o.grad[i] * y * (T(1) - y);
    }
  };
  return make_op_output<T>(x.shape(), std::move(out), {x}, std::move(bp), "sigmoid");
}

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
  const Shape as = a.shape(), bs = b.shape();
  RR_CHECK(as.n == bs.n && as.h == bs.h && as.w == bs.w,
           "concat_channels non-channel dims mismatch: " << as.str() << " vs " << bs.str());
  const int64_t plane = static_cast<int64_t>(as.h) * as.w;
  Shape os{as.n, as.c + bs.c, as.h, as.w};
  std::vector<T> out(static_cast<size_t>(os.numel()));
  for (int n = 0; n < as.n; ++n) {
    std::memcpy(out.data() + static_cast<int64_t>(n) * os.c * plane,
                a.data() + static_cast<int64_t>(n) * as.c * plane,
                sizeof(T) * as.c * plane);
    std::memcpy(out.data() + (static_cast<int64_t>(n) * os.c + as.c) * plane,
                b.data() + static_cast<int64_t>(n) * bs.c * plane,
                sizeof(T) * bs.c * plane);
  }
  auto ai = a.impl();
  auto bi = b.impl();
  BackpropFn<T> bp = [ai, bi, plane](TensorImpl<T>& o) {
    const int ac = ai->shape.c, bc = bi->shape.c, oc = ac + bc;
    if (ai->requires_grad) {
      ai->ensure_grad();
      for (int n = 0; n < ai->shape.n; ++n)
        for (int64_t i = 0; i < ac * plane; ++i)
          ai->grad[static_cast<int64_t>(n) * ac * plane + i] +=
              o.grad[static_cast<int64_t>(n) * oc * plane + i];
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      for (int n = 0; n < bi->shape.n; ++n)
        for (int64_t i = 0; i < bc * plane; ++i)
          bi->grad[static_cast<int64_t>(n) * bc * plane + i] +=
              o.grad[(static_cast<int64_t>(n) * oc + ac) * plane + i];
    }
  };
  return make_op_output<T>(os, std::move(out), {a, b}, std::move(bp), "concat_channels");
}

template <typename T>
TensorT<T> narrow_channels(const TensorT<T>& x, int c0, int count) {
  const Shape xs = x.shape();
  RR_CHECK(c0 >= 0 && count >= 1 && c0 + count <= xs.c,
           "narrow_channels range [" << c0 << "," << c0 + count << ") out of " << xs.c);
  const int64_t plane = static_cast<int64_t>(xs.h) * xs.w;
  Shape os{xs.n, count, xs.h, xs.w};
  std::vector<T> out(static_cast<size_t>(os.numel()));
  for (int n = 0; n < xs.n; ++n)
    std::memcpy(out.data() + static_cast<int64_t>(n) * count * plane,
                x.data() + (static_cast<int64_t>(n) * xs.c + c0) * plane,
                sizeof(T) * count * plane);
  auto xi = x.impl();
  BackpropFn<T> bp = [xi, c0, count, plane](TensorImpl<T>& o) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    const int xc = xi->shape.c;
    for (int n = 0; n < xi->shape.n; ++n)
      for (int64_t i = 0; i < count * plane; ++i)
        xi->grad[(static_cast<int64_t>(n) * xc + c0) * plane + i] +=
            o.grad[static_cast<int64_t>(n) * count * plane + i];
  };
  return make_op_output<T>(os, std::move(out), {x}, std::move(bp), "narrow_channels");
}

namespace {
template <typename T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
  RR_CHECK(a.shape() == b.shape(),
           op << " shape mismatch: " << a.shape().str() << " vs " << b.shape().str());
}
}  // namespace

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  check_same_shape(a, b, "add");
  std::vector<T> out(a.vec().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto ai = a.impl();
  auto bi = b.impl();
  BackpropFn<T> bp = [ai, bi](TensorImpl<T>& o) {
    if (ai->requires_grad) accumulate(*ai, o.grad);
    if (bi->requires_grad) accumulate(*bi, o.grad);
  };
  return make_op_output<T>(a.shape(), std::move(out), {a, b}, std::move(bp), "add");
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  check_same_shape(a, b, "sub");
  std::vector<T> out(a.vec().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  auto ai = a.impl();
  auto bi = b.impl();
  BackpropFn<T> bp = [ai, bi](TensorImpl<T>& o) {
    if (ai->requires_grad) accumulate(*ai, o.grad);
    if (bi->requires_grad) {
      bi->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) bi->grad[i] -= o.grad[i];
    }
  };
  return make_op_output<T>(a.shape(), std::move(out), {a, b}, std::move(bp), "sub");
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  check_same_shape(a, b, "mul");
  std::vector<T> out(a.vec().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto ai = a.impl();
  auto bi = b.impl();
  BackpropFn<T> bp = [ai, bi](TensorImpl<T>& o) {
    if (ai->requires_grad) {
      ai->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) ai->grad[i] += o.grad[i] * bi->data[i];
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) bi->grad[i] += o.grad[i] * ai->data[i];
    }
  };
  return make_op_output<T>(a.shape(), std::move(out), {a, b}, std::move(bp), "mul");
}

template <typename T>
TensorT<T> add_scalar(const TensorT<T>& x, T s) {
  std::vector<T> out(x.vec().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] + s;
  auto xi = x.impl();
  BackpropFn<T> bp = [xi](TensorImpl<T>& o) {
    if (xi->requires_grad) accumulate(*xi, o.grad);
  };
  return make_op_output<T>(x.shape(), std::move(out), {x}, std::move(bp), "add_scalar");
}

template <typename T>
TensorT<T> mul_scalar(const TensorT<T>& x, T s) {
  std::vector<T> out(x.vec().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * s;
  auto xi = x.impl();
  BackpropFn<T> bp = [xi, s](TensorImpl<T>& o) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    for (size_t i = 0; i < o.grad.size(); ++i) xi->grad[i] += o.grad[i] * s;
  };
  return make_op_output<T>(x.shape(), std::move(out), {x}, std::move(bp), "mul_scalar");
}

template <typename T>
TensorT<T> clamp01(const TensorT<T>& x) {
  std::vector<T> out(x.vec().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(x.data()[i], T(0), T(1));
  auto xi = x.impl();
  BackpropFn<T> bp = [xi](TensorImpl<T>& o) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    for (size_t i = 0; i < o.grad.size(); ++i) {
      const T v = xi->data[i];
      if (v >= T(0) && v <= T(1)) xi->grad[i] += o.grad[i];
    }
  };
  return make_op_output<T>(x.shape(), std::move(out), {x}, std::move(bp), "clamp01");
}

template <typename T>
TensorT<T> l1_loss(const TensorT<T>& a, const TensorT<T>& b) {
  check_same_shape(a, b, "l1_loss");
  double acc = 0;
  for (size_t i = 0; i < a.vec().size(); ++i)
    acc += std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]));
  const double inv_n = 1.0 / static_cast<double>(a.numel());
  std::vector<T> out{static_cast<T>(acc * inv_n)};
  auto ai = a.impl();
  auto bi = b.impl();
  BackpropFn<T> bp = [ai, bi, inv_n](TensorImpl<T>& o) {
    const T g = o.grad[0];
    if (ai->requires_grad) ai->ensure_grad();
    if (bi->requires_grad) bi->ensure_grad();
    for (size_t i = 0; i < ai->data.size(); ++i) {
      const T d = ai->data[i] - bi->data[i];
      const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
      const T v = g * s * static_cast<T>(inv_n);
      if (ai->requires_grad) ai->grad[i] += v;
      if (bi->requires_grad) bi->grad[i] -= v;
    }
  };
  return make_op_output<T>({1, 1, 1, 1}, std::move(out), {a, b}, std::move(bp), "l1_loss");
}

template <typename T>
TensorT<T> mean_all(const TensorT<T>& x) {
  double acc = 0;
  for (const T v : x.vec()) acc += v;
  const double inv_n = 1.0 / static_cast<double>(x.numel());
  std::vector<T> out{static_cast<T>(acc * inv_n)};
  auto xi = x.impl();
  BackpropFn<T> bp = [xi, inv_n](TensorImpl<T>& o) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    const T v = o.grad[0] * static_cast<T>(inv_n);
    for (auto& g : xi->grad) g += v;
  };
  return make_op_output<T>({1, 1, 1, 1}, std::move(out), {x}, std::move(bp), "mean_all");
}

template <typename T>
TensorT<T> sum_all(const TensorT<T>& x) {
  double acc = 0;
  for (const T v : x.vec()) acc += v;
  std::vector<T> out{static_cast<T>(acc)};
  auto xi = x.impl();
  BackpropFn<T> bp = [xi](TensorImpl<T>& o) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    const T v = o.grad[0];
    for (auto& g : xi->grad) g += v;
  };
  return make_op_output<T>({1, 1, 1, 1}, std::move(out), {x}, std::move(bp), "sum_all");
}

#define RR_INSTANTIATE(T)                                                                \
  template TensorT<T> conv2d<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&, \
                                int, int);                                               \
  template TensorT<T> avg_pool2<T>(const TensorT<T>&);                                   \
  template TensorT<T> bilinear_resize<T>(const TensorT<T>&, int, int);                   \
  template TensorT<T> grid_sample<T>(const TensorT<T>&, const TensorT<T>&);              \
  template TensorT<T> instance_norm<T>(const TensorT<T>&, T);                            \
  template TensorT<T> relu<T>(const TensorT<T>&);                                        \
  template TensorT<T> sigmoid<T>(const TensorT<T>&);                                     \
  template TensorT<T> concat_channels<T>(const TensorT<T>&, const TensorT<T>&);          \
  template TensorT<T> narrow_channels<T>(const TensorT<T>&, int, int);                   \
  template TensorT<T> add<T>(const TensorT<T>&, const TensorT<T>&);                      \
  template TensorT<T> sub<T>(const TensorT<T>&, const TensorT<T>&);                      \
  template TensorT<T> mul<T>(const TensorT<T>&, const TensorT<T>&);                      \
  template TensorT<T> add_scalar<T>(const TensorT<T>&, T);                               \
  template TensorT<T> mul_scalar<T>(const TensorT<T>&, T);                               \
  template TensorT<T> clamp01<T>(const TensorT<T>&);                                     \
  template TensorT<T> l1_loss<T>(const TensorT<T>&, const TensorT<T>&);                  \
  template TensorT<T> mean_all<T>(const TensorT<T>&);                                    \
  template TensorT<T> sum_all<T>(const TensorT<T>&);

RR_INSTANTIATE(float)
RR_INSTANTIATE(double)
#undef RR_INSTANTIATE

}  // namespace rerender
