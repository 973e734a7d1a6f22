#pragma once

#include <limits>

#include <Eigen/Core>

#include "decseg/autograd/variable.hpp"

namespace decseg {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapRM = Eigen::Map<RowMat<T>>;
template <class T>
using CMapRM = Eigen::Map<const RowMat<T>>;

// Unfold one image [C,H,W] into columns [C*kh*kw, OH*OW] (row-major), so that
// conv becomes a single GEMM: y = W[Co, C*kh*kw] * col.
template <class T>
void im2col(const T* x, int C, int H, int W, int kh, int kw, int stride, int pad, int OH,
            int OW, T* col) {
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        T* dst = col + ((i64)(c * kh + ki) * kw + kj) * OH * OW;
        for (int oh = 0; oh < OH; ++oh, dst += OW) {
          const int ih = oh * stride + ki - pad;
          if (ih < 0 || ih >= H) {
            std::fill(dst, dst + OW, T(0));
            continue;
          }
          const T* src = x + ((i64)c * H + ih) * W;
          if (stride == 1) {
            // iw = ow + kj - pad must lie in [0, W)
            const int ow0 = std::max(0, pad - kj);
            const int ow1 = std::min(OW, W - kj + pad);
            for (int ow = 0; ow < ow0; ++ow) dst[ow] = T(0);
            if (ow1 > ow0) std::copy(src + ow0 + kj - pad, src + ow1 + kj - pad, dst + ow0);
            for (int ow = ow1; ow < OW; ++ow) dst[ow] = T(0);
          } else {
            for (int ow = 0; ow < OW; ++ow) {
              const int iw = ow * stride + kj - pad;
              dst[ow] = (iw >= 0 && iw < W) ? src[iw] : T(0);
            }
          }
        }
      }
    }
  }
}

// Scatter-add columns back onto an image; adjoint of im2col.
template <class T>
void col2im_add(const T* col, int C, int H, int W, int kh, int kw, int stride, int pad, int OH,
                int OW, T* x) {
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const T* src = col + ((i64)(c * kh + ki) * kw + kj) * OH * OW;
        for (int oh = 0; oh < OH; ++oh, src += OW) {
          const int ih = oh * stride + ki - pad;
          if (ih < 0 || ih >= H) continue;
          T* dst = x + ((i64)c * H + ih) * W;
          for (int ow = 0; ow < OW; ++ow) {
            const int iw = ow * stride + kj - pad;
            if (iw >= 0 && iw < W) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

inline int conv_out_size(int n, int k, int stride, int pad) {
  return (n + 2 * pad - k) / stride + 1;
}

}  // namespace detail

// 2D convolution, NCHW x [Co,Ci,kh,kw] (+ optional bias [Co]).
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int stride, int pad) {
  DECSEG_CHECK(x->value.dim() == 4 && w->value.dim() == 4, "conv2d expects NCHW input/weight");
  const int B = x->value.size(0), Ci = x->value.size(1);
  const int H = x->value.size(2), W = x->value.size(3);
  const int Co = w->value.size(0), kh = w->value.size(2), kw = w->value.size(3);
  DECSEG_CHECK(w->value.size(1) == Ci, "conv2d: weight expects " << w->value.size(1)
                                                                 << " input channels, got " << Ci);
  const int OH = detail::conv_out_size(H, kh, stride, pad);
  const int OW = detail::conv_out_size(W, kw, stride, pad);
  DECSEG_CHECK(OH > 0 && OW > 0, "conv2d: output would be empty for input "
                                     << shape_str(x->value.shape()));
  const int K = Ci * kh * kw;
  const i64 ohw = (i64)OH * OW;

  Tensor<T> y({B, Co, OH, OW});
  Tensor<T> col({K, OH, OW});  // scratch, reused per batch item
  detail::CMapRM<T> wm(w->value.data(), Co, K);
  for (int b = 0; b < B; ++b) {
    detail::im2col(x->value.data() + (i64)b * Ci * H * W, Ci, H, W, kh, kw, stride, pad, OH, OW,
                   col.data());
    detail::CMapRM<T> cm(col.data(), K, ohw);
    detail::MapRM<T> ym(y.data() + (i64)b * Co * ohw, Co, ohw);
    ym.noalias() = wm * cm;
  }
  if (bias) {
    DECSEG_CHECK(bias->value.numel() == Co, "conv2d: bias size " << bias->value.numel()
                                                                 << " for " << Co << " channels");
    const T* pb = bias->value.data();
    T* py = y.data();
    for (int b = 0; b < B; ++b) {
      for (int c = 0; c < Co; ++c) {
        const T bv = pb[c];
        T* p = py + ((i64)b * Co + c) * ohw;
        for (i64 i = 0; i < ohw; ++i) p[i] += bv;
      }
    }
  }

  auto fn = [x, w, bias, B, Ci, H, W, Co, kh, kw, stride, pad, OH, OW, K, ohw](Node<T>& n) {
    const T* g = n.grad.data();
    Tensor<T> col({K, OH, OW});
    detail::CMapRM<T> wm(w->value.data(), Co, K);
    for (int b = 0; b < B; ++b) {
      detail::CMapRM<T> gm(g + (i64)b * Co * ohw, Co, ohw);
      if (w->requires_grad) {
        // dW += g_b * col_b^T; col recomputed to avoid holding it across the pass.
        detail::im2col(x->value.data() + (i64)b * Ci * H * W, Ci, H, W, kh, kw, stride, pad, OH,
                       OW, col.data());
        detail::CMapRM<T> cm(col.data(), K, ohw);
        detail::MapRM<T> dwm(w->ensure_grad().data(), Co, K);
        dwm.noalias() += gm * cm.transpose();
      }
      if (x->requires_grad) {
        detail::MapRM<T> cm(col.data(), K, ohw);
        cm.noalias() = wm.transpose() * gm;
        detail::col2im_add(col.data(), Ci, H, W, kh, kw, stride, pad, OH, OW,
                           x->ensure_grad().data() + (i64)b * Ci * H * W);
      }
    }
    if (bias && bias->requires_grad) {
      T* db = bias->ensure_grad().data();
      for (int b = 0; b < B; ++b) {
        for (int c = 0; c < Co; ++c) {
          const T* p = g + ((i64)b * Co + c) * ohw;
          T s = T(0);
          for (i64 i = 0; i < ohw; ++i) s += p[i];
          db[c] += s;
        }
      }
    }
  };
  if (bias) return make_op<T>(std::move(y), {x, w, bias}, std::move(fn));
  return make_op<T>(std::move(y), {x, w}, std::move(fn));
}

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, int stride, int pad) {
  return conv2d(x, w, Var<T>{}, stride, pad);
}

// Transposed convolution with kernel 2, stride 2: exact 2x upsampling with no
// output overlap. Weight layout [Ci, Co, 2, 2], per convention for transposed
// convs. Each input pixel paints a 2x2 output tile, so both passes are GEMMs.
template <class T>
Var<T> conv_transpose2d_k2s2(const Var<T>& x, const Var<T>& w, const Var<T>& bias) {
  DECSEG_CHECK(x->value.dim() == 4 && w->value.dim() == 4,
               "conv_transpose2d expects NCHW input/weight");
  DECSEG_CHECK(w->value.size(2) == 2 && w->value.size(3) == 2,
               "conv_transpose2d: kernel must be 2x2, got " << shape_str(w->value.shape()));
  const int B = x->value.size(0), Ci = x->value.size(1);
  const int H = x->value.size(2), W = x->value.size(3);
  DECSEG_CHECK(w->value.size(0) == Ci, "conv_transpose2d: weight expects "
                                           << w->value.size(0) << " input channels, got " << Ci);
  const int Co = w->value.size(1);
  const int OH = 2 * H, OW = 2 * W;
  const i64 hw = (i64)H * W;
  const int K4 = Co * 4;

  Tensor<T> y({B, Co, OH, OW});
  Tensor<T> tile({K4, H, W});  // rows are (co, ki, kj) sub-pixel planes
  detail::CMapRM<T> wm(w->value.data(), Ci, K4);
  const T* pb = bias ? bias->value.data() : nullptr;
  if (bias) {
    DECSEG_CHECK(bias->value.numel() == Co, "conv_transpose2d: bias size "
                                                << bias->value.numel() << " for " << Co
                                                << " channels");
  }
  for (int b = 0; b < B; ++b) {
    detail::CMapRM<T> xm(x->value.data() + (i64)b * Ci * hw, Ci, hw);
    detail::MapRM<T> tm(tile.data(), K4, hw);
    tm.noalias() = wm.transpose() * xm;
    for (int co = 0; co < Co; ++co) {
      const T bv = pb ? pb[co] : T(0);
      T* yb = y.data() + ((i64)b * Co + co) * OH * OW;
      for (int ki = 0; ki < 2; ++ki) {
        for (int kj = 0; kj < 2; ++kj) {
          const T* src = tile.data() + ((i64)co * 4 + ki * 2 + kj) * hw;
          for (int ih = 0; ih < H; ++ih) {
            T* dst = yb + (i64)(2 * ih + ki) * OW + kj;
            const T* s = src + (i64)ih * W;
            for (int iw = 0; iw < W; ++iw) dst[2 * iw] = s[iw] + bv;
          }
        }
      }
    }
  }

  auto fn = [x, w, bias, B, Ci, H, W, Co, OH, OW, hw, K4](Node<T>& n) {
    const T* g = n.grad.data();
    Tensor<T> tile({K4, H, W});
    // Gather the output grad into sub-pixel planes once per item; both dW and
    // dx are GEMMs against it.
    for (int b = 0; b < B; ++b) {
      for (int co = 0; co < Co; ++co) {
        const T* gb = g + ((i64)b * Co + co) * OH * OW;
        for (int ki = 0; ki < 2; ++ki) {
          for (int kj = 0; kj < 2; ++kj) {
            T* dst = tile.data() + ((i64)co * 4 + ki * 2 + kj) * hw;
            for (int ih = 0; ih < H; ++ih) {
              const T* src = gb + (i64)(2 * ih + ki) * OW + kj;
              T* d = dst + (i64)ih * W;
              for (int iw = 0; iw < W; ++iw) d[iw] = src[2 * iw];
            }
          }
        }
      }
      detail::CMapRM<T> tm(tile.data(), K4, hw);
      if (x->requires_grad) {
        detail::CMapRM<T> wm(w->value.data(), Ci, K4);
        detail::MapRM<T> dxm(x->ensure_grad().data() + (i64)b * Ci * hw, Ci, hw);
        dxm.noalias() += wm * tm;
      }
      if (w->requires_grad) {
        detail::CMapRM<T> xm(x->value.data() + (i64)b * Ci * hw, Ci, hw);
        detail::MapRM<T> dwm(w->ensure_grad().data(), Ci, K4);
        dwm.noalias() += xm * tm.transpose();
      }
    }
    if (bias && bias->requires_grad) {
      T* db = bias->ensure_grad().data();
      for (int b = 0; b < B; ++b) {
        for (int co = 0; co < Co; ++co) {
          const T* p = g + ((i64)b * Co + co) * OH * OW;
          T s = T(0);
          for (i64 i = 0; i < (i64)OH * OW; ++i) s += p[i];
          db[co] += s;
        }
      }
    }
  };
  if (bias) return make_op<T>(std::move(y), {x, w, bias}, std::move(fn));
  return make_op<T>(std::move(y), {x, w}, std::move(fn));
}

// Max pooling (used by the residual backbone stem). Stores argmax for backward.
template <class T>
Var<T> max_pool2d(const Var<T>& x, int k, int stride, int pad) {
  DECSEG_CHECK(x->value.dim() == 4, "max_pool2d expects NCHW");
  const int B = x->value.size(0), C = x->value.size(1);
  const int H = x->value.size(2), W = x->value.size(3);
  const int OH = detail::conv_out_size(H, k, stride, pad);
  const int OW = detail::conv_out_size(W, k, stride, pad);
  Tensor<T> y({B, C, OH, OW});
  auto idx = std::make_shared<Tensor<int>>(std::vector<int>{B, C, OH, OW});
  const T* px = x->value.data();
  T* py = y.data();
  int* pi = idx->data();
  for (i64 bc = 0; bc < (i64)B * C; ++bc) {
    const T* xp = px + bc * H * W;
    T* yp = py + bc * OH * OW;
    int* ip = pi + bc * OH * OW;
    for (int oh = 0; oh < OH; ++oh) {
      for (int ow = 0; ow < OW; ++ow) {
        T best = -std::numeric_limits<T>::infinity();
        int bi = -1;
        for (int ki = 0; ki < k; ++ki) {
          const int ih = oh * stride + ki - pad;
          if (ih < 0 || ih >= H) continue;
          for (int kj = 0; kj < k; ++kj) {
            const int iw = ow * stride + kj - pad;
            if (iw < 0 || iw >= W) continue;
            const T v = xp[(i64)ih * W + iw];
            if (v > best) {
              best = v;
              bi = ih * W + iw;
            }
          }
        }
        DECSEG_CHECK(bi >= 0, "max_pool2d: window fell entirely in padding");
        yp[(i64)oh * OW + ow] = best;
        ip[(i64)oh * OW + ow] = bi;
      }
    }
  }
  return make_op<T>(std::move(y), {x}, [x, idx, B, C, H, W, OH, OW](Node<T>& n) {
    if (!x->requires_grad) return;
    const T* g = n.grad.data();
    const int* pi = idx->data();
    T* dx = x->ensure_grad().data();
    for (i64 bc = 0; bc < (i64)B * C; ++bc) {
      const T* gp = g + bc * OH * OW;
      const int* ip = pi + bc * OH * OW;
      T* dp = dx + bc * H * W;
      for (i64 i = 0; i < (i64)OH * OW; ++i) dp[ip[i]] += gp[i];
    }
  });
}

// Average pooling (count includes padding positions, torch default
// count_include_pad=true for AvgPool2d).
template <class T>
Var<T> avg_pool2d(const Var<T>& x, int k, int stride, int pad) {
  DECSEG_CHECK(x->value.dim() == 4, "avg_pool2d expects NCHW");
  const int B = x->value.size(0), C = x->value.size(1);
  const int H = x->value.size(2), W = x->value.size(3);
  const int OH = detail::conv_out_size(H, k, stride, pad);
  const int OW = detail::conv_out_size(W, k, stride, pad);
  const T inv = T(1) / (T)(k * k);
  Tensor<T> y({B, C, OH, OW});
  const T* px = x->value.data();
  T* py = y.data();
  for (i64 bc = 0; bc < (i64)B * C; ++bc) {
    const T* xp = px + bc * H * W;
    T* yp = py + bc * OH * OW;
    for (int oh = 0; oh < OH; ++oh) {
      for (int ow = 0; ow < OW; ++ow) {
        T s = T(0);
        for (int ki = 0; ki < k; ++ki) {
          const int ih = oh * stride + ki - pad;
          if (ih < 0 || ih >= H) continue;
          for (int kj = 0; kj < k; ++kj) {
            const int iw = ow * stride + kj - pad;
            if (iw < 0 || iw >= W) continue;
            s += xp[(i64)ih * W + iw];
          }
        }
        yp[(i64)oh * OW + ow] = s * inv;
      }
    }
  }
  return make_op<T>(std::move(y), {x}, [x, B, C, H, W, OH, OW, k, stride, pad, inv](Node<T>& n) {
    if (!x->requires_grad) return;
    const T* g = n.grad.data();
    T* dx = x->ensure_grad().data();
    for (i64 bc = 0; bc < (i64)B * C; ++bc) {
      const T* gp = g + bc * OH * OW;
      T* dp = dx + bc * H * W;
      for (int oh = 0; oh < OH; ++oh) {
        for (int ow = 0; ow < OW; ++ow) {
          const T gi = gp[(i64)oh * OW + ow] * inv;
          for (int ki = 0; ki < k; ++ki) {
            const int ih = oh * stride + ki - pad;
            if (ih < 0 || ih >= H) continue;
            for (int kj = 0; kj < k; ++kj) {
              const int iw = ow * stride + kj - pad;
              if (iw < 0 || iw >= W) continue;
              dp[(i64)ih * W + iw] += gi;
            }
          }
        }
      }
    }
  });
}

}  // namespace decseg
