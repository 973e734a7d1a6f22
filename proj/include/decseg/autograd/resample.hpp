#pragma once

#include <cmath>

#include "decseg/autograd/variable.hpp"

namespace decseg {

namespace detail {

// Bilinear tap table for one axis, half-pixel convention (source coordinate of
// output pixel o is (o + 0.5) * in/out - 0.5), edges clamped.
struct Tap {
  int i0, i1;
  double w0, w1;
};

inline std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const double r = (double)in / (double)out;
  for (int o = 0; o < out; ++o) {
    double s = (o + 0.5) * r - 0.5;
    if (s < 0) s = 0;
    if (s > in - 1) s = in - 1;
    int i0 = (int)std::floor(s);
    if (i0 > in - 2) i0 = in - 2;
    if (i0 < 0) i0 = 0;  // in == 1
    const int i1 = std::min(i0 + 1, in - 1);
    const double t = s - i0;
    taps[o] = {i0, i1, 1.0 - t, t};
  }
  return taps;
}

// Raw-buffer bilinear kernel shared by the graph op and the data pipeline.
template <class T>
void resize_bilinear_plane(const T* src, int H, int W, T* dst, int OH, int OW,
                           const std::vector<Tap>& th, const std::vector<Tap>& tw) {
  for (int oh = 0; oh < OH; ++oh) {
    const Tap& a = th[oh];
    const T* r0 = src + (i64)a.i0 * W;
    const T* r1 = src + (i64)a.i1 * W;
    T* d = dst + (i64)oh * OW;
    for (int ow = 0; ow < OW; ++ow) {
      const Tap& b = tw[ow];
      const double top = a.w0 * (b.w0 * r0[b.i0] + b.w1 * r0[b.i1]);
      const double bot = a.w1 * (b.w0 * r1[b.i0] + b.w1 * r1[b.i1]);
      d[ow] = (T)(top + bot);
    }
  }
}

}  // namespace detail

// Bilinear resize of NCHW features to an exact target size. Upsampling to 2x
// and downsampling to half are the common cases; odd deep-level sizes resolve
// by resizing to the reference map's size.
template <class T>
Var<T> resize_bilinear(const Var<T>& x, int OH, int OW) {
  DECSEG_CHECK(x->value.dim() == 4, "resize_bilinear expects NCHW");
  DECSEG_CHECK(OH > 0 && OW > 0, "resize_bilinear: bad target " << OH << "x" << OW);
  const int B = x->value.size(0), C = x->value.size(1);
  const int H = x->value.size(2), W = x->value.size(3);
  if (OH == H && OW == W) return x;
  auto th = detail::bilinear_taps(H, OH);
  auto tw = detail::bilinear_taps(W, OW);
  Tensor<T> y({B, C, OH, OW});
  for (i64 bc = 0; bc < (i64)B * C; ++bc) {
    detail::resize_bilinear_plane(x->value.data() + bc * H * W, H, W, y.data() + bc * OH * OW,
                                  OH, OW, th, tw);
  }
  return make_op<T>(std::move(y), {x},
                    [x, B, C, H, W, OH, OW, th = std::move(th), tw = std::move(tw)](Node<T>& n) {
    if (!x->requires_grad) return;
    const T* g = n.grad.data();
    T* dx = x->ensure_grad().data();
    for (i64 bc = 0; bc < (i64)B * C; ++bc) {
      const T* gp = g + bc * OH * OW;
      T* dp = dx + bc * H * W;
      for (int oh = 0; oh < OH; ++oh) {
        const detail::Tap& a = th[oh];
        for (int ow = 0; ow < OW; ++ow) {
          const detail::Tap& b = tw[ow];
          const T gi = gp[(i64)oh * OW + ow];
          dp[(i64)a.i0 * W + b.i0] += (T)(a.w0 * b.w0) * gi;
          dp[(i64)a.i0 * W + b.i1] += (T)(a.w0 * b.w1) * gi;
          dp[(i64)a.i1 * W + b.i0] += (T)(a.w1 * b.w0) * gi;
          dp[(i64)a.i1 * W + b.i1] += (T)(a.w1 * b.w1) * gi;
        }
      }
    }
  });
}

// Resize to match a reference feature map's spatial size.
template <class T>
Var<T> resize_like(const Var<T>& x, const Var<T>& ref) {
  return resize_bilinear(x, ref->value.size(2), ref->value.size(3));
}

// Value-level bilinear resize on a [C,H,W] image (data pipeline).
template <class T>
Tensor<T> resize_bilinear_chw(const Tensor<T>& x, int OH, int OW) {
  DECSEG_CHECK(x.dim() == 3, "resize_bilinear_chw expects CHW, got " << shape_str(x.shape()));
  const int C = x.size(0), H = x.size(1), W = x.size(2);
  if (OH == H && OW == W) return x;
  auto th = detail::bilinear_taps(H, OH);
  auto tw = detail::bilinear_taps(W, OW);
  Tensor<T> y({C, OH, OW});
  for (int c = 0; c < C; ++c) {
    detail::resize_bilinear_plane(x.data() + (i64)c * H * W, H, W, y.data() + (i64)c * OH * OW,
                                  OH, OW, th, tw);
  }
  return y;
}

// Exact half-size downsample (2x2 mean). Requires even spatial dims so each
// output pixel owns a whole 2x2 block; deeper odd sizes never reach this op.
template <class T>
Tensor<T> downsample_half_chw(const Tensor<T>& x) {
  DECSEG_CHECK(x.dim() == 3, "downsample_half expects CHW, got " << shape_str(x.shape()));
  const int C = x.size(0), H = x.size(1), W = x.size(2);
  DECSEG_CHECK(H % 2 == 0 && W % 2 == 0,
               "downsample_half requires even spatial dims, got " << H << "x" << W);
  Tensor<T> y({C, H / 2, W / 2});
  for (int c = 0; c < C; ++c) {
    const T* src = x.data() + (i64)c * H * W;
    T* dst = y.data() + (i64)c * (H / 2) * (W / 2);
    for (int oh = 0; oh < H / 2; ++oh) {
      const T* r0 = src + (i64)(2 * oh) * W;
      const T* r1 = r0 + W;
      for (int ow = 0; ow < W / 2; ++ow) {
        dst[(i64)oh * (W / 2) + ow] =
            (T)(T(0.25) * (r0[2 * ow] + r0[2 * ow + 1] + r1[2 * ow] + r1[2 * ow + 1]));
      }
    }
  }
  return y;
}

// Batched value-level half-downsample (NCHW).
template <class T>
Tensor<T> downsample_half_nchw(const Tensor<T>& x) {
  DECSEG_CHECK(x.dim() == 4, "downsample_half expects NCHW, got " << shape_str(x.shape()));
  const int B = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
  DECSEG_CHECK(H % 2 == 0 && W % 2 == 0,
               "downsample_half requires even spatial dims, got " << H << "x" << W);
  Tensor<T> y({B, C, H / 2, W / 2});
  const i64 hw = (i64)H * W, ohw = hw / 4;
  for (i64 bc = 0; bc < (i64)B * C; ++bc) {
    const T* src = x.data() + bc * hw;
    T* dst = y.data() + bc * ohw;
    for (int oh = 0; oh < H / 2; ++oh) {
      const T* r0 = src + (i64)(2 * oh) * W;
      const T* r1 = r0 + W;
      for (int ow = 0; ow < W / 2; ++ow) {
        dst[(i64)oh * (W / 2) + ow] =
            (T)(T(0.25) * (r0[2 * ow] + r0[2 * ow + 1] + r1[2 * ow] + r1[2 * ow + 1]));
      }
    }
  }
  return y;
}

// Nearest-neighbor resize for integer label maps (source index floor(d*in/out),
// so 2x up is pixel replication and half down keeps the top-left of each block).
template <class T>
Tensor<T> resize_nearest(const Tensor<T>& x, int OH, int OW) {
  DECSEG_CHECK(x.dim() == 2 || x.dim() == 3,
               "resize_nearest expects [H,W] or [B,H,W], got " << shape_str(x.shape()));
  const bool batched = x.dim() == 3;
  const int B = batched ? x.size(0) : 1;
  const int H = batched ? x.size(1) : x.size(0);
  const int W = batched ? x.size(2) : x.size(1);
  Tensor<T> y(batched ? std::vector<int>{B, OH, OW} : std::vector<int>{OH, OW});
  std::vector<int> col(OW);
  for (int ow = 0; ow < OW; ++ow) col[ow] = std::min((int)((i64)ow * W / OW), W - 1);
  for (int b = 0; b < B; ++b) {
    const T* src = x.data() + (i64)b * H * W;
    T* dst = y.data() + (i64)b * OH * OW;
    for (int oh = 0; oh < OH; ++oh) {
      const int ih = std::min((int)((i64)oh * H / OH), H - 1);
      const T* r = src + (i64)ih * W;
      T* d = dst + (i64)oh * OW;
      for (int ow = 0; ow < OW; ++ow) d[ow] = r[col[ow]];
    }
  }
  return y;
}

}  // namespace decseg
