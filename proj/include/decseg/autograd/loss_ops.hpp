#pragma once

#include <cmath>

#include "decseg/autograd/variable.hpp"

namespace decseg {

// Pixel cross-entropy from logits, mean over all (b, h, w). Labels are an int
// map [B,H,W] with values in [0, C). Fused log-softmax keeps it stable for
// large logits; backward is (softmax - onehot) / Npix.
template <class T>
Var<T> cross_entropy_logits(const Var<T>& logits, const Tensor<int>& labels) {
  DECSEG_CHECK(logits->value.dim() == 4, "cross_entropy_logits expects NCHW logits");
  const int B = logits->value.size(0), C = logits->value.size(1);
  const int H = logits->value.size(2), W = logits->value.size(3);
  DECSEG_CHECK(labels.dim() == 3 && labels.size(0) == B && labels.size(1) == H &&
                   labels.size(2) == W,
               "cross_entropy_logits: labels " << shape_str(labels.shape()) << " for logits "
                                               << shape_str(logits->value.shape()));
  const i64 plane = (i64)H * W;
  const i64 npix = (i64)B * plane;
  const T* pz = logits->value.data();
  const int* pl = labels.data();
  double total = 0.0;
  for (int b = 0; b < B; ++b) {
    const T* zb = pz + (i64)b * C * plane;
    const int* lb = pl + (i64)b * plane;
    for (i64 i = 0; i < plane; ++i) {
      const int yc = lb[i];
      DECSEG_CHECK(yc >= 0 && yc < C, "cross_entropy_logits: label " << yc << " outside [0,"
                                                                     << C << ")");
      T m = zb[i];
      for (int c = 1; c < C; ++c) m = std::max(m, zb[(i64)c * plane + i]);
      double lse = 0.0;
      for (int c = 0; c < C; ++c) lse += std::exp((double)(zb[(i64)c * plane + i] - m));
      total += std::log(lse) + (double)m - (double)zb[(i64)yc * plane + i];
    }
  }
  Tensor<T> y({1});
  y[0] = (T)(total / (double)npix);
  auto lab = std::make_shared<Tensor<int>>(labels);
  return make_op<T>(std::move(y), {logits}, [logits, lab, B, C, plane, npix](Node<T>& n) {
    if (!logits->requires_grad) return;
    const T g = n.grad[0] / (T)npix;
    const T* pz = logits->value.data();
    const int* pl = lab->data();
    T* dz = logits->ensure_grad().data();
    for (int b = 0; b < B; ++b) {
      const T* zb = pz + (i64)b * C * plane;
      T* db = dz + (i64)b * C * plane;
      const int* lb = pl + (i64)b * plane;
      for (i64 i = 0; i < plane; ++i) {
        T m = zb[i];
        for (int c = 1; c < C; ++c) m = std::max(m, zb[(i64)c * plane + i]);
        T z = T(0);
        for (int c = 0; c < C; ++c) z += std::exp(zb[(i64)c * plane + i] - m);
        for (int c = 0; c < C; ++c) {
          const T p = std::exp(zb[(i64)c * plane + i] - m) / z;
          db[(i64)c * plane + i] += g * (p - (c == lb[i] ? T(1) : T(0)));
        }
      }
    }
  });
}

// Soft Dice loss on the foreground probability channel of [B,2,H,W] probs:
//   per image: 1 - (2*sum(p*y) + eps) / (sum(p) + sum(y) + eps),  eps = 1
// then averaged over the batch. Gradients flow to channel 1 only (channel 0 is
// redundant under the softmax constraint).
template <class T>
Var<T> dice_loss_fg(const Var<T>& probs, const Tensor<int>& labels, double eps = 1.0) {
  DECSEG_CHECK(probs->value.dim() == 4 && probs->value.size(1) == 2,
               "dice_loss_fg expects [B,2,H,W] probabilities");
  const int B = probs->value.size(0), H = probs->value.size(2), W = probs->value.size(3);
  DECSEG_CHECK(labels.dim() == 3 && labels.size(0) == B && labels.size(1) == H &&
                   labels.size(2) == W,
               "dice_loss_fg: labels " << shape_str(labels.shape()) << " for probs "
                                       << shape_str(probs->value.shape()));
  const i64 plane = (i64)H * W;
  const T* pp = probs->value.data();
  const int* pl = labels.data();
  Tensor<T> y({1});
  // Keep per-image numerators/denominators for the backward pass.
  auto nums = std::make_shared<std::vector<double>>(B);
  auto dens = std::make_shared<std::vector<double>>(B);
  double total = 0.0;
  for (int b = 0; b < B; ++b) {
    const T* fg = pp + ((i64)b * 2 + 1) * plane;
    const int* lb = pl + (i64)b * plane;
    double inter = 0.0, psum = 0.0, ysum = 0.0;
    for (i64 i = 0; i < plane; ++i) {
      psum += fg[i];
      if (lb[i] != 0) {
        inter += fg[i];
        ysum += 1.0;
      }
    }
    (*nums)[b] = 2.0 * inter + eps;
    (*dens)[b] = psum + ysum + eps;
    total += 1.0 - (*nums)[b] / (*dens)[b];
  }
  y[0] = (T)(total / (double)B);
  auto lab = std::make_shared<Tensor<int>>(labels);
  return make_op<T>(std::move(y), {probs}, [probs, lab, nums, dens, B, plane](Node<T>& n) {
    if (!probs->requires_grad) return;
    const T g = n.grad[0] / (T)B;
    const int* pl = lab->data();
    T* dp = probs->ensure_grad().data();
    for (int b = 0; b < B; ++b) {
      const double num = (*nums)[b], den = (*dens)[b];
      T* dfg = dp + ((i64)b * 2 + 1) * plane;
      const int* lb = pl + (i64)b * plane;
      for (i64 i = 0; i < plane; ++i) {
        // d(1 - num/den)/dp_i = -(2*y_i*den - num) / den^2
        const double two_y = lb[i] != 0 ? 2.0 : 0.0;
        dfg[i] += g * (T)(-(two_y * den - num) / (den * den));
      }
    }
  });
}

// Mean squared error over all elements.
template <class T>
Var<T> mse_loss(const Var<T>& a, const Var<T>& b) {
  DECSEG_CHECK(a->value.same_shape(b->value),
               "mse_loss: shape mismatch " << shape_str(a->value.shape()) << " vs "
                                           << shape_str(b->value.shape()));
  const i64 n_el = a->value.numel();
  const T* pa = a->value.data();
  const T* pb = b->value.data();
  double s = 0.0;
  for (i64 i = 0; i < n_el; ++i) {
    const double d = (double)pa[i] - (double)pb[i];
    s += d * d;
  }
  Tensor<T> y({1});
  y[0] = (T)(s / (double)n_el);
  return make_op<T>(std::move(y), {a, b}, [a, b, n_el](Node<T>& n) {
    const T g = n.grad[0] * T(2) / (T)n_el;
    const T* pa = a->value.data();
    const T* pb = b->value.data();
    if (a->requires_grad) {
      T* da = a->ensure_grad().data();
      for (i64 i = 0; i < n_el; ++i) da[i] += g * (pa[i] - pb[i]);
    }
    if (b->requires_grad) {
      T* db = b->ensure_grad().data();
      for (i64 i = 0; i < n_el; ++i) db[i] -= g * (pa[i] - pb[i]);
    }
  });
}

}  // namespace decseg
