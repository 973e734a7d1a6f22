#pragma once

#include <cmath>

#include "decseg/autograd/variable.hpp"

namespace decseg {

// Batch normalization over (B, H, W) per channel.
//
// Training mode normalizes with batch statistics, updates running stats in
// place (running = (1-momentum)*running + momentum*batch, unbiased variance in
// the running buffer), and backpropagates through the statistics. Eval mode
// uses the running buffers.
template <class T>
Var<T> batch_norm2d(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                    Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                    double momentum = 0.1, double eps = 1e-5) {
  DECSEG_CHECK(x->value.dim() == 4, "batch_norm2d expects NCHW");
  const int B = x->value.size(0), C = x->value.size(1);
  const int H = x->value.size(2), W = x->value.size(3);
  DECSEG_CHECK(gamma->value.numel() == C && beta->value.numel() == C &&
                   running_mean.numel() == C && running_var.numel() == C,
               "batch_norm2d: parameter size mismatch for " << C << " channels");
  const i64 plane = (i64)H * W;
  const i64 cnt = (i64)B * plane;

  Tensor<T> y(x->value.shape());
  const T* px = x->value.data();
  const T* pg = gamma->value.data();
  const T* pb = beta->value.data();
  T* py = y.data();

  if (!training) {
    for (int c = 0; c < C; ++c) {
      const T inv = (T)(1.0 / std::sqrt((double)running_var[c] + eps));
      const T m = running_mean[c], gm = pg[c], bt = pb[c];
      for (int b = 0; b < B; ++b) {
        const T* xp = px + ((i64)b * C + c) * plane;
        T* yp = py + ((i64)b * C + c) * plane;
        for (i64 i = 0; i < plane; ++i) yp[i] = gm * (xp[i] - m) * inv + bt;
      }
    }
    return make_op<T>(std::move(y), {x, gamma, beta},
                      [x, gamma, beta, B, C, plane, rm = running_mean.clone(),
                       rv = running_var.clone(), eps](Node<T>& n) {
      const T* g = n.grad.data();
      const T* px = x->value.data();
      for (int c = 0; c < C; ++c) {
        const T inv = (T)(1.0 / std::sqrt((double)rv[c] + eps));
        const T gm = gamma->value[c];
        T dg = T(0), db = T(0);
        for (int b = 0; b < B; ++b) {
          const i64 off = ((i64)b * C + c) * plane;
          const T* gp = g + off;
          const T* xp = px + off;
          if (x->requires_grad) {
            T* dx = x->ensure_grad().data() + off;
            for (i64 i = 0; i < plane; ++i) dx[i] += gp[i] * gm * inv;
          }
          for (i64 i = 0; i < plane; ++i) {
            dg += gp[i] * (xp[i] - rm[c]) * inv;
            db += gp[i];
          }
        }
        if (gamma->requires_grad) gamma->ensure_grad()[c] += dg;
        if (beta->requires_grad) beta->ensure_grad()[c] += db;
      }
    });
  }

  DECSEG_CHECK(cnt > 1, "batch_norm2d: training mode needs more than one value per channel");
  Tensor<T> mean({C}), invstd({C});
  for (int c = 0; c < C; ++c) {
    double s = 0.0;
    for (int b = 0; b < B; ++b) {
      const T* xp = px + ((i64)b * C + c) * plane;
      for (i64 i = 0; i < plane; ++i) s += xp[i];
    }
    const double m = s / (double)cnt;
    double v = 0.0;
    for (int b = 0; b < B; ++b) {
      const T* xp = px + ((i64)b * C + c) * plane;
      for (i64 i = 0; i < plane; ++i) {
        const double d = xp[i] - m;
        v += d * d;
      }
    }
    const double var = v / (double)cnt;  // biased, used for normalization
    mean[c] = (T)m;
    invstd[c] = (T)(1.0 / std::sqrt(var + eps));
    running_mean[c] = (T)((1.0 - momentum) * running_mean[c] + momentum * m);
    const double var_unbiased = v / (double)(cnt - 1);
    running_var[c] = (T)((1.0 - momentum) * running_var[c] + momentum * var_unbiased);
    const T gm = pg[c], bt = pb[c], mm = mean[c], iv = invstd[c];
    for (int b = 0; b < B; ++b) {
      const T* xp = px + ((i64)b * C + c) * plane;
      T* yp = py + ((i64)b * C + c) * plane;
      for (i64 i = 0; i < plane; ++i) yp[i] = gm * (xp[i] - mm) * iv + bt;
    }
  }

  return make_op<T>(std::move(y), {x, gamma, beta},
                    [x, gamma, beta, B, C, plane, cnt, mean, invstd](Node<T>& n) {
    const T* g = n.grad.data();
    const T* px = x->value.data();
    for (int c = 0; c < C; ++c) {
      const T m = mean[c], iv = invstd[c];
      const T gm = gamma->value[c];
      // Reductions over the batch: sum dy and sum dy*xhat.
      double sum_g = 0.0, sum_gx = 0.0;
      for (int b = 0; b < B; ++b) {
        const i64 off = ((i64)b * C + c) * plane;
        const T* gp = g + off;
        const T* xp = px + off;
        for (i64 i = 0; i < plane; ++i) {
          sum_g += gp[i];
          sum_gx += gp[i] * (double)((xp[i] - m) * iv);
        }
      }
      if (gamma->requires_grad) gamma->ensure_grad()[c] += (T)sum_gx;
      if (beta->requires_grad) beta->ensure_grad()[c] += (T)sum_g;
      if (x->requires_grad) {
        // dx = (gamma*invstd/N) * (N*dy - sum(dy) - xhat*sum(dy*xhat))
        const T k = gm * iv / (T)cnt;
        for (int b = 0; b < B; ++b) {
          const i64 off = ((i64)b * C + c) * plane;
          const T* gp = g + off;
          const T* xp = px + off;
          T* dx = x->ensure_grad().data() + off;
          for (i64 i = 0; i < plane; ++i) {
            const T xhat = (xp[i] - m) * iv;
            dx[i] += k * ((T)cnt * gp[i] - (T)sum_g - xhat * (T)sum_gx);
          }
        }
      }
    }
  });
}

}  // namespace decseg
