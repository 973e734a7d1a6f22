#pragma once

#include <cmath>

#include "decseg/autograd/variable.hpp"

namespace decseg {

namespace detail {

template <class T>
void check_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  DECSEG_CHECK(a->value.same_shape(b->value),
               op << ": shape mismatch " << shape_str(a->value.shape()) << " vs "
                  << shape_str(b->value.shape()));
}

}  // namespace detail

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "add");
  Tensor<T> y(a->value.shape());
  const T* pa = a->value.data();
  const T* pb = b->value.data();
  T* py = y.data();
  for (i64 i = 0; i < y.numel(); ++i) py[i] = pa[i] + pb[i];
  return make_op<T>(std::move(y), {a, b}, [a, b](Node<T>& n) {
    const T* g = n.grad.data();
    if (a->requires_grad) {
      T* da = a->ensure_grad().data();
      for (i64 i = 0; i < n.grad.numel(); ++i) da[i] += g[i];
    }
    if (b->requires_grad) {
      T* db = b->ensure_grad().data();
      for (i64 i = 0; i < n.grad.numel(); ++i) db[i] += g[i];
    }
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "sub");
  Tensor<T> y(a->value.shape());
  const T* pa = a->value.data();
  const T* pb = b->value.data();
  T* py = y.data();
  for (i64 i = 0; i < y.numel(); ++i) py[i] = pa[i] - pb[i];
  return make_op<T>(std::move(y), {a, b}, [a, b](Node<T>& n) {
    const T* g = n.grad.data();
    if (a->requires_grad) {
      T* da = a->ensure_grad().data();
      for (i64 i = 0; i < n.grad.numel(); ++i) da[i] += g[i];
    }
    if (b->requires_grad) {
      T* db = b->ensure_grad().data();
      for (i64 i = 0; i < n.grad.numel(); ++i) db[i] -= g[i];
    }
  });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor<T> y(a->value.shape());
  const T* pa = a->value.data();
  const T* pb = b->value.data();
  T* py = y.data();
  for (i64 i = 0; i < y.numel(); ++i) py[i] = pa[i] * pb[i];
  return make_op<T>(std::move(y), {a, b}, [a, b](Node<T>& n) {
    const T* g = n.grad.data();
    if (a->requires_grad) {
      T* da = a->ensure_grad().data();
      const T* pb = b->value.data();
      for (i64 i = 0; i < n.grad.numel(); ++i) da[i] += g[i] * pb[i];
    }
    if (b->requires_grad) {
      T* db = b->ensure_grad().data();
      const T* pa = a->value.data();
      for (i64 i = 0; i < n.grad.numel(); ++i) db[i] += g[i] * pa[i];
    }
  });
}

template <class T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> y(a->value.shape());
  const T* pa = a->value.data();
  T* py = y.data();
  for (i64 i = 0; i < y.numel(); ++i) py[i] = pa[i] * s;
  return make_op<T>(std::move(y), {a}, [a, s](Node<T>& n) {
    if (!a->requires_grad) return;
    const T* g = n.grad.data();
    T* da = a->ensure_grad().data();
    for (i64 i = 0; i < n.grad.numel(); ++i) da[i] += g[i] * s;
  });
}

template <class T>
Var<T> relu(const Var<T>& a) {
  Tensor<T> y(a->value.shape());
  const T* pa = a->value.data();
  T* py = y.data();
  for (i64 i = 0; i < y.numel(); ++i) py[i] = pa[i] > T(0) ? pa[i] : T(0);
  return make_op<T>(std::move(y), {a}, [a](Node<T>& n) {
    if (!a->requires_grad) return;
    const T* g = n.grad.data();
    const T* py = n.value.data();
    T* da = a->ensure_grad().data();
    for (i64 i = 0; i < n.grad.numel(); ++i) {
      if (py[i] > T(0)) da[i] += g[i];
    }
  });
}

template <class T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> y(a->value.shape());
  const T* pa = a->value.data();
  T* py = y.data();
  for (i64 i = 0; i < y.numel(); ++i) py[i] = T(1) / (T(1) + std::exp(-pa[i]));
  return make_op<T>(std::move(y), {a}, [a](Node<T>& n) {
    if (!a->requires_grad) return;
    const T* g = n.grad.data();
    const T* py = n.value.data();
    T* da = a->ensure_grad().data();
    for (i64 i = 0; i < n.grad.numel(); ++i) da[i] += g[i] * py[i] * (T(1) - py[i]);
  });
}

// Channel softmax on NCHW: normalizes over dim 1 at every (b, h, w).
template <class T>
Var<T> softmax_channels(const Var<T>& a) {
  DECSEG_CHECK(a->value.dim() == 4, "softmax_channels expects NCHW");
  const int B = a->value.size(0), C = a->value.size(1);
  const int HW = a->value.size(2) * a->value.size(3);
  Tensor<T> y(a->value.shape());
  const T* px = a->value.data();
  T* py = y.data();
  for (int b = 0; b < B; ++b) {
    const T* xb = px + (i64)b * C * HW;
    T* yb = py + (i64)b * C * HW;
    for (int i = 0; i < HW; ++i) {
      T m = xb[i];
      for (int c = 1; c < C; ++c) m = std::max(m, xb[(i64)c * HW + i]);
      T z = T(0);
      for (int c = 0; c < C; ++c) {
        T e = std::exp(xb[(i64)c * HW + i] - m);
        yb[(i64)c * HW + i] = e;
        z += e;
      }
      for (int c = 0; c < C; ++c) yb[(i64)c * HW + i] /= z;
    }
  }
  return make_op<T>(std::move(y), {a}, [a, B, C, HW](Node<T>& n) {
    if (!a->requires_grad) return;
    const T* g = n.grad.data();
    const T* py = n.value.data();
    T* da = a->ensure_grad().data();
    for (int b = 0; b < B; ++b) {
      const i64 off = (i64)b * C * HW;
      for (int i = 0; i < HW; ++i) {
        T dot = T(0);
        for (int c = 0; c < C; ++c) {
          const i64 k = off + (i64)c * HW + i;
          dot += g[k] * py[k];
        }
        for (int c = 0; c < C; ++c) {
          const i64 k = off + (i64)c * HW + i;
          da[k] += py[k] * (g[k] - dot);
        }
      }
    }
  });
}

// Concatenate along channels (NCHW).
template <class T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
  DECSEG_CHECK(!xs.empty(), "concat_channels: empty input list");
  const int B = xs[0]->value.size(0), H = xs[0]->value.size(2), W = xs[0]->value.size(3);
  int C = 0;
  for (const auto& x : xs) {
    DECSEG_CHECK(x->value.dim() == 4 && x->value.size(0) == B && x->value.size(2) == H &&
                     x->value.size(3) == W,
                 "concat_channels: incompatible shape " << shape_str(x->value.shape()));
    C += x->value.size(1);
  }
  Tensor<T> y({B, C, H, W});
  const i64 plane = (i64)H * W;
  T* py = y.data();
  for (int b = 0; b < B; ++b) {
    i64 co = 0;
    for (const auto& x : xs) {
      const int ci = x->value.size(1);
      std::memcpy(py + ((i64)b * C + co) * plane, x->value.data() + (i64)b * ci * plane,
                  sizeof(T) * ci * plane);
      co += ci;
    }
  }
  std::vector<Var<T>> kept = xs;
  auto fn = [kept, B, C, plane](Node<T>& n) {
    const T* g = n.grad.data();
    for (int b = 0; b < B; ++b) {
      i64 co = 0;
      for (const auto& x : kept) {
        const int ci = x->value.size(1);
        if (x->requires_grad) {
          T* dx = x->ensure_grad().data() + (i64)b * ci * plane;
          const T* gs = g + ((i64)b * C + co) * plane;
          for (i64 i = 0; i < ci * plane; ++i) dx[i] += gs[i];
        }
        co += ci;
      }
    }
  };
  auto n = std::make_shared<Node<T>>(std::move(y));
  if (grad_enabled()) {
    for (const auto& x : xs) {
      if (x->requires_grad) n->inputs.push_back(x);
    }
    if (!n->inputs.empty()) {
      n->requires_grad = true;
      n->backward_fn = std::move(fn);
    }
  }
  return n;
}

template <class T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  return concat_channels<T>(std::vector<Var<T>>{a, b});
}

// Channel slice [c0, c1) of NCHW.
template <class T>
Var<T> slice_channels(const Var<T>& a, int c0, int c1) {
  DECSEG_CHECK(a->value.dim() == 4, "slice_channels expects NCHW");
  const int B = a->value.size(0), C = a->value.size(1);
  const i64 plane = (i64)a->value.size(2) * a->value.size(3);
  DECSEG_CHECK(0 <= c0 && c0 < c1 && c1 <= C, "slice_channels: bad range [" << c0 << "," << c1
                                                                            << ") of " << C);
  const int Cs = c1 - c0;
  Tensor<T> y({B, Cs, a->value.size(2), a->value.size(3)});
  for (int b = 0; b < B; ++b) {
    std::memcpy(y.data() + (i64)b * Cs * plane, a->value.data() + ((i64)b * C + c0) * plane,
                sizeof(T) * Cs * plane);
  }
  return make_op<T>(std::move(y), {a}, [a, B, C, c0, Cs, plane](Node<T>& n) {
    if (!a->requires_grad) return;
    const T* g = n.grad.data();
    T* da = a->ensure_grad().data();
    for (int b = 0; b < B; ++b) {
      T* ds = da + ((i64)b * C + c0) * plane;
      const T* gs = g + (i64)b * Cs * plane;
      for (i64 i = 0; i < Cs * plane; ++i) ds[i] += gs[i];
    }
  });
}

// Global average pool NCHW -> [B, C, 1, 1].
template <class T>
Var<T> global_avg_pool(const Var<T>& a) {
  DECSEG_CHECK(a->value.dim() == 4, "global_avg_pool expects NCHW");
  const int B = a->value.size(0), C = a->value.size(1);
  const i64 plane = (i64)a->value.size(2) * a->value.size(3);
  Tensor<T> y({B, C, 1, 1});
  const T* px = a->value.data();
  T* py = y.data();
  for (i64 bc = 0; bc < (i64)B * C; ++bc) {
    T s = T(0);
    const T* p = px + bc * plane;
    for (i64 i = 0; i < plane; ++i) s += p[i];
    py[bc] = s / (T)plane;
  }
  return make_op<T>(std::move(y), {a}, [a, B, C, plane](Node<T>& n) {
    if (!a->requires_grad) return;
    const T* g = n.grad.data();
    T* da = a->ensure_grad().data();
    for (i64 bc = 0; bc < (i64)B * C; ++bc) {
      const T gi = g[bc] / (T)plane;
      T* d = da + bc * plane;
      for (i64 i = 0; i < plane; ++i) d[i] += gi;
    }
  });
}

// Per-channel scaling: y[b,c,:,:] = x[b,c,:,:] * w[b,c,0,0]. w is [B,C,1,1]
// (e.g. squeeze-excite style attention weights).
template <class T>
Var<T> scale_channels(const Var<T>& x, const Var<T>& w) {
  DECSEG_CHECK(x->value.dim() == 4 && w->value.dim() == 4, "scale_channels expects NCHW");
  const int B = x->value.size(0), C = x->value.size(1);
  DECSEG_CHECK(w->value.size(0) == B && w->value.size(1) == C && w->value.size(2) == 1 &&
                   w->value.size(3) == 1,
               "scale_channels: weight shape " << shape_str(w->value.shape()) << " for input "
                                               << shape_str(x->value.shape()));
  const i64 plane = (i64)x->value.size(2) * x->value.size(3);
  Tensor<T> y(x->value.shape());
  const T* px = x->value.data();
  const T* pw = w->value.data();
  T* py = y.data();
  for (i64 bc = 0; bc < (i64)B * C; ++bc) {
    const T s = pw[bc];
    const T* p = px + bc * plane;
    T* q = py + bc * plane;
    for (i64 i = 0; i < plane; ++i) q[i] = p[i] * s;
  }
  return make_op<T>(std::move(y), {x, w}, [x, w, B, C, plane](Node<T>& n) {
    const T* g = n.grad.data();
    if (x->requires_grad) {
      T* dx = x->ensure_grad().data();
      const T* pw = w->value.data();
      for (i64 bc = 0; bc < (i64)B * C; ++bc) {
        const T s = pw[bc];
        const T* gs = g + bc * plane;
        T* d = dx + bc * plane;
        for (i64 i = 0; i < plane; ++i) d[i] += gs[i] * s;
      }
    }
    if (w->requires_grad) {
      T* dw = w->ensure_grad().data();
      const T* px = x->value.data();
      for (i64 bc = 0; bc < (i64)B * C; ++bc) {
        const T* gs = g + bc * plane;
        const T* p = px + bc * plane;
        T s = T(0);
        for (i64 i = 0; i < plane; ++i) s += gs[i] * p[i];
        dw[bc] += s;
      }
    }
  });
}

// Two-map spatial blend: y = h1 * alpha[:,0] + h2 * alpha[:,1], alpha is
// [B,2,H,W] broadcast over the feature channels of h1/h2.
template <class T>
Var<T> blend_two(const Var<T>& h1, const Var<T>& h2, const Var<T>& alpha) {
  detail::check_same_shape(h1, h2, "blend_two");
  const int B = h1->value.size(0), C = h1->value.size(1);
  const int H = h1->value.size(2), W = h1->value.size(3);
  DECSEG_CHECK(alpha->value.dim() == 4 && alpha->value.size(0) == B &&
                   alpha->value.size(1) == 2 && alpha->value.size(2) == H &&
                   alpha->value.size(3) == W,
               "blend_two: alpha shape " << shape_str(alpha->value.shape()));
  const i64 plane = (i64)H * W;
  Tensor<T> y(h1->value.shape());
  const T* p1 = h1->value.data();
  const T* p2 = h2->value.data();
  const T* pa = alpha->value.data();
  T* py = y.data();
  for (int b = 0; b < B; ++b) {
    const T* a1 = pa + (i64)b * 2 * plane;
    const T* a2 = a1 + plane;
    for (int c = 0; c < C; ++c) {
      const i64 off = ((i64)b * C + c) * plane;
      for (i64 i = 0; i < plane; ++i) py[off + i] = p1[off + i] * a1[i] + p2[off + i] * a2[i];
    }
  }
  return make_op<T>(std::move(y), {h1, h2, alpha}, [h1, h2, alpha, B, C, plane](Node<T>& n) {
    const T* g = n.grad.data();
    const T* pa = alpha->value.data();
    for (int b = 0; b < B; ++b) {
      const T* a1 = pa + (i64)b * 2 * plane;
      const T* a2 = a1 + plane;
      if (h1->requires_grad) {
        T* d = h1->ensure_grad().data();
        for (int c = 0; c < C; ++c) {
          const i64 off = ((i64)b * C + c) * plane;
          for (i64 i = 0; i < plane; ++i) d[off + i] += g[off + i] * a1[i];
        }
      }
      if (h2->requires_grad) {
        T* d = h2->ensure_grad().data();
        for (int c = 0; c < C; ++c) {
          const i64 off = ((i64)b * C + c) * plane;
          for (i64 i = 0; i < plane; ++i) d[off + i] += g[off + i] * a2[i];
        }
      }
      if (alpha->requires_grad) {
        T* da = alpha->ensure_grad().data();
        T* d1 = da + (i64)b * 2 * plane;
        T* d2 = d1 + plane;
        const T* p1 = h1->value.data();
        const T* p2 = h2->value.data();
        for (int c = 0; c < C; ++c) {
          const i64 off = ((i64)b * C + c) * plane;
          for (i64 i = 0; i < plane; ++i) {
            d1[i] += g[off + i] * p1[off + i];
            d2[i] += g[off + i] * p2[off + i];
          }
        }
      }
    }
  });
}

template <class T>
Var<T> mean_all(const Var<T>& a) {
  Tensor<T> y({1});
  const T* pa = a->value.data();
  T s = T(0);
  for (i64 i = 0; i < a->value.numel(); ++i) s += pa[i];
  const i64 n_el = a->value.numel();
  y[0] = s / (T)n_el;
  return make_op<T>(std::move(y), {a}, [a, n_el](Node<T>& n) {
    if (!a->requires_grad) return;
    const T g = n.grad[0] / (T)n_el;
    T* da = a->ensure_grad().data();
    for (i64 i = 0; i < n_el; ++i) da[i] += g;
  });
}

template <class T>
Var<T> sum_all(const Var<T>& a) {
  Tensor<T> y({1});
  const T* pa = a->value.data();
  T s = T(0);
  for (i64 i = 0; i < a->value.numel(); ++i) s += pa[i];
  y[0] = s;
  const i64 n_el = a->value.numel();
  return make_op<T>(std::move(y), {a}, [a, n_el](Node<T>& n) {
    if (!a->requires_grad) return;
    const T g = n.grad[0];
    T* da = a->ensure_grad().data();
    for (i64 i = 0; i < n_el; ++i) da[i] += g;
  });
}

// Channel argmax (NCHW -> [B,H,W] int). Ties break toward the lower channel
// index, so a 0.5/0.5 two-class tie lands on background.
template <class T>
Tensor<int> argmax_channels(const Tensor<T>& x) {
  DECSEG_CHECK(x.dim() == 4, "argmax_channels expects NCHW");
  const int B = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
  const i64 plane = (i64)H * W;
  Tensor<int> out({B, H, W});
  const T* px = x.data();
  int* po = out.data();
  for (int b = 0; b < B; ++b) {
    const T* xb = px + (i64)b * C * plane;
    int* ob = po + (i64)b * plane;
    for (i64 i = 0; i < plane; ++i) {
      int best = 0;
      T bv = xb[i];
      for (int c = 1; c < C; ++c) {
        const T v = xb[(i64)c * plane + i];
        if (v > bv) {
          bv = v;
          best = c;
        }
      }
      ob[i] = best;
    }
  }
  return out;
}

}  // namespace decseg
