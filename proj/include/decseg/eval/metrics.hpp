#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "decseg/core/common.hpp"
#include "decseg/core/tensor.hpp"

namespace decseg {

// Per-image segmentation scores. `pred` is a foreground probability map in
// [0,1]; `gt` is a binary mask. Conventions:
//   dice/iou  - on the thresholded map (p > 0.5); both-empty pairs score 1
//   mae       - mean absolute error of the raw probabilities
//   wfb       - weighted F-beta on the raw probabilities (beta = 1)
//   smeasure  - structure measure, alpha = 0.5
struct PairScores {
  double dice = 0.0;
  double iou = 0.0;
  double mae = 0.0;
  double wfb = 0.0;
  double smeasure = 0.0;
};

namespace detail {

constexpr double kMatEps = 2.2204460492503131e-16;  // double machine epsilon

// Exact squared-Euclidean distance transform with nearest-site recovery
// (per-column vertical sweep, then a lower-envelope-of-parabolas sweep per
// row). `site` marks source pixels; outputs per pixel the squared distance
// to the nearest site and that site's row-major linear index. An equidistant
// tie resolves to whichever site the envelope retains (deterministic).
// Requires at least one site.
inline void distance_transform(const std::vector<std::uint8_t>& site, int H, int W,
                               std::vector<double>& dist, std::vector<i64>& index) {
  const i64 n = (i64)H * W;
  dist.assign(n, 0.0);
  index.assign(n, 0);

  constexpr i64 kInf = std::numeric_limits<i64>::max() / 4;
  // Phase 1: per column, nearest site row (vertical distance only).
  std::vector<int> near_row((size_t)n, -1);
  std::vector<i64> vsq((size_t)n, kInf);
  for (int x = 0; x < W; ++x) {
    int last = -1;
    for (int y = 0; y < H; ++y) {
      if (site[(size_t)y * W + x]) last = y;
      if (last >= 0) {
        near_row[(size_t)y * W + x] = last;
        vsq[(size_t)y * W + x] = (i64)(y - last) * (y - last);
      }
    }
    last = -1;
    for (int y = H - 1; y >= 0; --y) {
      if (site[(size_t)y * W + x]) last = y;
      if (last >= 0) {
        const i64 d = (i64)(last - y) * (last - y);
        // Strict comparison keeps the site from above on a tie.
        if (d < vsq[(size_t)y * W + x]) {
          vsq[(size_t)y * W + x] = d;
          near_row[(size_t)y * W + x] = last;
        }
      }
    }
  }

  // Phase 2: per row, lower envelope of the parabolas x -> (x-q)^2 + vsq(q).
  std::vector<int> v((size_t)W);      // column of the q-th envelope parabola
  std::vector<double> z((size_t)W + 1);  // envelope breakpoints
  for (int y = 0; y < H; ++y) {
    const i64 row_off = (i64)y * W;
    int k = -1;
    for (int q = 0; q < W; ++q) {
      const i64 fq = vsq[row_off + q];
      if (fq >= kInf) continue;  // empty column
      double s;
      while (true) {
        if (k < 0) break;
        const int p = v[(size_t)k];
        const i64 fp = vsq[row_off + p];
        s = (double)((fq + (i64)q * q) - (fp + (i64)p * p)) / (double)(2 * (q - p));
        if (s > z[(size_t)k]) break;
        --k;
      }
      if (k < 0) {
        k = 0;
        v[0] = q;
        z[0] = -std::numeric_limits<double>::infinity();
        z[1] = std::numeric_limits<double>::infinity();
      } else {
        ++k;
        v[(size_t)k] = q;
        z[(size_t)k] = s;
        z[(size_t)k + 1] = std::numeric_limits<double>::infinity();
      }
    }
    DECSEG_CHECK(k >= 0, "distance_transform: no sites present");
    int j = 0;
    for (int x = 0; x < W; ++x) {
      while (z[(size_t)j + 1] < (double)x) ++j;
      const int q = v[(size_t)j];
      const i64 d = (i64)(x - q) * (x - q) + vsq[row_off + q];
      dist[(size_t)(row_off + x)] = (double)d;
      index[(size_t)(row_off + x)] = (i64)near_row[row_off + q] * W + q;
    }
  }
}

// 7x7 Gaussian (sigma 5), normalized to unit sum; zero-padded correlation.
inline std::vector<double> gauss7x7_correlate(const std::vector<double>& img, int H, int W) {
  double kernel[7][7];
  double ksum = 0.0;
  for (int i = -3; i <= 3; ++i) {
    for (int j = -3; j <= 3; ++j) {
      kernel[i + 3][j + 3] = std::exp(-(double)(i * i + j * j) / (2.0 * 25.0));
      ksum += kernel[i + 3][j + 3];
    }
  }
  for (auto& row : kernel) {
    for (double& k : row) k /= ksum;
  }
  std::vector<double> out((size_t)H * W, 0.0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int i = -3; i <= 3; ++i) {
        const int yy = y + i;
        if (yy < 0 || yy >= H) continue;
        for (int j = -3; j <= 3; ++j) {
          const int xx = x + j;
          if (xx < 0 || xx >= W) continue;
          acc += kernel[i + 3][j + 3] * img[(size_t)yy * W + xx];
        }
      }
      out[(size_t)y * W + x] = acc;
    }
  }
  return out;
}

// Weighted F-beta (beta = 1): errors at background pixels are replaced by the
// error at the nearest foreground pixel before Gaussian averaging, foreground
// errors may only improve, and background errors are amplified with distance.
inline double weighted_fbeta(const Tensor<double>& pred, const Tensor<int>& gt) {
  const int H = pred.size(0), W = pred.size(1);
  const i64 n = (i64)H * W;

  std::vector<std::uint8_t> fg((size_t)n);
  i64 fg_count = 0;
  for (i64 i = 0; i < n; ++i) {
    fg[(size_t)i] = gt[i] != 0;
    fg_count += fg[(size_t)i];
  }
  if (fg_count == 0) {
    // Empty-target convention: score the absence of foreground directly.
    double s = 0.0;
    for (i64 i = 0; i < n; ++i) s += pred[i];
    return 1.0 - s / (double)n;
  }

  std::vector<double> e((size_t)n);
  for (i64 i = 0; i < n; ++i) e[(size_t)i] = std::abs(pred[i] - (double)(gt[i] != 0));

  std::vector<double> dist;
  std::vector<i64> near;
  distance_transform(fg, H, W, dist, near);

  std::vector<double> et = e;
  for (i64 i = 0; i < n; ++i) {
    if (!fg[(size_t)i]) et[(size_t)i] = e[(size_t)near[(size_t)i]];
  }
  const auto ea = gauss7x7_correlate(et, H, W);

  const double decay = std::log(0.5) / 5.0;
  double sum_ew_fg = 0.0, sum_ew_bg = 0.0;
  for (i64 i = 0; i < n; ++i) {
    double ew = e[(size_t)i];
    if (fg[(size_t)i]) {
      if (ea[(size_t)i] < ew) ew = ea[(size_t)i];  // neighborhood forgiveness
      sum_ew_fg += ew;                             // importance weight B = 1
    } else {
      ew *= 2.0 - std::exp(decay * std::sqrt(dist[(size_t)i]));
      sum_ew_bg += ew;
    }
  }

  const double tpw = (double)fg_count - sum_ew_fg;
  const double fpw = sum_ew_bg;
  const double recall = 1.0 - sum_ew_fg / (double)fg_count;
  const double precision = tpw / (kMatEps + tpw + fpw);
  return 2.0 * recall * precision / (kMatEps + recall + precision);
}

inline double mean_std_over(const Tensor<double>& pred, const Tensor<int>& gt, int keep,
                            bool invert, double& std_out) {
  double s = 0.0;
  i64 cnt = 0;
  const i64 n = pred.numel();
  for (i64 i = 0; i < n; ++i) {
    if ((gt[i] != 0 ? 1 : 0) == keep) {
      s += invert ? 1.0 - pred[i] : pred[i];
      ++cnt;
    }
  }
  const double mean = s / (double)cnt;
  double ss = 0.0;
  for (i64 i = 0; i < n; ++i) {
    if ((gt[i] != 0 ? 1 : 0) == keep) {
      const double v = (invert ? 1.0 - pred[i] : pred[i]) - mean;
      ss += v * v;
    }
  }
  std_out = cnt > 1 ? std::sqrt(ss / (double)(cnt - 1)) : 0.0;
  return mean;
}

// Object-level similarity: dispersion-penalized score of the foreground
// values under the target mask and of the inverted values off it.
inline double s_object(const Tensor<double>& pred, const Tensor<int>& gt, i64 fg_count) {
  double std_fg = 0.0, std_bg = 0.0;
  const double x_fg = mean_std_over(pred, gt, 1, false, std_fg);
  const double x_bg = mean_std_over(pred, gt, 0, true, std_bg);
  const double o_fg = 2.0 * x_fg / (x_fg * x_fg + 1.0 + std_fg + kMatEps);
  const double o_bg = 2.0 * x_bg / (x_bg * x_bg + 1.0 + std_bg + kMatEps);
  const double u = (double)fg_count / (double)pred.numel();
  return u * o_fg + (1.0 - u) * o_bg;
}

// Luminance/contrast/structure similarity of one region, with the specific
// degenerate-case branches the structure measure relies on.
inline double region_ssim(const Tensor<double>& pred, const Tensor<int>& gt, int y0, int y1,
                          int x0, int x1) {
  const int W = pred.size(1);
  const double n = (double)(y1 - y0) * (x1 - x0);
  double sx = 0.0, sy = 0.0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      sx += pred[(i64)y * W + x];
      sy += (double)(gt[(i64)y * W + x] != 0);
    }
  }
  const double mx = sx / n, my = sy / n;
  double vx = 0.0, vy = 0.0, vxy = 0.0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const double dx = pred[(i64)y * W + x] - mx;
      const double dy = (double)(gt[(i64)y * W + x] != 0) - my;
      vx += dx * dx;
      vy += dy * dy;
      vxy += dx * dy;
    }
  }
  const double denom = n - 1.0 + kMatEps;
  vx /= denom;
  vy /= denom;
  vxy /= denom;
  const double alpha = 4.0 * mx * my * vxy;
  const double beta = (mx * mx + my * my) * (vx + vy);
  if (alpha != 0.0) return alpha / (beta + kMatEps);
  if (beta == 0.0) return 1.0;  // both regions constant
  return 0.0;
}

// Region-level similarity: split both maps at the target's centroid and
// average the four per-block scores by block area.
inline double s_region(const Tensor<double>& pred, const Tensor<int>& gt, i64 fg_count) {
  const int H = pred.size(0), W = pred.size(1);
  // Centroid in 1-based coordinates, rounded half up.
  double cx = 0.0, cy = 0.0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (gt[(i64)y * W + x] != 0) {
        cx += (double)(x + 1);
        cy += (double)(y + 1);
      }
    }
  }
  const int X = (int)std::floor(cx / (double)fg_count + 0.5);
  const int Y = (int)std::floor(cy / (double)fg_count + 0.5);

  const double area = (double)H * W;
  const double w1 = (double)X * Y / area;          // left-top
  const double w2 = (double)(W - X) * Y / area;    // right-top
  const double w3 = (double)X * (H - Y) / area;    // left-bottom
  const double w4 = 1.0 - w1 - w2 - w3;            // right-bottom

  double q = 0.0;
  // Degenerate blocks (centroid on the frame) are skipped rather than
  // evaluated on an empty region; the guard is geometric because the residual
  // weight 1-w1-w2-w3 of an empty block can round to a positive subnormal.
  if (Y > 0 && X > 0) q += w1 * region_ssim(pred, gt, 0, Y, 0, X);
  if (Y > 0 && X < W) q += w2 * region_ssim(pred, gt, 0, Y, X, W);
  if (Y < H && X > 0) q += w3 * region_ssim(pred, gt, Y, H, 0, X);
  if (Y < H && X < W) q += w4 * region_ssim(pred, gt, Y, H, X, W);
  return q;
}

inline double structure_measure(const Tensor<double>& pred, const Tensor<int>& gt) {
  const i64 n = pred.numel();
  i64 fg_count = 0;
  double pred_sum = 0.0;
  for (i64 i = 0; i < n; ++i) {
    fg_count += gt[i] != 0;
    pred_sum += pred[i];
  }
  if (fg_count == 0) return 1.0 - pred_sum / (double)n;  // all background
  if (fg_count == n) return pred_sum / (double)n;        // all foreground
  const double q =
      0.5 * s_object(pred, gt, fg_count) + 0.5 * s_region(pred, gt, fg_count);
  return q < 0.0 ? 0.0 : q;
}

}  // namespace detail

// Score one prediction against its mask. `pred` [H,W] in [0,1]; `gt` [H,W]
// with entries 0/1.
inline PairScores eval_pair(const Tensor<double>& pred, const Tensor<int>& gt) {
  DECSEG_CHECK(pred.dim() == 2 && gt.dim() == 2, "eval_pair: expected [H,W] inputs");
  DECSEG_CHECK(pred.size(0) == gt.size(0) && pred.size(1) == gt.size(1),
               "eval_pair: size mismatch " << shape_str(pred.shape()) << " vs "
                                           << shape_str(gt.shape()));
  const i64 n = pred.numel();
  DECSEG_CHECK(n > 0, "eval_pair: empty inputs");
  for (i64 i = 0; i < n; ++i) {
    DECSEG_CHECK(pred[i] >= 0.0 && pred[i] <= 1.0,
                 "eval_pair: probability out of range: " << pred[i]);
    DECSEG_CHECK(gt[i] == 0 || gt[i] == 1, "eval_pair: mask entry not binary: " << gt[i]);
  }

  PairScores out;
  i64 tp = 0, fp = 0, fn = 0;
  double abs_err = 0.0;
  for (i64 i = 0; i < n; ++i) {
    const bool p = pred[i] > 0.5;
    const bool y = gt[i] != 0;
    tp += p && y;
    fp += p && !y;
    fn += !p && y;
    abs_err += std::abs(pred[i] - (double)y);
  }
  // Both empty: perfect agreement by convention.
  out.dice = (tp + fp + fn) == 0 ? 1.0 : 2.0 * (double)tp / (double)(2 * tp + fp + fn);
  out.iou = (tp + fp + fn) == 0 ? 1.0 : (double)tp / (double)(tp + fp + fn);
  out.mae = abs_err / (double)n;
  out.wfb = detail::weighted_fbeta(pred, gt);
  out.smeasure = detail::structure_measure(pred, gt);
  return out;
}

// Running mean over a test split.
struct MetricsReport {
  double dice = 0.0, iou = 0.0, mae = 0.0, wfb = 0.0, smeasure = 0.0;
  i64 count = 0;

  void add(const PairScores& s) {
    ++count;
    const double k = 1.0 / (double)count;
    dice += (s.dice - dice) * k;
    iou += (s.iou - iou) * k;
    mae += (s.mae - mae) * k;
    wfb += (s.wfb - wfb) * k;
    smeasure += (s.smeasure - smeasure) * k;
  }
};

}  // namespace decseg
