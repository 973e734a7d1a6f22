#pragma once

#include <vector>

#include "decseg/core/common.hpp"
#include "decseg/core/rng.hpp"
#include "decseg/core/tensor.hpp"

namespace decseg {

// Photometric perturbation strengths. A strength of 0 disables the op
// entirely (bitwise identity), matching the usual color-jitter contract:
// brightness/contrast/saturation factors are drawn from
// [max(0, 1-s), 1+s]; hue shift from [-h, h] in hue-circle turns.
struct JitterConfig {
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.1;
};

// Concrete factors for one sample; ops are applied in the fixed order
// brightness, contrast, saturation, hue, skipping disabled ones.
struct JitterParams {
  bool use_b = false, use_c = false, use_s = false, use_h = false;
  float b = 1.0f, c = 1.0f, s = 1.0f, h = 0.0f;
};

inline JitterParams sample_jitter(const JitterConfig& cfg, Rng& rng) {
  JitterParams p;
  if (cfg.brightness > 0.0) {
    p.use_b = true;
    p.b = (float)rng.uniform(std::max(0.0, 1.0 - cfg.brightness), 1.0 + cfg.brightness);
  }
  if (cfg.contrast > 0.0) {
    p.use_c = true;
    p.c = (float)rng.uniform(std::max(0.0, 1.0 - cfg.contrast), 1.0 + cfg.contrast);
  }
  if (cfg.saturation > 0.0) {
    p.use_s = true;
    p.s = (float)rng.uniform(std::max(0.0, 1.0 - cfg.saturation), 1.0 + cfg.saturation);
  }
  if (cfg.hue > 0.0) {
    p.use_h = true;
    p.h = (float)rng.uniform(-cfg.hue, cfg.hue);
  }
  return p;
}

namespace detail {

inline float luma(float r, float g, float b) {
  return 0.2989f * r + 0.587f * g + 0.114f * b;
}

// One RGB pixel through the HSV hue rotation. Grey pixels (zero chroma) are
// untouched by construction.
inline void hue_shift_pixel(float& r, float& g, float& b, float shift) {
  const float maxc = std::max({r, g, b});
  const float minc = std::min({r, g, b});
  const float delta = maxc - minc;
  const float v = maxc;
  if (delta <= 0.0f) return;
  const float s = delta / maxc;
  float h;
  if (maxc == r) {
    h = (g - b) / delta;
  } else if (maxc == g) {
    h = 2.0f + (b - r) / delta;
  } else {
    h = 4.0f + (r - g) / delta;
  }
  h /= 6.0f;
  h += shift;
  h -= std::floor(h);  // wrap to [0,1)

  const float hh = h * 6.0f;
  const int sector = std::min((int)hh, 5);
  const float f = hh - (float)sector;
  const float p = v * (1.0f - s);
  const float q = v * (1.0f - s * f);
  const float t = v * (1.0f - s * (1.0f - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

// Apply one sample's jitter to a [3,H,W] slice in place.
inline void apply_jitter_chw(float* img, int H, int W, const JitterParams& prm) {
  const i64 plane = (i64)H * W;
  float* r = img;
  float* g = img + plane;
  float* b = img + 2 * plane;
  auto clamp01 = [](float v) { return std::clamp(v, 0.0f, 1.0f); };

  if (prm.use_b) {
    for (i64 i = 0; i < 3 * plane; ++i) img[i] = clamp01(img[i] * prm.b);
  }
  if (prm.use_c) {
    // Blend toward the mean luminance of the whole image.
    double acc = 0.0;
    for (i64 i = 0; i < plane; ++i) acc += luma(r[i], g[i], b[i]);
    const float mean = (float)(acc / (double)plane);
    for (i64 i = 0; i < 3 * plane; ++i) {
      img[i] = clamp01(prm.c * img[i] + (1.0f - prm.c) * mean);
    }
  }
  if (prm.use_s) {
    // Blend each pixel toward its own luminance.
    for (i64 i = 0; i < plane; ++i) {
      const float l = luma(r[i], g[i], b[i]);
      r[i] = clamp01(prm.s * r[i] + (1.0f - prm.s) * l);
      g[i] = clamp01(prm.s * g[i] + (1.0f - prm.s) * l);
      b[i] = clamp01(prm.s * b[i] + (1.0f - prm.s) * l);
    }
  }
  if (prm.use_h) {
    for (i64 i = 0; i < plane; ++i) hue_shift_pixel(r[i], g[i], b[i], prm.h);
  }
}

}  // namespace detail

// Photometric-only batch perturbation: per-sample factors, geometry untouched.
inline Tensor<float> apply_jitter(const Tensor<float>& x,
                                  const std::vector<JitterParams>& params) {
  DECSEG_CHECK(x.dim() == 4 && x.size(1) == 3,
               "apply_jitter: expected [B,3,H,W], got " << shape_str(x.shape()));
  DECSEG_CHECK((int)params.size() == x.size(0),
               "apply_jitter: " << params.size() << " parameter sets for batch of "
                                << x.size(0));
  Tensor<float> out = x.clone();
  const i64 stride = (i64)3 * x.size(2) * x.size(3);
  for (int i = 0; i < x.size(0); ++i) {
    detail::apply_jitter_chw(out.data() + (i64)i * stride, x.size(2), x.size(3), params[i]);
  }
  return out;
}

// Seeded convenience wrapper: one fresh parameter set per batch item.
inline Tensor<float> perturb(const Tensor<float>& x, const JitterConfig& cfg,
                             std::uint64_t seed) {
  Rng rng(seed);
  std::vector<JitterParams> params;
  params.reserve((size_t)x.size(0));
  for (int i = 0; i < x.size(0); ++i) params.push_back(sample_jitter(cfg, rng));
  return apply_jitter(x, params);
}

}  // namespace decseg
