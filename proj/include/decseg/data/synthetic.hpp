#pragma once

#include <cstdio>
#include <fstream>

#include "decseg/core/rng.hpp"
#include "decseg/data/dataset.hpp"

namespace decseg {

namespace detail {

struct Blob {
  bool ellipse = true;
  double cx = 0.0, cy = 0.0;       // center, pixels
  double a = 0.0, b = 0.0, rot = 0.0;  // ellipse semi-axes + rotation
  std::vector<double> vx, vy;      // polygon vertices (closed implicitly)

  bool contains(double x, double y) const {
    if (ellipse) {
      const double dx = x - cx, dy = y - cy;
      const double u = dx * std::cos(rot) + dy * std::sin(rot);
      const double v = -dx * std::sin(rot) + dy * std::cos(rot);
      return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
    }
    // Ray-crossing test.
    bool inside = false;
    const size_t n = vx.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
      if ((vy[i] > y) != (vy[j] > y) &&
          x < (vx[j] - vx[i]) * (y - vy[i]) / (vy[j] - vy[i]) + vx[i]) {
        inside = !inside;
      }
    }
    return inside;
  }
};

inline Blob random_blob(int S, Rng& rng) {
  Blob blob;
  blob.cx = rng.uniform(0.25, 0.75) * S;
  blob.cy = rng.uniform(0.25, 0.75) * S;
  blob.ellipse = rng.uniform() < 0.5;
  if (blob.ellipse) {
    blob.a = rng.uniform(0.10, 0.28) * S;
    blob.b = rng.uniform(0.10, 0.28) * S;
    blob.rot = rng.uniform(0.0, 3.14159265358979323846);
  } else {
    const int k = 5 + rng.uniform_int(4);
    const double base = rng.uniform(0.12, 0.26) * S;
    for (int i = 0; i < k; ++i) {
      const double ang = 2.0 * 3.14159265358979323846 * ((double)i + rng.uniform(0.0, 0.6)) /
                         (double)k;
      const double r = base * rng.uniform(0.65, 1.3);
      blob.vx.push_back(blob.cx + r * std::cos(ang));
      blob.vy.push_back(blob.cy + r * std::sin(ang));
    }
  }
  return blob;
}

struct SyntheticSample {
  Tensor<float> image;  // [3,S,S]
  Tensor<int> mask;     // [S,S]
};

// One textured-background image with 1-2 solid "lesions" and its exact mask.
// Redraws geometry until the foreground fraction lands in (0, 0.5).
inline SyntheticSample make_synthetic_sample(int S, std::uint64_t seed) {
  Rng rng(seed);
  SyntheticSample out;
  out.image = Tensor<float>({3, S, S});
  out.mask = Tensor<int>({S, S});

  // Tissue-like background: warm base color, low-frequency waves, fine noise.
  const float base[3] = {(float)rng.uniform(0.55, 0.75), (float)rng.uniform(0.35, 0.55),
                         (float)rng.uniform(0.30, 0.50)};
  const double wf1 = rng.uniform(1.5, 4.0), wa1 = rng.uniform(0.0, 6.28);
  const double wf2 = rng.uniform(4.0, 9.0), wa2 = rng.uniform(0.0, 6.28);
  const double dir1 = rng.uniform(0.0, 6.28), dir2 = rng.uniform(0.0, 6.28);

  // Lesion geometry: retry until the area constraint holds.
  std::vector<Blob> blobs;
  for (int attempt = 0;; ++attempt) {
    DECSEG_CHECK(attempt < 64, "synthetic sample: could not satisfy area constraint");
    blobs.clear();
    const int count = 1 + (rng.uniform() < 0.35 ? 1 : 0);
    for (int i = 0; i < count; ++i) blobs.push_back(random_blob(S, rng));
    i64 fg = 0;
    for (int y = 0; y < S; ++y) {
      for (int x = 0; x < S; ++x) {
        bool in = false;
        for (const auto& blob : blobs) {
          in = in || blob.contains((double)x + 0.5, (double)y + 0.5);
        }
        out.mask[(i64)y * S + x] = in;
        fg += in;
      }
    }
    const double fraction = (double)fg / (double)(S * S);
    if (fraction > 0.0 && fraction < 0.5) break;
  }

  const float lesion[3] = {(float)rng.uniform(0.40, 0.55), (float)rng.uniform(0.12, 0.25),
                           (float)rng.uniform(0.12, 0.28)};
  for (int y = 0; y < S; ++y) {
    for (int x = 0; x < S; ++x) {
      const double u = (double)x / S, v = (double)y / S;
      const double wave =
          0.05 * std::sin(6.283 * wf1 * (u * std::cos(dir1) + v * std::sin(dir1)) + wa1) +
          0.03 * std::sin(6.283 * wf2 * (u * std::cos(dir2) + v * std::sin(dir2)) + wa2);
      const float noise = (float)rng.uniform(-0.02, 0.02);
      const bool fg = out.mask[(i64)y * S + x] != 0;
      for (int c = 0; c < 3; ++c) {
        float val;
        if (fg) {
          // Lesion texture: own color, slightly stronger speckle.
          val = lesion[c] + (float)(0.5 * wave) + noise + (float)rng.uniform(-0.015, 0.015);
        } else {
          val = base[c] + (float)wave + noise;
        }
        out.image.at3(c, y, x) = std::clamp(val, 0.0f, 1.0f);
      }
    }
  }
  return out;
}

}  // namespace detail

// Write a complete synthetic dataset (images, masks for labeled/test stems,
// split files) under `out_dir` and return its spec. Fully determined by
// (counts, image_size, seed): regenerating produces identical bytes.
inline DatasetSpec make_synthetic_dataset(const std::filesystem::path& out_dir, int n_labeled,
                                          int n_unlabeled, int n_test, int image_size,
                                          std::uint64_t seed) {
  DECSEG_CHECK(n_labeled >= 1 && n_test >= 1 && n_unlabeled >= 0,
               "synthetic dataset needs n_labeled >= 1, n_test >= 1, n_unlabeled >= 0");
  DECSEG_CHECK(image_size >= 16, "synthetic image_size too small: " << image_size);
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "masks");

  auto stem_of = [](int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth_%04d", index);
    return std::string(buf);
  };

  struct Plan {
    Split split;
    int count;
    const char* list_name;
  };
  const Plan plans[] = {{Split::labeled, n_labeled, "labeled.txt"},
                        {Split::unlabeled, n_unlabeled, "unlabeled.txt"},
                        {Split::test, n_test, "test.txt"}};
  int index = 0;
  for (const auto& plan : plans) {
    if (plan.count == 0) continue;  // no list file for an absent split
    std::ofstream list(out_dir / plan.list_name, std::ios::binary);
    DECSEG_CHECK(list.good(), "cannot write split file under " << out_dir.string());
    for (int i = 0; i < plan.count; ++i, ++index) {
      const auto stem = stem_of(index);
      auto sample = detail::make_synthetic_sample(
          image_size, seed_stream(seed, rng_tag("synthetic"), (std::uint64_t)index));
      save_image_png(out_dir / "images" / (stem + ".png"), sample.image);
      if (plan.split != Split::unlabeled) {
        save_mask_png(out_dir / "masks" / (stem + ".png"), sample.mask);
      }
      list << stem << "\n";
    }
  }
  return DatasetSpec::standard(out_dir, image_size);
}

}  // namespace decseg
