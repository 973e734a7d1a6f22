#pragma once

#include <filesystem>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "decseg/core/common.hpp"
#include "decseg/core/tensor.hpp"

namespace decseg {

// 8-bit image file -> RGB float tensor [3,H,W] scaled to [0,1].
inline Tensor<float> load_image_rgb(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  DECSEG_CHECK(!bgr.empty(), "failed to read image: " << path.string());
  DECSEG_CHECK(bgr.depth() == CV_8U, "expected 8-bit image: " << path.string());
  Tensor<float> out({3, bgr.rows, bgr.cols});
  for (int y = 0; y < bgr.rows; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      out.at3(0, y, x) = (float)row[x][2] / 255.0f;  // R
      out.at3(1, y, x) = (float)row[x][1] / 255.0f;  // G
      out.at3(2, y, x) = (float)row[x][0] / 255.0f;  // B
    }
  }
  return out;
}

// 8-bit single-channel mask -> binary tensor [H,W]; foreground at half of the
// 8-bit range and above.
inline Tensor<int> load_mask(const std::filesystem::path& path) {
  cv::Mat gray = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  DECSEG_CHECK(!gray.empty(), "failed to read mask: " << path.string());
  Tensor<int> out({gray.rows, gray.cols});
  for (int y = 0; y < gray.rows; ++y) {
    const std::uint8_t* row = gray.ptr<std::uint8_t>(y);
    for (int x = 0; x < gray.cols; ++x) out[(i64)y * gray.cols + x] = row[x] >= 128;
  }
  return out;
}

// Binary mask {0,1} -> single-channel PNG with values {0,255}.
inline void save_mask_png(const std::filesystem::path& path, const Tensor<int>& mask) {
  DECSEG_CHECK(mask.dim() == 2, "save_mask_png: expected [H,W], got "
                                    << shape_str(mask.shape()));
  cv::Mat m(mask.size(0), mask.size(1), CV_8UC1);
  for (int y = 0; y < mask.size(0); ++y) {
    std::uint8_t* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.size(1); ++x) {
      const int v = mask[(i64)y * mask.size(1) + x];
      DECSEG_CHECK(v == 0 || v == 1, "save_mask_png: non-binary value " << v);
      row[x] = v ? 255 : 0;
    }
  }
  DECSEG_CHECK(cv::imwrite(path.string(), m), "failed to write mask: " << path.string());
}

// RGB float tensor [3,H,W] in [0,1] -> 8-bit PNG (values clamped, rounded).
inline void save_image_png(const std::filesystem::path& path, const Tensor<float>& img) {
  DECSEG_CHECK(img.dim() == 3 && img.size(0) == 3,
               "save_image_png: expected [3,H,W], got " << shape_str(img.shape()));
  const int H = img.size(1), W = img.size(2);
  cv::Mat m(H, W, CV_8UC3);
  auto to_u8 = [](float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return (std::uint8_t)std::lround(c * 255.0f);
  };
  for (int y = 0; y < H; ++y) {
    cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < W; ++x) {
      row[x][0] = to_u8(img.at3(2, y, x));  // B
      row[x][1] = to_u8(img.at3(1, y, x));  // G
      row[x][2] = to_u8(img.at3(0, y, x));  // R
    }
  }
  DECSEG_CHECK(cv::imwrite(path.string(), m), "failed to write image: " << path.string());
}

}  // namespace decseg
