#pragma once

#include <filesystem>

#include "decseg/data/image_io.hpp"
#include "decseg/net/model.hpp"
#include "decseg/nn/checkpoint.hpp"

namespace decseg {

// Inference from a finished checkpoint: rebuilds the network from checkpoint
// metadata and emits binary masks. Requires the full segmentation path —
// encoder, cross-level aggregation, both scale decoders, and the fused
// decoder; generators are loaded if present but never used.
template <class T = float>
class Predictor {
 public:
  explicit Predictor(const std::filesystem::path& ckpt_path) {
    auto data = read_checkpoint<T>(ckpt_path);
    for (const char* group : {"encoder", "cfa", "d1", "d2", "df"}) {
      DECSEG_CHECK(data.has_group(group),
                   "checkpoint '" << ckpt_path.string() << "' is missing parameter group '"
                                  << group << "' required for prediction");
    }
    model_ = std::make_unique<DecSegModel<T>>(DecSegModel<T>::config_from_meta(data.meta));
    load_state(*model_, data);
    auto it = data.meta.find("image_size");
    DECSEG_CHECK(it != data.meta.end(),
                 "checkpoint '" << ckpt_path.string() << "' has no image_size");
    image_size_ = std::stoi(it->second);
    DECSEG_CHECK(image_size_ > 0 && image_size_ % 32 == 0,
                 "checkpoint image_size " << image_size_ << " is not a positive multiple of 32");
    model_->set_training(false);
  }

  int image_size() const { return image_size_; }

  // Fused-head foreground probability at the checkpoint's working size,
  // resized back to the source resolution. Values in [0,1], shape [H,W].
  Tensor<float> probability_map(const Tensor<float>& image) {
    DECSEG_CHECK(image.dim() == 3 && image.size(0) == 3,
                 "predict: expected [3,H,W] input, got " << shape_str(image.shape()));
    const int H = image.size(1), W = image.size(2);
    const int S = image_size_;
    const Tensor<float> sized =
        (H == S && W == S) ? image : resize_bilinear_chw(image, S, S);
    Tensor<T> x({1, 3, S, S});
    for (i64 i = 0; i < x.numel(); ++i) x[i] = (T)sized[i];

    NoGradGuard guard;
    auto out = model_->infer(constant(x));
    Tensor<float> prob({1, S, S});
    const T* fg = out.probs->value.data() + (i64)S * S;  // [1,2,S,S], channel 1
    for (i64 i = 0; i < prob.numel(); ++i) prob[i] = (float)fg[i];
    return (H == S && W == S) ? prob : resize_bilinear_chw(prob, H, W);
  }

  // Threshold at 0.5 into a {0,1} mask at the source resolution.
  Tensor<int> predict_mask(const Tensor<float>& image) {
    auto prob = probability_map(image);
    Tensor<int> mask({prob.size(1), prob.size(2)});
    for (i64 i = 0; i < mask.numel(); ++i) mask[i] = prob[i] > 0.5f;
    return mask;
  }

  // File-to-file convenience: read an image, write its binary mask PNG.
  void predict_file(const std::filesystem::path& input, const std::filesystem::path& output) {
    save_mask_png(output, predict_mask(load_image_rgb(input)));
  }

 private:
  std::unique_ptr<DecSegModel<T>> model_;
  int image_size_ = 0;
};

}  // namespace decseg
