#pragma once

#include <array>
#include <memory>

#include "decseg/nn/layers.hpp"

namespace decseg {

enum class Backbone { tiny_cnn, res2net50 };

inline const char* backbone_name(Backbone b) {
  return b == Backbone::tiny_cnn ? "tiny_cnn" : "res2net50";
}

inline Backbone backbone_from_name(const std::string& s) {
  if (s == "tiny_cnn") return Backbone::tiny_cnn;
  if (s == "res2net50") return Backbone::res2net50;
  fail("unknown backbone '" + s + "' (expected tiny_cnn or res2net50)");
}

struct EncoderConfig {
  Backbone backbone = Backbone::tiny_cnn;
  std::array<int, 5> stage_channels{16, 32, 64, 128, 256};
  int cfa_out_channels = 32;
  int reduction_ratio = 4;

  static EncoderConfig tiny() { return {}; }
  static EncoderConfig res2net() {
    return {Backbone::res2net50, {64, 256, 512, 1024, 2048}, 64, 4};
  }
};

// Five feature maps at strides 2/4/8/16/32 relative to the encoder input.
template <class T>
struct FeaturePyramid {
  std::array<Var<T>, 5> f;
  int input_h = 0, input_w = 0;

  const Var<T>& level(int i) const {  // 1-based, matching stage numbering
    DECSEG_CHECK(i >= 1 && i <= 5, "pyramid level " << i << " outside [1,5]");
    return f[i - 1];
  }
};

template <class T>
class EncoderBase : public Module<T> {
 public:
  virtual FeaturePyramid<T> encode(const Var<T>& x) = 0;

 protected:
  static void check_input(const Var<T>& x) {
    DECSEG_CHECK(x->value.dim() == 4 && x->value.size(1) == 3,
                 "encoder expects [B,3,H,W] input, got " << shape_str(x->value.shape()));
    DECSEG_CHECK(x->value.size(2) >= 32 && x->value.size(3) >= 32,
                 "encoder input must be at least 32x32, got " << x->value.size(2) << "x"
                                                              << x->value.size(3));
  }
};

// Small from-scratch backbone: five stride-2 conv blocks. Used for synthetic
// and desk-scale runs where pretrained features are unnecessary.
template <class T>
class TinyCnnEncoder : public EncoderBase<T> {
 public:
  TinyCnnEncoder(const std::array<int, 5>& ch, Rng& rng) {
    int in = 3;
    for (int i = 0; i < 5; ++i) {
      stages_.push_back(std::make_unique<ConvBnRelu<T>>(in, ch[i], 3, 2, 1, rng));
      this->register_module("stage" + std::to_string(i + 1), stages_.back().get());
      in = ch[i];
    }
  }

  FeaturePyramid<T> encode(const Var<T>& x) override {
    this->check_input(x);
    FeaturePyramid<T> p;
    p.input_h = x->value.size(2);
    p.input_w = x->value.size(3);
    Var<T> h = x;
    for (int i = 0; i < 5; ++i) {
      h = stages_[i]->forward(h);
      p.f[i] = h;
    }
    return p;
  }

 private:
  std::vector<std::unique_ptr<ConvBnRelu<T>>> stages_;
};

// Multi-scale residual bottleneck (scale = 4, base width 26). The 3x3 stage is
// split into four feature groups processed sequentially with running addition,
// widening the receptive-field mix inside one block.
template <class T>
class Bottle2neck : public Module<T> {
 public:
  static constexpr int kScale = 4;
  static constexpr int kBaseWidth = 26;
  static constexpr int kExpansion = 4;

  Bottle2neck(int in_ch, int planes, int stride, bool stage_block, Rng& rng)
      : stride_(stride),
        stage_block_(stage_block),
        width_(planes * kBaseWidth / 64),
        conv1_(in_ch, width_ * kScale, 1, 1, 0, false, rng),
        bn1_(width_ * kScale),
        conv3_(width_ * kScale, planes * kExpansion, 1, 1, 0, false, rng),
        bn3_(planes * kExpansion) {
    this->register_module("conv1", &conv1_);
    this->register_module("bn1", &bn1_);
    for (int i = 0; i < kScale - 1; ++i) {
      convs_.push_back(std::make_unique<Conv2d<T>>(width_, width_, 3, stride, 1, false, rng));
      bns_.push_back(std::make_unique<BatchNorm2d<T>>(width_));
      this->register_module("convs." + std::to_string(i), convs_.back().get());
      this->register_module("bns." + std::to_string(i), bns_.back().get());
    }
    this->register_module("conv3", &conv3_);
    this->register_module("bn3", &bn3_);
    if (stage_block) {
      down_conv_ = std::make_unique<Conv2d<T>>(in_ch, planes * kExpansion, 1, stride, 0, false,
                                               rng);
      down_bn_ = std::make_unique<BatchNorm2d<T>>(planes * kExpansion);
      this->register_module("downsample.conv", down_conv_.get());
      this->register_module("downsample.bn", down_bn_.get());
    }
  }

  Var<T> forward(const Var<T>& x) {
    auto out = relu(bn1_.forward(conv1_.forward(x)));
    std::vector<Var<T>> splits;
    for (int i = 0; i < kScale; ++i) {
      splits.push_back(slice_channels(out, i * width_, (i + 1) * width_));
    }
    std::vector<Var<T>> parts;
    Var<T> sp;
    for (int i = 0; i < kScale - 1; ++i) {
      sp = (i == 0 || stage_block_) ? splits[i] : add(sp, splits[i]);
      sp = relu(bns_[i]->forward(convs_[i]->forward(sp)));
      parts.push_back(sp);
    }
    // Last group passes through; stage blocks pool it to the new stride.
    parts.push_back(stage_block_ ? avg_pool2d(splits[kScale - 1], 3, stride_, 1)
                                 : splits[kScale - 1]);
    auto merged = bn3_.forward(conv3_.forward(concat_channels(parts)));
    auto identity = stage_block_ ? down_bn_->forward(down_conv_->forward(x)) : x;
    return relu(add(merged, identity));
  }

 private:
  int stride_;
  bool stage_block_;
  int width_;
  Conv2d<T> conv1_;
  BatchNorm2d<T> bn1_;
  std::vector<std::unique_ptr<Conv2d<T>>> convs_;
  std::vector<std::unique_ptr<BatchNorm2d<T>>> bns_;
  Conv2d<T> conv3_;
  BatchNorm2d<T> bn3_;
  std::unique_ptr<Conv2d<T>> down_conv_;
  std::unique_ptr<BatchNorm2d<T>> down_bn_;
};

// 50-layer multi-scale residual backbone. Stage 1 is the 7x7 stem (stride 2);
// stages 2-5 are residual layers of 3/4/6/3 blocks producing strides 4/8/16/32
// with 256/512/1024/2048 channels.
template <class T>
class Res2Net50Encoder : public EncoderBase<T> {
 public:
  explicit Res2Net50Encoder(Rng& rng) : stem_conv_(3, 64, 7, 2, 3, false, rng), stem_bn_(64) {
    this->register_module("stage1.conv", &stem_conv_);
    this->register_module("stage1.bn", &stem_bn_);
    const int planes[4] = {64, 128, 256, 512};
    const int blocks[4] = {3, 4, 6, 3};
    int in_ch = 64;
    for (int s = 0; s < 4; ++s) {
      const int stride = s == 0 ? 1 : 2;  // stage 2 downsamples via the stem maxpool
      for (int b = 0; b < blocks[s]; ++b) {
        const bool stage_block = b == 0;
        layers_[s].push_back(std::make_unique<Bottle2neck<T>>(
            in_ch, planes[s], stage_block ? stride : 1, stage_block, rng));
        this->register_module(
            "stage" + std::to_string(s + 2) + ".block" + std::to_string(b),
            layers_[s].back().get());
        in_ch = planes[s] * Bottle2neck<T>::kExpansion;
      }
    }
  }

  FeaturePyramid<T> encode(const Var<T>& x) override {
    this->check_input(x);
    FeaturePyramid<T> p;
    p.input_h = x->value.size(2);
    p.input_w = x->value.size(3);
    auto h = relu(stem_bn_.forward(stem_conv_.forward(x)));
    p.f[0] = h;
    h = max_pool2d(h, 3, 2, 1);
    for (int s = 0; s < 4; ++s) {
      for (auto& blk : layers_[s]) h = blk->forward(h);
      p.f[s + 1] = h;
    }
    return p;
  }

 private:
  Conv2d<T> stem_conv_;
  BatchNorm2d<T> stem_bn_;
  std::array<std::vector<std::unique_ptr<Bottle2neck<T>>>, 4> layers_;
};

template <class T>
std::unique_ptr<EncoderBase<T>> make_encoder(const EncoderConfig& cfg, Rng& rng) {
  if (cfg.backbone == Backbone::tiny_cnn) {
    return std::make_unique<TinyCnnEncoder<T>>(cfg.stage_channels, rng);
  }
  DECSEG_CHECK((cfg.stage_channels == std::array<int, 5>{64, 256, 512, 1024, 2048}),
               "res2net50 has fixed stage channels 64,256,512,1024,2048");
  return std::make_unique<Res2Net50Encoder<T>>(rng);
}

}  // namespace decseg
