#pragma once

#include <array>
#include <memory>
#include <optional>

#include "decseg/autograd/resample.hpp"
#include "decseg/net/encoder.hpp"

namespace decseg {

enum class Scale { original, half, fused };

// One segmentation head's output: two-channel logits at the decoder's input
// resolution and their channel softmax.
template <class T>
struct SegOutput {
  Var<T> logits;  // [B,2,H,W]
  Var<T> probs;   // softmax over channels, sums to 1 per pixel
  Scale scale = Scale::original;
};

// Intermediate decoder features h_1..h_5 (index 0 = shallowest, stride 2).
template <class T>
struct DecoderState {
  std::array<Var<T>, 5> h;
};

// U-shaped decoder over a feature pyramid. Level 5 enters through two conv
// blocks; each shallower level upsamples (2x2 transposed conv), concatenates
// the skip feature for that level, and applies two conv blocks. The head lifts
// h_1 (stride 2) to input resolution and projects to two classes.
//
// `skip_ch` gives the channel width of the skip input per level 1..4 (either
// the cross-level aggregation width or the raw encoder width).
template <class T>
class ScaleDecoder : public Module<T> {
 public:
  ScaleDecoder(const std::array<int, 5>& stage_ch, const std::array<int, 4>& skip_ch, Rng& rng)
      : top_a_(stage_ch[4], stage_ch[4], 3, 1, 1, rng),
        top_b_(stage_ch[4], stage_ch[4], 3, 1, 1, rng),
        head_up_(stage_ch[0], stage_ch[0], rng),
        head_conv_(stage_ch[0], stage_ch[0], 3, 1, 1, rng),
        head_proj_(stage_ch[0], 2, 1, 1, 0, true, rng) {
    this->register_module("level5.conv_a", &top_a_);
    this->register_module("level5.conv_b", &top_b_);
    for (int i = 3; i >= 0; --i) {  // level 4 down to level 1
      ups_[i] = std::make_unique<ConvTranspose2d<T>>(stage_ch[i + 1], stage_ch[i], rng);
      blocks_a_[i] = std::make_unique<ConvBnRelu<T>>(stage_ch[i] + skip_ch[i], stage_ch[i], 3, 1,
                                                     1, rng);
      blocks_b_[i] = std::make_unique<ConvBnRelu<T>>(stage_ch[i], stage_ch[i], 3, 1, 1, rng);
      const std::string lv = "level" + std::to_string(i + 1);
      this->register_module(lv + ".up", ups_[i].get());
      this->register_module(lv + ".conv_a", blocks_a_[i].get());
      this->register_module(lv + ".conv_b", blocks_b_[i].get());
    }
    this->register_module("head.up", &head_up_);
    this->register_module("head.conv", &head_conv_);
    this->register_module("head.proj", &head_proj_);
  }

  // skips[i] is the level-(i+1) skip feature, spatially matching pyramid level i+1.
  std::pair<SegOutput<T>, DecoderState<T>> forward(const FeaturePyramid<T>& pyr,
                                                   const std::array<Var<T>, 4>& skips,
                                                   Scale scale) {
    DecoderState<T> st;
    Var<T> h = top_b_.forward(top_a_.forward(pyr.level(5)));
    st.h[4] = h;
    for (int i = 3; i >= 0; --i) {
      auto up = ups_[i]->forward(h);
      // Odd-size levels: 2x upsampling overshoots by one pixel; snap to skip.
      up = resize_like(up, skips[i]);
      h = blocks_b_[i]->forward(blocks_a_[i]->forward(concat_channels(up, skips[i])));
      st.h[i] = h;
    }
    SegOutput<T> out;
    out.scale = scale;
    auto full = head_conv_.forward(head_up_.forward(h));
    full = resize_bilinear(full, pyr.input_h, pyr.input_w);
    out.logits = head_proj_.forward(full);
    out.probs = softmax_channels(out.logits);
    return {out, st};
  }

 private:
  ConvBnRelu<T> top_a_, top_b_;
  std::array<std::unique_ptr<ConvTranspose2d<T>>, 4> ups_;
  std::array<std::unique_ptr<ConvBnRelu<T>>, 4> blocks_a_, blocks_b_;
  ConvTranspose2d<T> head_up_;
  ConvBnRelu<T> head_conv_;
  Conv2d<T> head_proj_;
};

// Decoder over fused cross-scale features: level 5 takes the fused deep
// feature as input, levels 4..1 consume the fused maps as skips. Emits logits
// at the original input resolution.
template <class T>
class FusedDecoder : public Module<T> {
 public:
  FusedDecoder(const std::array<int, 5>& stage_ch, Rng& rng)
      : top_a_(stage_ch[4], stage_ch[4], 3, 1, 1, rng),
        top_b_(stage_ch[4], stage_ch[4], 3, 1, 1, rng),
        head_up_(stage_ch[0], stage_ch[0], rng),
        head_conv_(stage_ch[0], stage_ch[0], 3, 1, 1, rng),
        head_proj_(stage_ch[0], 2, 1, 1, 0, true, rng) {
    this->register_module("level5.conv_a", &top_a_);
    this->register_module("level5.conv_b", &top_b_);
    for (int i = 3; i >= 0; --i) {
      ups_[i] = std::make_unique<ConvTranspose2d<T>>(stage_ch[i + 1], stage_ch[i], rng);
      blocks_a_[i] = std::make_unique<ConvBnRelu<T>>(2 * stage_ch[i], stage_ch[i], 3, 1, 1, rng);
      blocks_b_[i] = std::make_unique<ConvBnRelu<T>>(stage_ch[i], stage_ch[i], 3, 1, 1, rng);
      const std::string lv = "level" + std::to_string(i + 1);
      this->register_module(lv + ".up", ups_[i].get());
      this->register_module(lv + ".conv_a", blocks_a_[i].get());
      this->register_module(lv + ".conv_b", blocks_b_[i].get());
    }
    this->register_module("head.up", &head_up_);
    this->register_module("head.conv", &head_conv_);
    this->register_module("head.proj", &head_proj_);
  }

  SegOutput<T> forward(const std::array<Var<T>, 5>& fused, int out_h, int out_w) {
    Var<T> h = top_b_.forward(top_a_.forward(fused[4]));
    for (int i = 3; i >= 0; --i) {
      auto up = resize_like(ups_[i]->forward(h), fused[i]);
      h = blocks_b_[i]->forward(blocks_a_[i]->forward(concat_channels(up, fused[i])));
    }
    SegOutput<T> out;
    out.scale = Scale::fused;
    auto full = head_conv_.forward(head_up_.forward(h));
    full = resize_bilinear(full, out_h, out_w);
    out.logits = head_proj_.forward(full);
    out.probs = softmax_channels(out.logits);
    return out;
  }

 private:
  ConvBnRelu<T> top_a_, top_b_;
  std::array<std::unique_ptr<ConvTranspose2d<T>>, 4> ups_;
  std::array<std::unique_ptr<ConvBnRelu<T>>, 4> blocks_a_, blocks_b_;
  ConvTranspose2d<T> head_up_;
  ConvBnRelu<T> head_conv_;
  Conv2d<T> head_proj_;
};

}  // namespace decseg
