#pragma once

#include <memory>

#include "decseg/autograd/resample.hpp"
#include "decseg/nn/layers.hpp"

namespace decseg {

enum class FusionKind { dual_cross, basic };

inline const char* fusion_name(FusionKind k) {
  return k == FusionKind::dual_cross ? "dcf" : "basic";
}

inline FusionKind fusion_from_name(const std::string& s) {
  if (s == "dcf") return FusionKind::dual_cross;
  if (s == "basic") return FusionKind::basic;
  fail("unknown fusion '" + s + "' (expected dcf or basic)");
}

// Fuses the level-i decoder features of the two scale streams into one map at
// the original-scale stream's resolution.
template <class T>
class FusionModule : public Module<T> {
 public:
  // h1: original-scale stream feature; h2: half-scale stream feature (roughly
  // half h1's spatial size). Result matches h1 spatially.
  virtual Var<T> fuse(const Var<T>& h1, const Var<T>& h2) = 0;
};

// Dual cross-scale fusion. Each stream is "reconstructed" with help from the
// other: the other stream is resized to this stream's grid, passed through a
// conv block, and gated by a sigmoid weight map computed from it; the gated
// map multiplies this stream's conv features, which are then re-smoothed:
//
//   W2     = sigmoid(ConvBnRelu(Up(h2)))
//   h1_rec = ConvBnRelu( ConvBnRelu(h1) + ConvBnRelu(Up(h2)) * W2 )
//   (and symmetrically with Down(h1) for h2_rec)
//
// The reconstructions are combined by a learned two-way spatial blend: a 1x1
// conv over their concatenation yields two maps whose channel softmax gives
// blending weights alpha1 + alpha2 = 1.
//
// The gate branch and the feature branch use separate conv blocks: the
// original formulation prints the same expression for both, and the figure
// shows two distinct conv stacks.
template <class T>
class DualCrossFusion : public FusionModule<T> {
 public:
  DualCrossFusion(int ch, Rng& rng)
      : gate1_(ch, ch, 3, 1, 1, rng),
        gate2_(ch, ch, 3, 1, 1, rng),
        self1_(ch, ch, 3, 1, 1, rng),
        self2_(ch, ch, 3, 1, 1, rng),
        cross1_(ch, ch, 3, 1, 1, rng),
        cross2_(ch, ch, 3, 1, 1, rng),
        smooth1_(ch, ch, 3, 1, 1, rng),
        smooth2_(ch, ch, 3, 1, 1, rng),
        alpha_conv_(2 * ch, 2, 1, 1, 0, true, rng) {
    this->register_module("gate1", &gate1_);
    this->register_module("gate2", &gate2_);
    this->register_module("self1", &self1_);
    this->register_module("self2", &self2_);
    this->register_module("cross1", &cross1_);
    this->register_module("cross2", &cross2_);
    this->register_module("smooth1", &smooth1_);
    this->register_module("smooth2", &smooth2_);
    this->register_module("alpha_conv", &alpha_conv_);
  }

  // Both per-stream reconstructions, at h1's resolution. Exposed for tests.
  std::pair<Var<T>, Var<T>> reconstructions(const Var<T>& h1, const Var<T>& h2) {
    const int H1 = h1->value.size(2), W1 = h1->value.size(3);
    const int H2 = h2->value.size(2), W2m = h2->value.size(3);
    auto up2 = resize_bilinear(h2, H1, W1);      // half stream on the fine grid
    auto down1 = resize_bilinear(h1, H2, W2m);   // fine stream on the coarse grid

    auto w2 = sigmoid(gate1_.forward(up2));
    auto rec1 = smooth1_.forward(add(self1_.forward(h1), mul(cross1_.forward(up2), w2)));

    auto w1 = sigmoid(gate2_.forward(down1));
    auto rec2 = smooth2_.forward(add(self2_.forward(h2), mul(cross2_.forward(down1), w1)));
    return {rec1, resize_bilinear(rec2, H1, W1)};
  }

  // Blend weights for the two reconstructions: [B,2,H,W], rows sum to 1.
  Var<T> blend_weights(const Var<T>& rec1, const Var<T>& rec2) {
    return softmax_channels(alpha_conv_.forward(concat_channels(rec1, rec2)));
  }

  Var<T> fuse(const Var<T>& h1, const Var<T>& h2) override {
    DECSEG_CHECK(h1->value.size(1) == h2->value.size(1),
                 "cross-scale fuse: channel mismatch " << h1->value.size(1) << " vs "
                                                       << h2->value.size(1));
    auto [rec1, rec2] = reconstructions(h1, h2);
    auto alpha = blend_weights(rec1, rec2);
    return blend_two(rec1, rec2, alpha);
  }

 private:
  ConvBnRelu<T> gate1_, gate2_;
  ConvBnRelu<T> self1_, self2_;
  ConvBnRelu<T> cross1_, cross2_;
  ConvBnRelu<T> smooth1_, smooth2_;
  Conv2d<T> alpha_conv_;
};

// Plain fusion baseline: upsample the coarse stream, concatenate, two conv
// blocks. Same interface as the cross-scale module so ablations swap freely.
template <class T>
class BasicFusion : public FusionModule<T> {
 public:
  BasicFusion(int ch, Rng& rng)
      : merge_(2 * ch, ch, 3, 1, 1, rng), smooth_(ch, ch, 3, 1, 1, rng) {
    this->register_module("merge", &merge_);
    this->register_module("smooth", &smooth_);
  }

  Var<T> fuse(const Var<T>& h1, const Var<T>& h2) override {
    auto up2 = resize_bilinear(h2, h1->value.size(2), h1->value.size(3));
    return smooth_.forward(merge_.forward(concat_channels(h1, up2)));
  }

 private:
  ConvBnRelu<T> merge_, smooth_;
};

template <class T>
std::unique_ptr<FusionModule<T>> make_fusion(FusionKind kind, int ch, Rng& rng) {
  if (kind == FusionKind::dual_cross) return std::make_unique<DualCrossFusion<T>>(ch, rng);
  return std::make_unique<BasicFusion<T>>(ch, rng);
}

}  // namespace decseg
