#pragma once

#include "decseg/autograd/resample.hpp"
#include "decseg/nn/layers.hpp"

namespace decseg {

// Cross-level feature aggregation. Fuses an encoder level with the next deeper
// one: both are projected to a common width (1x1 convs), the deeper map is
// upsampled to the shallower one's size, and the concatenation passes through a
// 3x3 conv block. A global-pooling channel gate (two pointwise convs around a
// ReLU, sigmoid output) reweights the fused map, which is added back to itself:
//
//   out = ConvBnRelu(F'cat * W + F'cat),  W = sigmoid(pwc2(relu(pwc1(gap(F'cat)))))
//
// Sub-blocks are public so tests can recompose the pipeline and perform
// parameter surgery on the gate.
template <class T>
class CfaFuse : public Module<T> {
 public:
  CfaFuse(int ch_low, int ch_high, int out_ch, int reduction, Rng& rng)
      : proj_low(ch_low, out_ch, 1, 1, 0, true, rng),
        proj_high(ch_high, out_ch, 1, 1, 0, true, rng),
        cat_block(2 * out_ch, out_ch, 3, 1, 1, rng),
        pwc1(out_ch, out_ch / reduction, 1, 1, 0, true, rng),
        pwc2(out_ch / reduction, out_ch, 1, 1, 0, true, rng),
        out_block(out_ch, out_ch, 3, 1, 1, rng) {
    DECSEG_CHECK(out_ch % reduction == 0, "channel gate: width " << out_ch
                                                                 << " not divisible by reduction "
                                                                 << reduction);
    this->register_module("proj_low", &proj_low);
    this->register_module("proj_high", &proj_high);
    this->register_module("cat_block", &cat_block);
    this->register_module("pwc1", &pwc1);
    this->register_module("pwc2", &pwc2);
    this->register_module("out_block", &out_block);
  }

  // Fused concatenation feature F'cat (before the gate).
  Var<T> fused_cat(const Var<T>& f_low, const Var<T>& f_high) {
    DECSEG_CHECK(f_low->value.size(0) == f_high->value.size(0),
                 "cross-level fuse: batch mismatch");
    auto a = proj_low.forward(f_low);
    auto b = resize_like(proj_high.forward(f_high), f_low);
    return cat_block.forward(concat_channels(a, b));
  }

  // Channel gate W in (0,1)^[B,C,1,1].
  Var<T> gate(const Var<T>& fcat) {
    return sigmoid(pwc2.forward(relu(pwc1.forward(global_avg_pool(fcat)))));
  }

  Var<T> forward(const Var<T>& f_low, const Var<T>& f_high) {
    auto fcat = fused_cat(f_low, f_high);
    auto w = gate(fcat);
    return out_block.forward(add(scale_channels(fcat, w), fcat));
  }

  Conv2d<T> proj_low, proj_high;
  ConvBnRelu<T> cat_block;
  Conv2d<T> pwc1, pwc2;
  ConvBnRelu<T> out_block;
};

}  // namespace decseg
