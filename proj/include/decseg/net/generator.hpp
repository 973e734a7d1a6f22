#pragma once

#include <vector>

#include "decseg/nn/layers.hpp"

namespace decseg {

// Image generator head: maps two-channel segmentation logits back to an RGB
// image. Encoder-decoder with three stride-2 down blocks and three transposed
// conv up stages, sigmoid output in [0,1]. Input spatial dims must be
// divisible by the total downsampling factor (8).
template <class T>
class Generator : public Module<T> {
 public:
  Generator(int in_ch, const std::vector<int>& widths, int out_ch, Rng& rng) {
    DECSEG_CHECK(widths.size() == 3, "generator expects 3 stage widths, got " << widths.size());
    int c = in_ch;
    for (int i = 0; i < 3; ++i) {
      down_.push_back(std::make_unique<ConvBnRelu<T>>(c, widths[i], 3, 2, 1, rng));
      this->register_module("down" + std::to_string(i + 1), down_.back().get());
      c = widths[i];
    }
    for (int i = 2; i >= 1; --i) {
      up_.push_back(std::make_unique<ConvTranspose2d<T>>(c, widths[i - 1], rng));
      conv_.push_back(std::make_unique<ConvBnRelu<T>>(widths[i - 1], widths[i - 1], 3, 1, 1, rng));
      const std::string lv = "up" + std::to_string(3 - i);
      this->register_module(lv + ".tconv", up_.back().get());
      this->register_module(lv + ".conv", conv_.back().get());
      c = widths[i - 1];
    }
    up_.push_back(std::make_unique<ConvTranspose2d<T>>(c, widths[0], rng));
    conv_.push_back(std::make_unique<ConvBnRelu<T>>(widths[0], widths[0], 3, 1, 1, rng));
    this->register_module("up3.tconv", up_.back().get());
    this->register_module("up3.conv", conv_.back().get());
    proj_ = std::make_unique<Conv2d<T>>(widths[0], out_ch, 1, 1, 0, true, rng);
    this->register_module("proj", proj_.get());
  }

  Var<T> forward(const Var<T>& z) {
    DECSEG_CHECK(z->value.size(2) % 8 == 0 && z->value.size(3) % 8 == 0,
                 "generator input dims must be divisible by 8, got "
                     << z->value.size(2) << "x" << z->value.size(3));
    Var<T> h = z;
    for (auto& d : down_) h = d->forward(h);
    for (size_t i = 0; i < up_.size(); ++i) h = conv_[i]->forward(up_[i]->forward(h));
    return sigmoid(proj_->forward(h));
  }

 private:
  std::vector<std::unique_ptr<ConvBnRelu<T>>> down_;
  std::vector<std::unique_ptr<ConvTranspose2d<T>>> up_;
  std::vector<std::unique_ptr<ConvBnRelu<T>>> conv_;
  std::unique_ptr<Conv2d<T>> proj_;
};

}  // namespace decseg
