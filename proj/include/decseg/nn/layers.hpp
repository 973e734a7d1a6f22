#pragma once

#include <cmath>

#include "decseg/autograd/conv.hpp"
#include "decseg/autograd/norm.hpp"
#include "decseg/autograd/ops.hpp"
#include "decseg/core/rng.hpp"
#include "decseg/nn/module.hpp"

namespace decseg {

// He-normal initializer for conv weights: std = sqrt(2 / fan_in).
template <class T>
Tensor<T> he_normal(std::vector<int> shape, i64 fan_in, Rng& rng) {
  Tensor<T> t(std::move(shape));
  const double stddev = std::sqrt(2.0 / (double)fan_in);
  T* p = t.data();
  for (i64 i = 0; i < t.numel(); ++i) p[i] = (T)rng.normal(0.0, stddev);
  return t;
}

template <class T>
class Conv2d : public Module<T> {
 public:
  Conv2d(int in_ch, int out_ch, int k, int stride, int pad, bool has_bias, Rng& rng)
      : stride_(stride), pad_(pad) {
    weight = this->register_parameter(
        "weight", he_normal<T>({out_ch, in_ch, k, k}, (i64)in_ch * k * k, rng));
    if (has_bias) bias = this->register_parameter("bias", Tensor<T>::zeros({out_ch}));
  }

  Var<T> forward(const Var<T>& x) { return conv2d(x, weight, bias, stride_, pad_); }

  Var<T> weight, bias;

 private:
  int stride_, pad_;
};

template <class T>
class ConvTranspose2d : public Module<T> {
 public:
  // Kernel 2, stride 2: exact 2x upsampling.
  ConvTranspose2d(int in_ch, int out_ch, Rng& rng) {
    weight = this->register_parameter("weight",
                                      he_normal<T>({in_ch, out_ch, 2, 2}, (i64)in_ch * 4, rng));
    bias = this->register_parameter("bias", Tensor<T>::zeros({out_ch}));
  }

  Var<T> forward(const Var<T>& x) { return conv_transpose2d_k2s2(x, weight, bias); }

  Var<T> weight, bias;
};

template <class T>
class BatchNorm2d : public Module<T> {
 public:
  explicit BatchNorm2d(int ch, double momentum = 0.1, double eps = 1e-5)
      : momentum_(momentum), eps_(eps) {
    gamma = this->register_parameter("weight", Tensor<T>::full({ch}, T(1)));
    beta = this->register_parameter("bias", Tensor<T>::zeros({ch}));
    running_mean = Tensor<T>::zeros({ch});
    running_var = Tensor<T>::full({ch}, T(1));
    this->register_buffer("running_mean", &running_mean);
    this->register_buffer("running_var", &running_var);
  }

  Var<T> forward(const Var<T>& x) {
    return batch_norm2d(x, gamma, beta, running_mean, running_var, this->is_training(),
                        momentum_, eps_);
  }

  Var<T> gamma, beta;
  Tensor<T> running_mean, running_var;

 private:
  double momentum_, eps_;
};

// Conv -> BatchNorm -> ReLU, the workhorse block of every figure labeled
// "Conv". Convolution carries no bias (the BN shift subsumes it).
template <class T>
class ConvBnRelu : public Module<T> {
 public:
  ConvBnRelu(int in_ch, int out_ch, int k, int stride, int pad, Rng& rng)
      : conv(in_ch, out_ch, k, stride, pad, /*has_bias=*/false, rng), bn(out_ch) {
    this->register_module("conv", &conv);
    this->register_module("bn", &bn);
  }

  Var<T> forward(const Var<T>& x) { return relu(bn.forward(conv.forward(x))); }

  Conv2d<T> conv;
  BatchNorm2d<T> bn;
};

}  // namespace decseg
