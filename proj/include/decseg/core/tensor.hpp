#pragma once

#include <algorithm>
#include <cstring>
#include <memory>
#include <numeric>
#include <vector>

#include "decseg/core/common.hpp"

namespace decseg {

// Dense row-major tensor. Copies are shallow (storage is shared); use clone()
// for an independent buffer. Layout for feature maps is NCHW throughout.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) {
    shape_ = std::move(shape);
    numel_ = 1;
    for (int d : shape_) {
      DECSEG_CHECK(d > 0, "tensor dims must be positive, got " << d);
      numel_ *= d;
    }
    data_ = std::shared_ptr<T[]>(new T[numel_]());  // value-initialized (zeros)
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, T v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
  }

  static Tensor from(std::vector<int> shape, const std::vector<T>& values) {
    Tensor t(std::move(shape));
    DECSEG_CHECK((i64)values.size() == t.numel_,
                 "value count " << values.size() << " does not match numel " << t.numel_);
    std::copy(values.begin(), values.end(), t.data());
    return t;
  }

  bool defined() const { return data_ != nullptr; }
  const std::vector<int>& shape() const { return shape_; }
  int dim() const { return (int)shape_.size(); }

  int size(int i) const {
    DECSEG_CHECK(i >= 0 && i < dim(), "size(" << i << ") on rank-" << dim() << " tensor");
    return shape_[i];
  }

  i64 numel() const { return numel_; }
  T* data() { return data_.get(); }
  const T* data() const { return data_.get(); }

  T& operator[](i64 i) { return data_[i]; }
  const T& operator[](i64 i) const { return data_[i]; }

  // Unchecked NCHW accessors for tests and cold paths; hot loops index raw data().
  T& at4(int b, int c, int h, int w) {
    return data_[((i64)(b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at4(int b, int c, int h, int w) const {
    return const_cast<Tensor*>(this)->at4(b, c, h, w);
  }
  T& at3(int a, int h, int w) { return data_[((i64)a * shape_[1] + h) * shape_[2] + w]; }
  const T& at3(int a, int h, int w) const { return const_cast<Tensor*>(this)->at3(a, h, w); }

  Tensor clone() const {
    Tensor t(shape_);
    std::memcpy(t.data(), data(), sizeof(T) * numel_);
    return t;
  }

  void fill(T v) { std::fill(data(), data() + numel_, v); }
  void zero() { fill(T(0)); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> t(shape_);
    const T* s = data();
    U* d = t.data();
    for (i64 i = 0; i < numel_; ++i) d[i] = (U)s[i];
    return t;
  }

 private:
  template <class U>
  friend class Tensor;

  std::vector<int> shape_;
  i64 numel_ = 0;
  std::shared_ptr<T[]> data_;
};

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace decseg
