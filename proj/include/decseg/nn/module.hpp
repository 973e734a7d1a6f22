#pragma once

#include <string>
#include <utility>
#include <vector>

#include "decseg/autograd/variable.hpp"

namespace decseg {

// Base class for layers and composite networks. Tracks parameters, persistent
// buffers (running statistics), and children so checkpoints address every
// tensor by a stable dotted name; also propagates train/eval mode.
//
// Children are registered by pointer in construction order, so containers of
// submodules must have stable addresses (unique_ptr or data members).
template <class T>
class Module {
 public:
  virtual ~Module() = default;
  Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;

  Var<T> register_parameter(const std::string& name, Tensor<T> init) {
    auto p = leaf(std::move(init));
    params_.emplace_back(name, p);
    return p;
  }

  void register_buffer(const std::string& name, Tensor<T>* buf) {
    buffers_.emplace_back(name, buf);
  }

  void register_module(const std::string& name, Module<T>* m) {
    children_.emplace_back(name, m);
  }

  void named_parameters(std::vector<std::pair<std::string, Var<T>>>& out,
                        const std::string& prefix = "") const {
    for (const auto& [n, p] : params_) out.emplace_back(prefix + n, p);
    for (const auto& [n, c] : children_) c->named_parameters(out, prefix + n + ".");
  }

  std::vector<std::pair<std::string, Var<T>>> named_parameters() const {
    std::vector<std::pair<std::string, Var<T>>> out;
    named_parameters(out);
    return out;
  }

  void named_buffers(std::vector<std::pair<std::string, Tensor<T>*>>& out,
                     const std::string& prefix = "") const {
    for (const auto& [n, b] : buffers_) out.emplace_back(prefix + n, b);
    for (const auto& [n, c] : children_) c->named_buffers(out, prefix + n + ".");
  }

  std::vector<std::pair<std::string, Tensor<T>*>> named_buffers() const {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    named_buffers(out);
    return out;
  }

  void set_training(bool training) {
    training_ = training;
    for (auto& [n, c] : children_) c->set_training(training);
  }

  bool is_training() const { return training_; }

  i64 parameter_count() const {
    i64 n = 0;
    for (const auto& [name, p] : named_parameters()) n += p->value.numel();
    return n;
  }

 private:
  std::vector<std::pair<std::string, Var<T>>> params_;
  std::vector<std::pair<std::string, Tensor<T>*>> buffers_;
  std::vector<std::pair<std::string, Module<T>*>> children_;
  bool training_ = true;
};

}  // namespace decseg
