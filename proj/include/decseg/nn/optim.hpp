#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "decseg/autograd/variable.hpp"

namespace decseg {

// Polynomial learning-rate decay: lr0 * (1 - step/max_steps)^power.
// step counts completed optimizer steps, so step 0 trains at lr0 and the last
// step (max_steps - 1) at a small positive rate.
inline double poly_lr(i64 step, double lr0, i64 max_steps, double power) {
  DECSEG_CHECK(max_steps > 0, "poly_lr: max_steps must be positive, got " << max_steps);
  DECSEG_CHECK(step >= 0 && step <= max_steps,
               "poly_lr: step " << step << " outside [0," << max_steps << "]");
  return lr0 * std::pow(1.0 - (double)step / (double)max_steps, power);
}

// SGD with classic momentum and decoupled-from-nothing L2 weight decay, i.e.
//   v <- mu*v + (g + wd*w);  w <- w - lr*v
// matching the reference framework's SGD so published recipes transfer as-is.
template <class T>
class SgdOptimizer {
 public:
  SgdOptimizer(std::vector<std::pair<std::string, Var<T>>> params, double momentum,
               double weight_decay)
      : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
    velocities_.reserve(params_.size());
    for (const auto& [name, p] : params_) {
      velocities_.emplace_back(name, Tensor<T>::zeros(p->value.shape()));
    }
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p->zero_grad();
  }

  void step(double lr) {
    for (size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k].second;
      if (!p->grad.defined()) continue;  // parameter unused in this graph
      T* w = p->value.data();
      const T* g = p->grad.data();
      T* v = velocities_[k].second.data();
      const T mu = (T)momentum_, wd = (T)weight_decay_, eta = (T)lr;
      for (i64 i = 0; i < p->value.numel(); ++i) {
        v[i] = mu * v[i] + g[i] + wd * w[i];
        w[i] -= eta * v[i];
      }
    }
  }

  // Velocity buffers, named like their parameters (for checkpointing).
  std::vector<std::pair<std::string, Tensor<T>>>& velocities() { return velocities_; }
  const std::vector<std::pair<std::string, Tensor<T>>>& velocities() const {
    return velocities_;
  }
  const std::vector<std::pair<std::string, Var<T>>>& params() const { return params_; }

 private:
  std::vector<std::pair<std::string, Var<T>>> params_;
  std::vector<std::pair<std::string, Tensor<T>>> velocities_;
  double momentum_, weight_decay_;
};

}  // namespace decseg
