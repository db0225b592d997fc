#pragma once

#include <vector>

#include "ladapt/autodiff/var.hpp"

namespace ladapt {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Plain Adam without weight decay. Parameters that received no gradient in
/// the last backward pass are left untouched.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Var<T>> params, AdamConfig config);

  void step();
  void zero_grad();
  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<Var<T>> params_;
  std::vector<Tensor<T>> m_, v_;
  AdamConfig config_;
  std::size_t t_ = 0;
};

}  // namespace ladapt
