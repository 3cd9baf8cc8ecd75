#pragma once

#include <vector>

#include "metaexo/autodiff/paramset.hpp"
#include "metaexo/autodiff/tensor.hpp"

namespace metaexo::autodiff {

// Plain gradient descent; grads line up with the ParamSet order.
void sgd_step(ParamSet& params, const std::vector<Tensor>& grads, double lr);

class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamSet& params, const std::vector<Tensor>& grads, double lr);
  long long steps_taken() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace metaexo::autodiff
