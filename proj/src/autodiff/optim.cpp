#include "metaexo/autodiff/optim.hpp"

#include <cmath>

#include "metaexo/common/error.hpp"

namespace metaexo::autodiff {

namespace {

void check_aligned(const ParamSet& params, const std::vector<Tensor>& grads) {
  if (grads.size() != params.size())
    throw ShapeMismatchError("gradient list does not line up with the parameter set");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!same_shape(grads[i], params.item(i).second))
      throw ShapeMismatchError("gradient shape mismatch for parameter '" +
                               params.item(i).first + "'");
}

}  // namespace

void sgd_step(ParamSet& params, const std::vector<Tensor>& grads, double lr) {
  check_aligned(params, grads);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& p = params.item(i).second.data;
    const auto& g = grads[i].data;
    for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
  }
}

void Adam::step(ParamSet& params, const std::vector<Tensor>& grads, double lr) {
  check_aligned(params, grads);
  if (m_.empty()) {
    for (const auto& [name, t] : params) {
      m_.push_back(Tensor::zeros(t.shape));
      v_.push_back(Tensor::zeros(t.shape));
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& p = params.item(i).second.data;
    auto& m = m_[i].data;
    auto& v = v_[i].data;
    const auto& g = grads[i].data;
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace metaexo::autodiff
