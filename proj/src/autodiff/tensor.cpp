#include "metaexo/autodiff/tensor.hpp"

#include <string>

#include "metaexo/common/error.hpp"

namespace metaexo::autodiff {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (shape.empty() || shape_numel(shape) != data.size())
    throw ShapeMismatchError("tensor data size " + std::to_string(data.size()) +
                             " does not match its shape");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

std::size_t Tensor::numel() const { return data.size(); }

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

}  // namespace metaexo::autodiff
