#pragma once

#include <cstddef>
#include <vector>

namespace metaexo::autodiff {

// Dense row-major float64 array. Rank is 1 (scalars, shape {1}) or 2 for
// everything the networks touch.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor scalar(double value);

  std::size_t numel() const;
};

bool same_shape(const Tensor& a, const Tensor& b);

}  // namespace metaexo::autodiff
