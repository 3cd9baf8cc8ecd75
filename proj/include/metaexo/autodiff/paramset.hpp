#pragma once

#include <string>
#include <utility>
#include <vector>

#include "metaexo/autodiff/tensor.hpp"

namespace metaexo::autodiff {

// Named parameters in a stable insertion order. The order defines how
// parameter lists line up with gradient lists everywhere else.
class ParamSet {
 public:
  Tensor& add(const std::string& name, Tensor value);
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  bool contains(const std::string& name) const;
  std::size_t size() const { return items_.size(); }
  std::size_t total_elements() const;

  const std::pair<std::string, Tensor>& item(std::size_t i) const { return items_[i]; }
  std::pair<std::string, Tensor>& item(std::size_t i) { return items_[i]; }

  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

}  // namespace metaexo::autodiff
