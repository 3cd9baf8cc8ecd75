#include "metaexo/autodiff/paramset.hpp"

#include "metaexo/common/error.hpp"

namespace metaexo::autodiff {

Tensor& ParamSet::add(const std::string& name, Tensor value) {
  if (contains(name)) throw Error("duplicate parameter '" + name + "'");
  items_.emplace_back(name, std::move(value));
  return items_.back().second;
}

const Tensor& ParamSet::at(const std::string& name) const {
  for (const auto& [k, v] : items_)
    if (k == name) return v;
  throw Error("unknown parameter '" + name + "'");
}

Tensor& ParamSet::at(const std::string& name) {
  for (auto& [k, v] : items_)
    if (k == name) return v;
  throw Error("unknown parameter '" + name + "'");
}

bool ParamSet::contains(const std::string& name) const {
  for (const auto& [k, v] : items_)
    if (k == name) return true;
  return false;
}

std::size_t ParamSet::total_elements() const {
  std::size_t n = 0;
  for (const auto& [k, v] : items_) n += v.numel();
  return n;
}

}  // namespace metaexo::autodiff
