#include "metaexo/autodiff/ops.hpp"

#include "metaexo/common/error.hpp"

namespace metaexo::autodiff {

Var ParamVars::at(const std::string& name) const {
  for (const auto& [n, v] : items)
    if (n == name) return v;
  throw Error("no parameter named '" + name + "'");
}

bool ParamVars::contains(const std::string& name) const {
  for (const auto& [n, v] : items)
    if (n == name) return true;
  return false;
}

ParamVars lift(Tape& t, const ParamSet& params, bool trainable) {
  ParamVars out;
  out.items.reserve(params.size());
  for (const auto& [name, tensor] : params)
    out.items.emplace_back(name, t.leaf(tensor, trainable));
  return out;
}

ParamSet materialize(const Tape& t, const ParamVars& vars) {
  ParamSet out;
  for (const auto& [name, v] : vars.items) out.add(name, t.tensor(v));
  return out;
}

Var row_broadcast(Tape& t, Var row, std::size_t rows) {
  if (t.shape(row).size() != 2 || t.shape(row)[0] != 1)
    throw ShapeMismatchError("row_broadcast expects a {1, c} tensor");
  Var ones = t.leaf(Tensor::full({rows, 1}, 1.0), false);
  return t.matmul(ones, row);
}

Var linear(Tape& t, Var x, Var w, Var b) {
  Var y = t.matmul(x, w);
  return t.add(y, row_broadcast(t, b, t.shape(y)[0]));
}

Var conv1d_dilated(Tape& t, Var input, Var kernel, std::size_t dilation, bool causal) {
  const auto& in_shape = t.shape(input);
  const auto& k_shape = t.shape(kernel);
  if (in_shape.size() != 2)
    throw ShapeMismatchError("conv1d_dilated expects a {c_in, t} input");
  if (k_shape.size() != 3 || k_shape[1] != in_shape[0])
    throw ShapeMismatchError("conv1d_dilated expects a {c_out, c_in, k} kernel matching the input channels");
  const std::size_t c_in = in_shape[0];
  const std::size_t t_len = in_shape[1];
  const std::size_t c_out = k_shape[0];
  const std::size_t k = k_shape[2];

  ConvSpec spec;
  spec.batch = 1;
  spec.t_in = t_len;
  spec.channels = c_in;
  spec.kernel = k;
  spec.dilation = dilation;
  spec.causal = causal;

  Var cols = t.im2col(t.transpose(input), spec);            // {t_out, c_in*k}
  Var wmat = t.transpose(t.reshape(kernel, {c_out, c_in * k}));
  return t.transpose(t.matmul(cols, wmat));                  // {c_out, t_out}
}

Var mse(Tape& t, Var a, Var b) {
  Var d = t.sub(a, b);
  return t.mean(t.mul(d, d));
}

Var dot_sum(Tape& t, Var a, Var b) { return t.sum(t.mul(a, b)); }

}  // namespace metaexo::autodiff
