#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "metaexo/autodiff/paramset.hpp"
#include "metaexo/autodiff/tape.hpp"

namespace metaexo::autodiff {

// Named parameter tensors living on a tape, in ParamSet order. Graph
// builders look parameters up by name so adapted (on-tape) parameters and
// freshly lifted leaves are interchangeable.
struct ParamVars {
  std::vector<std::pair<std::string, Var>> items;

  Var at(const std::string& name) const;
  bool contains(const std::string& name) const;
};

// Pushes every tensor of `params` onto the tape as a leaf.
ParamVars lift(Tape& t, const ParamSet& params, bool trainable = true);

// Reads the current values of `vars` back into a ParamSet.
ParamSet materialize(const Tape& t, const ParamVars& vars);

// Repeats a {1, c} row `rows` times. Implemented as ones * row so the
// adjoint naturally sums over the batch.
Var row_broadcast(Tape& t, Var row, std::size_t rows);

// y = x W + b with x {batch, in}, W {in, out}, b {1, out}.
Var linear(Tape& t, Var x, Var w, Var b);

// Dilated 1-D convolution. input {c_in, t_len}, kernel {c_out, c_in, k};
// returns {c_out, t_out}. Causal mode left-pads with zeros (t_out = t_len),
// valid mode yields t_len - (k - 1) * dilation samples.
Var conv1d_dilated(Tape& t, Var input, Var kernel, std::size_t dilation,
                   bool causal = false);

// mean((a - b)^2) over all elements.
Var mse(Tape& t, Var a, Var b);

// sum(a * b) as a scalar; inner product of same-shape tensors.
Var dot_sum(Tape& t, Var a, Var b);

}  // namespace metaexo::autodiff
