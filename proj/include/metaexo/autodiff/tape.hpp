#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "metaexo/autodiff/tensor.hpp"

namespace metaexo::autodiff {

// Handle into a Tape. Only meaningful together with the tape that issued it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class OpType {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kAddScalar,
  kMulScalar,
  kMatmul,
  kTranspose2d,
  kTanh,
  kRelu,
  kExp,
  kLog,
  kSoftplus,
  kSigmoid,
  kGtZeroMask,
  kConcat,
  kSlice,
  kZeroEmbed,
  kReshape,
  kSum,
  kFill,
  kIm2col,
  kCol2im,
};

// Layout of a batched dilated 1-D convolution expressed as im2col + matmul.
// Sequences are stacked along rows: row index b * t_in + t, one column per
// channel. Causal mode zero-pads on the left so t_out == t_in; valid mode
// shrinks to t_in - (kernel - 1) * dilation.
struct ConvSpec {
  std::size_t batch = 1;
  std::size_t t_in = 0;
  std::size_t channels = 0;
  std::size_t kernel = 0;
  std::size_t dilation = 1;
  bool causal = true;

  std::size_t t_out() const {
    return causal ? t_in : t_in - (kernel - 1) * dilation;
  }
};

// Eager reverse-mode tape. Every builder evaluates immediately and records
// one node. grad() walks the recorded graph backwards; its vector-Jacobian
// rules are themselves composed from these builders, so gradients remain
// differentiable when requested (create_graph).
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  // Copy of an existing var's value with gradient tracking severed.
  Var detach(Var x);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var neg(Var a);
  Var add_scalar(Var a, double s);
  Var mul_scalar(Var a, double s);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var softplus(Var a);
  Var sigmoid(Var a);
  // 1 where a > 0 else 0; carries no gradient into a.
  Var gtzero_mask(Var a);
  Var concat(const std::vector<Var>& parts, int axis);
  Var slice(Var a, int axis, std::size_t start, std::size_t len);
  // Places a into a zero tensor whose extent along `axis` is full_len;
  // adjoint counterpart of slice.
  Var zero_embed(Var a, int axis, std::size_t start, std::size_t full_len);
  Var reshape(Var a, std::vector<std::size_t> shape);
  // Sum of all elements, shape {1}.
  Var sum(Var a);
  // Broadcast a scalar {1} to `shape`; adjoint counterpart of sum.
  Var fill(Var scalar_var, std::vector<std::size_t> shape);
  Var im2col(Var a, const ConvSpec& spec);
  Var col2im(Var cols, const ConvSpec& spec);

  // Composites.
  Var mean(Var a);

  // Adjoints of `output` (which must hold exactly one element) with respect
  // to each var in `wrt`, as vars on this tape. With create_graph the
  // returned vars are differentiable functions of the graph; without it
  // they are inert values. Vars not influencing the output get zeros.
  std::vector<Var> grad(Var output, const std::vector<Var>& wrt,
                        bool create_graph = false);

  const std::vector<double>& data(Var v) const;
  const std::vector<std::size_t>& shape(Var v) const;
  double value(Var v) const;
  bool requires_grad(Var v) const;
  Tensor tensor(Var v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    OpType op = OpType::kLeaf;
    std::vector<std::size_t> shape;
    std::vector<double> data;
    std::vector<int> inputs;
    double attr = 0.0;
    std::vector<std::size_t> iattrs;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;
  Var push(Node&& n);
  Var elementwise_binary(OpType op, Var a, Var b);
  Var unary_map(OpType op, Var a, double (*fn)(double));
  bool rg(std::initializer_list<Var> ins) const;
  void check_rank2(Var v, const char* what) const;

  // VJP of one node: contribution to each input given the node's adjoint.
  void backprop_node(int id, Var adjoint, std::vector<int>& adj);
  void accumulate(std::vector<int>& adj, int input_id, Var contrib);

  std::vector<Node> nodes_;
  bool grad_mode_ = true;

  friend class GradModeGuard;
};

}  // namespace metaexo::autodiff
