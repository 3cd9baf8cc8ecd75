#include "metaexo/autodiff/tape.hpp"

#include <cmath>
#include <string>

#include "metaexo/common/error.hpp"
#include "metaexo/kernels/kernels.hpp"

namespace metaexo::autodiff {

namespace {

std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "{";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "}";
}

double tanh_fn(double x) { return std::tanh(x); }
double exp_fn(double x) { return std::exp(x); }
double log_fn(double x) { return std::log(x); }
double relu_fn(double x) { return x > 0.0 ? x : 0.0; }
double mask_fn(double x) { return x > 0.0 ? 1.0 : 0.0; }

double softplus_fn(double x) {
  // exp(x) overflows long before this threshold matters for the value.
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

double sigmoid_fn(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// Restores the tape's grad mode when a non-differentiable backward pass ends.
class GradModeGuard {
 public:
  GradModeGuard(Tape& tape, bool mode) : tape_(tape), saved_(tape.grad_mode_) {
    tape_.grad_mode_ = mode;
  }
  ~GradModeGuard() { tape_.grad_mode_ = saved_; }

 private:
  Tape& tape_;
  bool saved_;
};

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw Error("invalid var handle");
  return nodes_[v.id];
}

Var Tape::push(Node&& n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

bool Tape::rg(std::initializer_list<Var> ins) const {
  if (!grad_mode_) return false;
  for (Var v : ins)
    if (node(v).requires_grad) return true;
  return false;
}

void Tape::check_rank2(Var v, const char* what) const {
  if (node(v).shape.size() != 2)
    throw ShapeMismatchError(std::string(what) + " expects a rank-2 tensor, got shape " +
                             shape_str(node(v).shape));
}

const std::vector<double>& Tape::data(Var v) const { return node(v).data; }
const std::vector<std::size_t>& Tape::shape(Var v) const { return node(v).shape; }

double Tape::value(Var v) const {
  const Node& n = node(v);
  if (n.data.size() != 1)
    throw ShapeMismatchError("value() expects a single element, got shape " +
                             shape_str(n.shape));
  return n.data[0];
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Tensor Tape::tensor(Var v) const {
  const Node& n = node(v);
  return Tensor(n.shape, n.data);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = OpType::kLeaf;
  n.shape = std::move(value.shape);
  n.data = std::move(value.data);
  n.requires_grad = grad_mode_ && requires_grad;
  return push(std::move(n));
}

Var Tape::detach(Var x) { return leaf(tensor(x), false); }

Var Tape::elementwise_binary(OpType op, Var a, Var b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  if (na.shape != nb.shape)
    throw ShapeMismatchError("elementwise op on shapes " + shape_str(na.shape) + " and " +
                             shape_str(nb.shape));
  Node n;
  n.op = op;
  n.shape = na.shape;
  n.data.resize(na.data.size());
  n.inputs = {a.id, b.id};
  n.requires_grad = rg({a, b});
  const auto& k = kernels::active();
  switch (op) {
    case OpType::kAdd: k.add(na.data.data(), nb.data.data(), n.data.data(), n.data.size()); break;
    case OpType::kSub: k.sub(na.data.data(), nb.data.data(), n.data.data(), n.data.size()); break;
    case OpType::kMul: k.mul(na.data.data(), nb.data.data(), n.data.data(), n.data.size()); break;
    case OpType::kDiv: k.div(na.data.data(), nb.data.data(), n.data.data(), n.data.size()); break;
    default: throw Error("not an elementwise binary op");
  }
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) { return elementwise_binary(OpType::kAdd, a, b); }
Var Tape::sub(Var a, Var b) { return elementwise_binary(OpType::kSub, a, b); }
Var Tape::mul(Var a, Var b) { return elementwise_binary(OpType::kMul, a, b); }
Var Tape::div(Var a, Var b) { return elementwise_binary(OpType::kDiv, a, b); }

Var Tape::neg(Var a) {
  const Node& na = node(a);
  Node n;
  n.op = OpType::kNeg;
  n.shape = na.shape;
  n.data.resize(na.data.size());
  n.inputs = {a.id};
  n.requires_grad = rg({a});
  kernels::active().scale(na.data.data(), -1.0, n.data.data(), n.data.size());
  return push(std::move(n));
}

Var Tape::add_scalar(Var a, double s) {
  const Node& na = node(a);
  Node n;
  n.op = OpType::kAddScalar;
  n.shape = na.shape;
  n.data.resize(na.data.size());
  n.inputs = {a.id};
  n.attr = s;
  n.requires_grad = rg({a});
  kernels::active().shift(na.data.data(), s, n.data.data(), n.data.size());
  return push(std::move(n));
}

Var Tape::mul_scalar(Var a, double s) {
  const Node& na = node(a);
  Node n;
  n.op = OpType::kMulScalar;
  n.shape = na.shape;
  n.data.resize(na.data.size());
  n.inputs = {a.id};
  n.attr = s;
  n.requires_grad = rg({a});
  kernels::active().scale(na.data.data(), s, n.data.data(), n.data.size());
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  check_rank2(a, "matmul");
  check_rank2(b, "matmul");
  const Node& na = node(a);
  const Node& nb = node(b);
  const std::size_t m = na.shape[0], k = na.shape[1];
  if (nb.shape[0] != k)
    throw ShapeMismatchError("matmul inner dimensions disagree: " + shape_str(na.shape) +
                             " x " + shape_str(nb.shape));
  const std::size_t nn = nb.shape[1];
  Node n;
  n.op = OpType::kMatmul;
  n.shape = {m, nn};
  n.data.resize(m * nn);
  n.inputs = {a.id, b.id};
  n.requires_grad = rg({a, b});
  kernels::active().matmul(na.data.data(), nb.data.data(), n.data.data(), m, k, nn);
  return push(std::move(n));
}

Var Tape::transpose(Var a) {
  check_rank2(a, "transpose");
  const Node& na = node(a);
  const std::size_t r = na.shape[0], c = na.shape[1];
  Node n;
  n.op = OpType::kTranspose2d;
  n.shape = {c, r};
  n.data.resize(r * c);
  n.inputs = {a.id};
  n.requires_grad = rg({a});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) n.data[j * r + i] = na.data[i * c + j];
  return push(std::move(n));
}

Var Tape::unary_map(OpType op, Var a, double (*fn)(double)) {
  const Node& na = node(a);
  Node n;
  n.op = op;
  n.shape = na.shape;
  n.data.resize(na.data.size());
  n.inputs = {a.id};
  n.requires_grad = rg({a});
  for (std::size_t i = 0; i < n.data.size(); ++i) n.data[i] = fn(na.data[i]);
  return push(std::move(n));
}

Var Tape::tanh(Var a) { return unary_map(OpType::kTanh, a, tanh_fn); }
Var Tape::relu(Var a) { return unary_map(OpType::kRelu, a, relu_fn); }
Var Tape::exp(Var a) { return unary_map(OpType::kExp, a, exp_fn); }
Var Tape::log(Var a) { return unary_map(OpType::kLog, a, log_fn); }
Var Tape::softplus(Var a) { return unary_map(OpType::kSoftplus, a, softplus_fn); }
Var Tape::sigmoid(Var a) { return unary_map(OpType::kSigmoid, a, sigmoid_fn); }

Var Tape::gtzero_mask(Var a) {
  Var out = unary_map(OpType::kGtZeroMask, a, mask_fn);
  // The mask is piecewise constant; never differentiate through it.
  nodes_[out.id].requires_grad = false;
  return out;
}

Var Tape::concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ShapeMismatchError("concat of zero tensors");
  if (axis != 0 && axis != 1) throw ShapeMismatchError("concat axis must be 0 or 1");
  const std::size_t other = 1 - axis;
  const std::vector<std::size_t>& s0 = node(parts[0]).shape;
  if (s0.size() != 2) throw ShapeMismatchError("concat expects rank-2 tensors");
  std::size_t along = 0;
  bool any_rg = false;
  for (Var p : parts) {
    const Node& np = node(p);
    if (np.shape.size() != 2 || np.shape[other] != s0[other])
      throw ShapeMismatchError("concat shapes disagree off the concat axis");
    along += np.shape[axis];
    any_rg = any_rg || np.requires_grad;
  }
  Node n;
  n.op = OpType::kConcat;
  n.shape = s0;
  n.shape[axis] = along;
  n.data.resize(n.shape[0] * n.shape[1]);
  for (Var p : parts) n.inputs.push_back(p.id);
  n.iattrs = {static_cast<std::size_t>(axis)};
  n.requires_grad = grad_mode_ && any_rg;
  const std::size_t rows = n.shape[0], cols = n.shape[1];
  std::size_t offset = 0;
  for (Var p : parts) {
    const Node& np = node(p);
    const std::size_t pr = np.shape[0], pc = np.shape[1];
    if (axis == 0) {
      for (std::size_t i = 0; i < pr * pc; ++i) n.data[offset * cols + i] = np.data[i];
      offset += pr;
    } else {
      for (std::size_t i = 0; i < pr; ++i)
        for (std::size_t j = 0; j < pc; ++j) n.data[i * cols + offset + j] = np.data[i * pc + j];
      offset += pc;
    }
  }
  (void)rows;
  return push(std::move(n));
}

Var Tape::slice(Var a, int axis, std::size_t start, std::size_t len) {
  check_rank2(a, "slice");
  if (axis != 0 && axis != 1) throw ShapeMismatchError("slice axis must be 0 or 1");
  const Node& na = node(a);
  if (start + len > na.shape[axis] || len == 0)
    throw ShapeMismatchError("slice [" + std::to_string(start) + "," +
                             std::to_string(start + len) + ") out of range for shape " +
                             shape_str(na.shape));
  Node n;
  n.op = OpType::kSlice;
  n.shape = na.shape;
  n.shape[axis] = len;
  n.data.resize(n.shape[0] * n.shape[1]);
  n.inputs = {a.id};
  n.iattrs = {static_cast<std::size_t>(axis), start, len, na.shape[axis]};
  n.requires_grad = rg({a});
  const std::size_t cols = na.shape[1];
  if (axis == 0) {
    for (std::size_t i = 0; i < len * cols; ++i) n.data[i] = na.data[start * cols + i];
  } else {
    for (std::size_t i = 0; i < na.shape[0]; ++i)
      for (std::size_t j = 0; j < len; ++j) n.data[i * len + j] = na.data[i * cols + start + j];
  }
  return push(std::move(n));
}

Var Tape::zero_embed(Var a, int axis, std::size_t start, std::size_t full_len) {
  check_rank2(a, "zero_embed");
  if (axis != 0 && axis != 1) throw ShapeMismatchError("zero_embed axis must be 0 or 1");
  const Node& na = node(a);
  const std::size_t len = na.shape[axis];
  if (start + len > full_len)
    throw ShapeMismatchError("zero_embed extent exceeds the target length");
  Node n;
  n.op = OpType::kZeroEmbed;
  n.shape = na.shape;
  n.shape[axis] = full_len;
  n.data.assign(n.shape[0] * n.shape[1], 0.0);
  n.inputs = {a.id};
  n.iattrs = {static_cast<std::size_t>(axis), start, len, full_len};
  n.requires_grad = rg({a});
  const std::size_t cols = n.shape[1];
  if (axis == 0) {
    for (std::size_t i = 0; i < len * na.shape[1]; ++i) n.data[start * cols + i] = na.data[i];
  } else {
    for (std::size_t i = 0; i < na.shape[0]; ++i)
      for (std::size_t j = 0; j < len; ++j) n.data[i * cols + start + j] = na.data[i * len + j];
  }
  return push(std::move(n));
}

Var Tape::reshape(Var a, std::vector<std::size_t> shape) {
  const Node& na = node(a);
  std::size_t n_new = 1;
  for (std::size_t d : shape) n_new *= d;
  if (shape.empty() || n_new != na.data.size())
    throw ShapeMismatchError("reshape to " + shape_str(shape) + " from " +
                             shape_str(na.shape));
  Node n;
  n.op = OpType::kReshape;
  n.shape = std::move(shape);
  n.data = na.data;
  n.inputs = {a.id};
  n.iattrs = na.shape;
  n.requires_grad = rg({a});
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  const Node& na = node(a);
  double acc = 0.0;
  for (double x : na.data) acc += x;
  Node n;
  n.op = OpType::kSum;
  n.shape = {1};
  n.data = {acc};
  n.inputs = {a.id};
  n.iattrs = na.shape;
  n.requires_grad = rg({a});
  return push(std::move(n));
}

Var Tape::fill(Var scalar_var, std::vector<std::size_t> shape) {
  const Node& na = node(scalar_var);
  if (na.data.size() != 1)
    throw ShapeMismatchError("fill expects a single-element source, got " +
                             shape_str(na.shape));
  std::size_t count = 1;
  for (std::size_t d : shape) count *= d;
  Node n;
  n.op = OpType::kFill;
  n.shape = std::move(shape);
  n.data.assign(count, na.data[0]);
  n.inputs = {scalar_var.id};
  n.requires_grad = rg({scalar_var});
  return push(std::move(n));
}

Var Tape::im2col(Var a, const ConvSpec& spec) {
  check_rank2(a, "im2col");
  const Node& na = node(a);
  if (spec.kernel == 0 || spec.dilation == 0)
    throw ShapeMismatchError("im2col requires kernel and dilation >= 1");
  if (!spec.causal && spec.t_in <= (spec.kernel - 1) * spec.dilation)
    throw ShapeMismatchError("sequence too short for a valid convolution");
  if (na.shape[0] != spec.batch * spec.t_in || na.shape[1] != spec.channels)
    throw ShapeMismatchError("im2col input shape " + shape_str(na.shape) +
                             " does not match its ConvSpec");
  const std::size_t t_out = spec.t_out();
  const std::size_t kc = spec.kernel * spec.channels;
  Node n;
  n.op = OpType::kIm2col;
  n.shape = {spec.batch * t_out, kc};
  n.data.assign(spec.batch * t_out * kc, 0.0);
  n.inputs = {a.id};
  n.iattrs = {spec.batch, spec.t_in, spec.channels, spec.kernel, spec.dilation,
              spec.causal ? std::size_t{1} : std::size_t{0}};
  n.requires_grad = rg({a});
  for (std::size_t b = 0; b < spec.batch; ++b)
    for (std::size_t t = 0; t < t_out; ++t) {
      double* row = n.data.data() + (b * t_out + t) * kc;
      for (std::size_t k = 0; k < spec.kernel; ++k) {
        // Causal taps look back so that tap k = kernel-1 is the current
        // sample; valid taps slide forward from the window start.
        const std::ptrdiff_t src =
            spec.causal
                ? static_cast<std::ptrdiff_t>(t) -
                      static_cast<std::ptrdiff_t>((spec.kernel - 1 - k) * spec.dilation)
                : static_cast<std::ptrdiff_t>(t + k * spec.dilation);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(spec.t_in)) continue;
        const double* in_row = na.data.data() + (b * spec.t_in + src) * spec.channels;
        // Channel-major columns: column c*kernel + k holds tap k of channel c,
        // so a rank-3 kernel {c_out, c_in, k} flattens straight into the
        // matching weight matrix.
        for (std::size_t c = 0; c < spec.channels; ++c) row[c * spec.kernel + k] = in_row[c];
      }
    }
  return push(std::move(n));
}

Var Tape::col2im(Var cols, const ConvSpec& spec) {
  check_rank2(cols, "col2im");
  const Node& nc = node(cols);
  const std::size_t t_out = spec.t_out();
  const std::size_t kc = spec.kernel * spec.channels;
  if (nc.shape[0] != spec.batch * t_out || nc.shape[1] != kc)
    throw ShapeMismatchError("col2im input shape " + shape_str(nc.shape) +
                             " does not match its ConvSpec");
  Node n;
  n.op = OpType::kCol2im;
  n.shape = {spec.batch * spec.t_in, spec.channels};
  n.data.assign(spec.batch * spec.t_in * spec.channels, 0.0);
  n.inputs = {cols.id};
  n.iattrs = {spec.batch, spec.t_in, spec.channels, spec.kernel, spec.dilation,
              spec.causal ? std::size_t{1} : std::size_t{0}};
  n.requires_grad = rg({cols});
  for (std::size_t b = 0; b < spec.batch; ++b)
    for (std::size_t t = 0; t < t_out; ++t) {
      const double* row = nc.data.data() + (b * t_out + t) * kc;
      for (std::size_t k = 0; k < spec.kernel; ++k) {
        const std::ptrdiff_t src =
            spec.causal
                ? static_cast<std::ptrdiff_t>(t) -
                      static_cast<std::ptrdiff_t>((spec.kernel - 1 - k) * spec.dilation)
                : static_cast<std::ptrdiff_t>(t + k * spec.dilation);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(spec.t_in)) continue;
        double* out_row = n.data.data() + (b * spec.t_in + src) * spec.channels;
        for (std::size_t c = 0; c < spec.channels; ++c) out_row[c] += row[c * spec.kernel + k];
      }
    }
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  const std::size_t n = node(a).data.size();
  return mul_scalar(sum(a), 1.0 / static_cast<double>(n));
}

void Tape::accumulate(std::vector<int>& adj, int input_id, Var contrib) {
  if (adj[input_id] < 0)
    adj[input_id] = contrib.id;
  else
    adj[input_id] = add(Var{adj[input_id]}, contrib).id;
}

void Tape::backprop_node(int id, Var a, std::vector<int>& adj) {
  // Copy shared fields: builder calls below may reallocate nodes_.
  const OpType op = nodes_[id].op;
  const std::vector<int> inputs = nodes_[id].inputs;
  const double attr = nodes_[id].attr;
  const std::vector<std::size_t> iattrs = nodes_[id].iattrs;
  const Var out{id};

  auto needs = [&](std::size_t i) { return nodes_[inputs[i]].requires_grad; };

  switch (op) {
    case OpType::kLeaf:
      break;
    case OpType::kAdd:
      if (needs(0)) accumulate(adj, inputs[0], a);
      if (needs(1)) accumulate(adj, inputs[1], a);
      break;
    case OpType::kSub:
      if (needs(0)) accumulate(adj, inputs[0], a);
      if (needs(1)) accumulate(adj, inputs[1], neg(a));
      break;
    case OpType::kMul:
      if (needs(0)) accumulate(adj, inputs[0], mul(a, Var{inputs[1]}));
      if (needs(1)) accumulate(adj, inputs[1], mul(a, Var{inputs[0]}));
      break;
    case OpType::kDiv:
      // out = x / y: d/dx = a / y, d/dy = -a * out / y.
      if (needs(0)) accumulate(adj, inputs[0], div(a, Var{inputs[1]}));
      if (needs(1)) accumulate(adj, inputs[1], neg(mul(a, div(out, Var{inputs[1]}))));
      break;
    case OpType::kNeg:
      if (needs(0)) accumulate(adj, inputs[0], neg(a));
      break;
    case OpType::kAddScalar:
      if (needs(0)) accumulate(adj, inputs[0], a);
      break;
    case OpType::kMulScalar:
      if (needs(0)) accumulate(adj, inputs[0], mul_scalar(a, attr));
      break;
    case OpType::kMatmul:
      if (needs(0)) accumulate(adj, inputs[0], matmul(a, transpose(Var{inputs[1]})));
      if (needs(1)) accumulate(adj, inputs[1], matmul(transpose(Var{inputs[0]}), a));
      break;
    case OpType::kTranspose2d:
      if (needs(0)) accumulate(adj, inputs[0], transpose(a));
      break;
    case OpType::kTanh:
      // 1 - tanh(x)^2 expressed through the stored output.
      if (needs(0))
        accumulate(adj, inputs[0], mul(a, add_scalar(neg(mul(out, out)), 1.0)));
      break;
    case OpType::kRelu:
      if (needs(0)) accumulate(adj, inputs[0], mul(a, gtzero_mask(Var{inputs[0]})));
      break;
    case OpType::kExp:
      if (needs(0)) accumulate(adj, inputs[0], mul(a, out));
      break;
    case OpType::kLog:
      if (needs(0)) accumulate(adj, inputs[0], div(a, Var{inputs[0]}));
      break;
    case OpType::kSoftplus:
      if (needs(0)) accumulate(adj, inputs[0], mul(a, sigmoid(Var{inputs[0]})));
      break;
    case OpType::kSigmoid:
      // out * (1 - out).
      if (needs(0))
        accumulate(adj, inputs[0], mul(a, mul(out, add_scalar(neg(out), 1.0))));
      break;
    case OpType::kGtZeroMask:
      break;
    case OpType::kConcat: {
      const int axis = static_cast<int>(iattrs[0]);
      std::size_t offset = 0;
      for (int in : inputs) {
        const std::size_t len = nodes_[in].shape[axis];
        if (nodes_[in].requires_grad)
          accumulate(adj, in, slice(a, axis, offset, len));
        offset += len;
      }
      break;
    }
    case OpType::kSlice:
      if (needs(0))
        accumulate(adj, inputs[0],
                   zero_embed(a, static_cast<int>(iattrs[0]), iattrs[1], iattrs[3]));
      break;
    case OpType::kZeroEmbed:
      if (needs(0))
        accumulate(adj, inputs[0],
                   slice(a, static_cast<int>(iattrs[0]), iattrs[1], iattrs[2]));
      break;
    case OpType::kReshape:
      if (needs(0)) accumulate(adj, inputs[0], reshape(a, iattrs));
      break;
    case OpType::kSum:
      if (needs(0)) accumulate(adj, inputs[0], fill(a, iattrs));
      break;
    case OpType::kFill:
      if (needs(0)) accumulate(adj, inputs[0], sum(a));
      break;
    case OpType::kIm2col:
    case OpType::kCol2im: {
      ConvSpec spec;
      spec.batch = iattrs[0];
      spec.t_in = iattrs[1];
      spec.channels = iattrs[2];
      spec.kernel = iattrs[3];
      spec.dilation = iattrs[4];
      spec.causal = iattrs[5] != 0;
      if (needs(0))
        accumulate(adj, inputs[0],
                   op == OpType::kIm2col ? col2im(a, spec) : im2col(a, spec));
      break;
    }
  }
}

std::vector<Var> Tape::grad(Var output, const std::vector<Var>& wrt, bool create_graph) {
  const Node& root = node(output);
  if (root.data.size() != 1)
    throw ShapeMismatchError("grad() expects a scalar output, got shape " +
                             shape_str(root.shape));

  GradModeGuard guard(*this, create_graph);

  // Active set: nodes that both feed the output and require gradients.
  std::vector<char> active(output.id + 1, 0);
  active[output.id] = root.requires_grad ? 1 : 0;
  for (int id = output.id; id >= 0; --id) {
    if (!active[id]) continue;
    for (int in : nodes_[id].inputs)
      if (nodes_[in].requires_grad) active[in] = 1;
  }

  std::vector<int> adj(output.id + 1, -1);
  if (active[output.id]) adj[output.id] = leaf(Tensor::scalar(1.0), false).id;

  for (int id = output.id; id >= 0; --id) {
    if (!active[id] || adj[id] < 0) continue;
    backprop_node(id, Var{adj[id]}, adj);
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (Var w : wrt) {
    const Node& nw = node(w);
    if (w.id <= output.id && adj[w.id] >= 0)
      out.push_back(Var{adj[w.id]});
    else
      out.push_back(leaf(Tensor::zeros(nw.shape), false));
  }
  return out;
}

}  // namespace metaexo::autodiff
