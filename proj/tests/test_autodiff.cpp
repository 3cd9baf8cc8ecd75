#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <vector>

#include "doctest.h"
#include "metaexo/autodiff/checkpoint.hpp"
#include "metaexo/autodiff/ops.hpp"
#include "metaexo/autodiff/optim.hpp"
#include "metaexo/autodiff/paramset.hpp"
#include "metaexo/autodiff/tape.hpp"
#include "metaexo/common/error.hpp"
#include "metaexo/common/io.hpp"
#include "metaexo/common/rng.hpp"

using namespace metaexo;
using namespace metaexo::autodiff;

namespace {

// Builds a scalar function of the given leaves on a fresh tape.
using BuildFn = std::function<Var(Tape&, const std::vector<Var>&)>;

double eval_fn(const BuildFn& f, const std::vector<Tensor>& at) {
  Tape t;
  std::vector<Var> leaves;
  leaves.reserve(at.size());
  for (const auto& v : at) leaves.push_back(t.leaf(v, true));
  return t.value(f(t, leaves));
}

std::vector<Tensor> analytic_grad(const BuildFn& f, const std::vector<Tensor>& at) {
  Tape t;
  std::vector<Var> leaves;
  for (const auto& v : at) leaves.push_back(t.leaf(v, true));
  Var out = f(t, leaves);
  auto gs = t.grad(out, leaves);
  std::vector<Tensor> r;
  for (Var g : gs) r.push_back(t.tensor(g));
  return r;
}

// Central difference against the analytic gradient, elementwise.
double max_grad_error(const BuildFn& f, std::vector<Tensor> at, double h = 1e-5) {
  const auto gs = analytic_grad(f, at);
  double worst = 0.0;
  for (std::size_t li = 0; li < at.size(); ++li) {
    for (std::size_t j = 0; j < at[li].data.size(); ++j) {
      const double keep = at[li].data[j];
      at[li].data[j] = keep + h;
      const double fp = eval_fn(f, at);
      at[li].data[j] = keep - h;
      const double fm = eval_fn(f, at);
      at[li].data[j] = keep;
      const double fd = (fp - fm) / (2.0 * h);
      const double a = gs[li].data[j];
      const double err = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

std::vector<Tensor> random_leaves(Rng& rng, std::size_t count,
                                  std::vector<std::size_t> shape) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < count; ++i) {
    Tensor t = Tensor::zeros(shape);
    for (auto& x : t.data) x = rng.uniform(-0.8, 0.8);
    out.push_back(std::move(t));
  }
  return out;
}

// Random composition over a homogeneous pool of {2,3} tensors exercising the
// whole op set except relu, whose kink breaks finite differences; relu gets
// a dedicated test at points away from zero.
Var random_graph(Tape& t, const std::vector<Var>& leaves, std::uint64_t seed,
                 int steps) {
  Rng rng(seed);
  std::vector<Var> pool = leaves;
  auto pick = [&]() { return pool[rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1)]; };
  for (int s = 0; s < steps; ++s) {
    const std::int64_t op = rng.uniform_int(0, 11);
    Var x = pick();
    Var y = pick();
    switch (op) {
      case 0: pool.push_back(t.add(x, y)); break;
      case 1: pool.push_back(t.sub(x, y)); break;
      case 2: pool.push_back(t.mul(x, y)); break;
      case 3: pool.push_back(t.div(x, t.add_scalar(t.sigmoid(y), 0.5))); break;
      case 4: pool.push_back(t.tanh(x)); break;
      case 5: pool.push_back(t.exp(t.mul_scalar(x, 0.3))); break;
      case 6: pool.push_back(t.log(t.add_scalar(t.sigmoid(x), 0.5))); break;
      case 7: pool.push_back(t.softplus(x)); break;
      case 8: pool.push_back(t.add_scalar(t.mul_scalar(x, -1.3), 0.7)); break;
      case 9: // matmul round trip back to {2,3}
        pool.push_back(t.tanh(t.matmul(t.matmul(x, t.transpose(y)), pick())));
        break;
      case 10: // concat rows then slice a shifted window
        pool.push_back(t.slice(t.concat({x, y}, 0), 0, 1, 2));
        break;
      case 11: // collapse and refill
        pool.push_back(t.fill(t.mul_scalar(t.sum(x), 0.1), {2, 3}));
        break;
    }
  }
  Var acc = pool[0];
  for (std::size_t i = 1; i < pool.size(); ++i) acc = t.add(acc, pool[i]);
  return t.mean(t.tanh(acc));
}

}  // namespace

TEST_CASE("every primitive passes a finite-difference gradient check") {
  Rng rng(101);
  auto unary = [&](const char* name, std::function<Var(Tape&, Var)> op, double lo,
                   double hi) {
    CAPTURE(name);
    Tensor x = Tensor::zeros({2, 3});
    for (auto& v : x.data) v = rng.uniform(lo, hi);
    BuildFn f = [&](Tape& t, const std::vector<Var>& l) { return t.mean(op(t, l[0])); };
    CHECK(max_grad_error(f, {x}) < 1e-7);
  };
  unary("tanh", [](Tape& t, Var x) { return t.tanh(x); }, -2, 2);
  unary("exp", [](Tape& t, Var x) { return t.exp(x); }, -1, 1);
  unary("log", [](Tape& t, Var x) { return t.log(x); }, 0.2, 3);
  unary("softplus", [](Tape& t, Var x) { return t.softplus(x); }, -3, 3);
  unary("sigmoid", [](Tape& t, Var x) { return t.sigmoid(x); }, -3, 3);
  unary("neg", [](Tape& t, Var x) { return t.neg(x); }, -2, 2);
  unary("relu_away_from_kink", [](Tape& t, Var x) { return t.relu(x); }, 0.2, 2);
  unary("relu_negative_side", [](Tape& t, Var x) { return t.relu(x); }, -2, -0.2);
  unary("transpose", [](Tape& t, Var x) { return t.transpose(x); }, -2, 2);
  unary("reshape", [](Tape& t, Var x) { return t.reshape(x, {3, 2}); }, -2, 2);
  unary("add_scalar", [](Tape& t, Var x) { return t.add_scalar(x, 1.3); }, -2, 2);
  unary("mul_scalar", [](Tape& t, Var x) { return t.mul_scalar(x, -0.7); }, -2, 2);
  unary("sum_fill", [](Tape& t, Var x) { return t.fill(t.mul_scalar(t.sum(x), 0.25), {4, 2}); },
        -2, 2);
  unary("slice", [](Tape& t, Var x) { return t.slice(x, 1, 1, 2); }, -2, 2);
  unary("zero_embed", [](Tape& t, Var x) { return t.zero_embed(x, 0, 2, 5); }, -2, 2);

  auto binary = [&](const char* name, std::function<Var(Tape&, Var, Var)> op) {
    CAPTURE(name);
    Tensor x = Tensor::zeros({2, 3}), y = Tensor::zeros({2, 3});
    for (auto& v : x.data) v = rng.uniform(-2, 2);
    for (auto& v : y.data) v = rng.uniform(0.5, 2.5);
    BuildFn f = [&](Tape& t, const std::vector<Var>& l) {
      return t.mean(op(t, l[0], l[1]));
    };
    CHECK(max_grad_error(f, {x, y}) < 1e-7);
  };
  binary("add", [](Tape& t, Var a, Var b) { return t.add(a, b); });
  binary("sub", [](Tape& t, Var a, Var b) { return t.sub(a, b); });
  binary("mul", [](Tape& t, Var a, Var b) { return t.mul(a, b); });
  binary("div", [](Tape& t, Var a, Var b) { return t.div(a, b); });
  binary("matmul", [](Tape& t, Var a, Var b) { return t.matmul(a, t.transpose(b)); });
  binary("concat0", [](Tape& t, Var a, Var b) { return t.concat({a, b}, 0); });
  binary("concat1", [](Tape& t, Var a, Var b) { return t.concat({a, b}, 1); });
}

TEST_CASE("random op compositions pass the finite-difference check") {
  for (std::uint64_t seed : {7ull, 21ull, 90ull, 1234ull, 777ull, 31337ull}) {
    CAPTURE(seed);
    Rng rng(seed * 3 + 1);
    auto leaves = random_leaves(rng, 6, {2, 3});
    BuildFn f = [seed](Tape& t, const std::vector<Var>& l) {
      return random_graph(t, l, seed, 14);
    };
    CHECK(max_grad_error(f, leaves) < 1e-6);
  }
}

TEST_CASE("gradients of gradients match the analytic second derivative") {
  // f = sum(x^3): df/dx = 3x^2, d/dx sum(df/dx) = 6x.
  Tape t;
  Tensor x0({2, 2}, {0.5, -1.25, 2.0, 0.125});
  Var x = t.leaf(x0, true);
  Var f = t.sum(t.mul(t.mul(x, x), x));
  Var g = t.grad(f, {x}, true)[0];
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(t.data(g)[i] == doctest::Approx(3.0 * x0.data[i] * x0.data[i]).epsilon(1e-12));
  Var g2 = t.grad(t.sum(g), {x})[0];
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(t.data(g2)[i] == doctest::Approx(6.0 * x0.data[i]).epsilon(1e-12));
}

TEST_CASE("hessian-vector products match finite differences of the gradient") {
  const std::uint64_t seed = 4242;
  Rng rng(99);
  auto at = random_leaves(rng, 4, {2, 3});
  BuildFn f = [seed](Tape& t, const std::vector<Var>& l) {
    return random_graph(t, l, seed, 12);
  };

  // direction v
  Rng vr(1001);
  std::vector<Tensor> v;
  for (const auto& a : at) {
    Tensor d = Tensor::zeros(a.shape);
    for (auto& x : d.data) x = vr.uniform(-1, 1);
    v.push_back(std::move(d));
  }

  // analytic HVP by differentiating g . v
  std::vector<Tensor> hv;
  {
    Tape t;
    std::vector<Var> leaves;
    for (const auto& a : at) leaves.push_back(t.leaf(a, true));
    Var out = f(t, leaves);
    auto gs = t.grad(out, leaves, true);
    Var s = t.leaf(Tensor::scalar(0.0), false);
    for (std::size_t i = 0; i < gs.size(); ++i)
      s = t.add(s, dot_sum(t, gs[i], t.leaf(v[i], false)));
    auto hs = t.grad(s, leaves);
    for (Var h : hs) hv.push_back(t.tensor(h));
  }

  // finite difference of the gradient along v
  const double h = 1e-5;
  auto shifted = [&](double sign) {
    auto p = at;
    for (std::size_t i = 0; i < p.size(); ++i)
      for (std::size_t j = 0; j < p[i].data.size(); ++j)
        p[i].data[j] += sign * h * v[i].data[j];
    return analytic_grad(f, p);
  };
  const auto gp = shifted(+1.0), gm = shifted(-1.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < at.size(); ++i)
    for (std::size_t j = 0; j < at[i].data.size(); ++j) {
      const double fd = (gp[i].data[j] - gm[i].data[j]) / (2.0 * h);
      const double a = hv[i].data[j];
      worst = std::max(worst, std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)}));
    }
  CHECK(worst < 1e-5);
}

TEST_CASE("grad without create_graph yields inert values") {
  Tape t;
  Var x = t.leaf(Tensor::scalar(2.0), true);
  Var f = t.mul(t.mul(x, x), x);
  Var g = t.grad(f, {x}, false)[0];
  CHECK_FALSE(t.requires_grad(g));
  Var gg = t.grad(t.sum(g), {x})[0];
  CHECK(t.value(gg) == 0.0);  // no second-order path was kept
}

TEST_CASE("im2col matches the worked dilated convolution example") {
  // One channel, four samples, two taps, dilation 2, both tap weights 1.
  Tape t;
  Var x = t.leaf(Tensor({1, 4}, {1, 2, 3, 4}), false);
  Var w = t.leaf(Tensor({1, 1, 2}, {1, 1}), false);

  Var valid = conv1d_dilated(t, x, w, 2, false);
  REQUIRE(t.shape(valid) == std::vector<std::size_t>{1, 2});
  CHECK(t.data(valid)[0] == 4.0);  // 1 + 3
  CHECK(t.data(valid)[1] == 6.0);  // 2 + 4

  Var causal = conv1d_dilated(t, x, w, 2, true);
  REQUIRE(t.shape(causal) == std::vector<std::size_t>{1, 4});
  CHECK(t.data(causal)[0] == 1.0);  // pad + 1
  CHECK(t.data(causal)[1] == 2.0);  // pad + 2
  CHECK(t.data(causal)[2] == 4.0);
  CHECK(t.data(causal)[3] == 6.0);
}

TEST_CASE("col2im is the exact adjoint of im2col") {
  Rng rng(555);
  const struct {
    std::size_t batch, t_in, ch, k, dil;
    bool causal;
  } cases[] = {
      {1, 6, 1, 2, 1, false}, {1, 6, 1, 2, 1, true},  {2, 8, 3, 3, 2, true},
      {2, 9, 2, 3, 2, false}, {1, 12, 4, 2, 3, true}, {3, 10, 2, 4, 3, false},
  };
  for (const auto& c : cases) {
    ConvSpec spec{c.batch, c.t_in, c.ch, c.k, c.dil, c.causal};
    Tape t;
    Tensor x = Tensor::zeros({c.batch * c.t_in, c.ch});
    for (auto& v : x.data) v = rng.uniform(-1, 1);
    Tensor y = Tensor::zeros({c.batch * spec.t_out(), c.k * c.ch});
    for (auto& v : y.data) v = rng.uniform(-1, 1);
    Var xv = t.leaf(x, false), yv = t.leaf(y, false);
    const double lhs = t.value(dot_sum(t, t.im2col(xv, spec), yv));
    const double rhs = t.value(dot_sum(t, xv, t.col2im(yv, spec)));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("convolution weights and inputs receive correct gradients") {
  Rng rng(31);
  Tensor x = Tensor::zeros({2, 7});
  Tensor w = Tensor::zeros({3, 2, 3});
  for (auto& v : x.data) v = rng.uniform(-1, 1);
  for (auto& v : w.data) v = rng.uniform(-1, 1);
  for (bool causal : {false, true}) {
    CAPTURE(causal);
    BuildFn f = [causal](Tape& t, const std::vector<Var>& l) {
      return t.mean(t.tanh(conv1d_dilated(t, l[0], l[1], 2, causal)));
    };
    CHECK(max_grad_error(f, {x, w}) < 1e-7);
  }
}

TEST_CASE("linear layer broadcasts its bias across the batch") {
  Tape t;
  Var x = t.leaf(Tensor({3, 2}, {1, 0, 0, 1, 2, -1}), false);
  Var w = t.leaf(Tensor({2, 2}, {1, 2, 3, 4}), false);
  Var b = t.leaf(Tensor({1, 2}, {10, 20}), true);
  Var y = linear(t, x, w, b);
  const std::vector<double> want = {11, 22, 13, 24, 9, 20};
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(t.data(y)[i] == want[i]);
  // bias gradient sums over the batch
  Var g = t.grad(t.sum(y), {b})[0];
  CHECK(t.data(g)[0] == 3.0);
  CHECK(t.data(g)[1] == 3.0);
}

TEST_CASE("gradients are bitwise reproducible") {
  auto run = [](std::vector<double>& out) {
    Rng rng(2024);
    auto at = random_leaves(rng, 5, {2, 3});
    Tape t;
    std::vector<Var> leaves;
    for (const auto& a : at) leaves.push_back(t.leaf(a, true));
    Var f = random_graph(t, leaves, 88, 16);
    auto gs = t.grad(f, leaves);
    for (Var g : gs)
      for (double x : t.data(g)) out.push_back(x);
  };
  std::vector<double> a, b;
  run(a);
  run(b);
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("unused parameters get zero gradients") {
  Tape t;
  Var x = t.leaf(Tensor::scalar(3.0), true);
  Var y = t.leaf(Tensor({2, 2}, {1, 2, 3, 4}), true);
  Var f = t.mul(x, x);
  auto gs = t.grad(f, {x, y});
  CHECK(t.value(gs[0]) == doctest::Approx(6.0));
  for (double v : t.data(gs[1])) CHECK(v == 0.0);
}

TEST_CASE("adam takes a signed unit-ish first step") {
  ParamSet p;
  p.add("w", Tensor({1, 3}, {1.0, -2.0, 0.5}));
  std::vector<Tensor> g = {Tensor({1, 3}, {0.3, -0.01, 4.0})};
  Adam adam;
  adam.step(p, g, 0.1);
  const auto& w = p.at("w").data;
  // First Adam step is -lr * g / (|g| + eps) regardless of the magnitude.
  CHECK(w[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
  CHECK(w[1] == doctest::Approx(-2.0 + 0.1).epsilon(1e-6));
  CHECK(w[2] == doctest::Approx(0.5 - 0.1).epsilon(1e-6));
}

TEST_CASE("adam converges on a separable quadratic") {
  ParamSet p;
  p.add("w", Tensor({1, 2}, {5.0, -3.0}));
  Adam adam;
  for (int i = 0; i < 2000; ++i) {
    const auto& w = p.at("w").data;
    std::vector<Tensor> g = {Tensor({1, 2}, {2.0 * (w[0] - 1.0), 2.0 * (w[1] + 2.0)})};
    adam.step(p, g, 0.01);
  }
  CHECK(p.at("w").data[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(p.at("w").data[1] == doctest::Approx(-2.0).epsilon(1e-3));
}

TEST_CASE("sgd applies the plain update rule") {
  ParamSet p;
  p.add("w", Tensor({1, 2}, {1.0, 2.0}));
  sgd_step(p, {Tensor({1, 2}, {10.0, -4.0})}, 0.05);
  CHECK(p.at("w").data[0] == doctest::Approx(0.5));
  CHECK(p.at("w").data[1] == doctest::Approx(2.2));
}

TEST_CASE("paramset keeps insertion order and rejects duplicates") {
  ParamSet p;
  p.add("b", Tensor::scalar(1.0));
  p.add("a", Tensor::scalar(2.0));
  CHECK(p.item(0).first == "b");
  CHECK(p.item(1).first == "a");
  CHECK(p.total_elements() == 2);
  CHECK_THROWS_AS(p.add("a", Tensor::scalar(0.0)), Error);
}

TEST_CASE("checkpoints round trip parameters exactly") {
  ParamSet p;
  Rng rng(9);
  Tensor w = Tensor::zeros({3, 4});
  for (auto& x : w.data) x = rng.uniform(-10, 10);
  p.add("enc.w1", w);
  p.add("enc.b1", Tensor({1, 4}, {0.1, 1.0 / 3.0, -7e-13, 2.5e300}));
  std::map<std::string, std::string> cfg = {{"seed", "42"}, {"alpha", "0.01"}};

  const auto path = std::filesystem::temp_directory_path() / "metaexo_ckpt_test.json";
  save_checkpoint(path, p, cfg);
  const Checkpoint ck = load_checkpoint(path);
  CHECK(ck.version == 1);
  CHECK(ck.config.at("seed") == "42");
  REQUIRE(ck.params.size() == 2);
  for (const auto& [name, t] : p) {
    const Tensor& u = ck.params.at(name);
    REQUIRE(same_shape(t, u));
    CHECK(std::memcmp(t.data.data(), u.data.data(), t.data.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("checkpoint loader rejects malformed input") {
  const auto path = std::filesystem::temp_directory_path() / "metaexo_ckpt_bad.json";
  write_text_file(path, "{\"version\": 1}");
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  write_text_file(path, "not json");
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
}

TEST_CASE("shape violations are rejected up front") {
  Tape t;
  Var a = t.leaf(Tensor::zeros({2, 3}), false);
  Var b = t.leaf(Tensor::zeros({3, 2}), false);
  CHECK_THROWS_AS(t.add(a, b), ShapeMismatchError);
  CHECK_THROWS_AS(t.matmul(a, a), ShapeMismatchError);
  CHECK_THROWS_AS(t.reshape(a, {4, 2}), ShapeMismatchError);
  CHECK_THROWS_AS(t.slice(a, 0, 1, 3), ShapeMismatchError);
  CHECK_THROWS_AS(t.concat({a, b}, 0), ShapeMismatchError);
  CHECK_THROWS_AS(t.grad(a, {b}), ShapeMismatchError);  // non-scalar output
}
