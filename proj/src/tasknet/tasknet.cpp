#include "metaexo/tasknet/tasknet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metaexo/common/error.hpp"
#include "metaexo/common/rng.hpp"

namespace metaexo::tasknet {

using autodiff::ConvSpec;
using autodiff::Tensor;

namespace {

constexpr double kElbowLo = 0.0;
constexpr double kElbowHi = 2.6;
constexpr double kSigmaFloor = 1e-4;

Tensor xavier(const std::vector<std::size_t>& shape, std::size_t fan_in,
              std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros(shape);
  for (double& v : t.data) v = rng.uniform(-limit, limit);
  return t;
}

}  // namespace

void MetaConfig::validate() const {
  const bool positive = delta_t >= 0 && latent_dim > 0 && encoder_resample_len >= 2 &&
                        encoder_hidden > 0 && conv_channels > 0 && conv_kernel > 0 &&
                        head_hidden > 0 && beta >= 0.0 && alpha > 0.0 && gamma > 0.0 &&
                        denoise_sigma >= 0.0 && inner_steps_train > 0 &&
                        inner_steps_deploy > 0;
  if (!positive) throw ConfigError("meta config requires positive sizes and rates");
  if (conv_dilation1 < 1 || conv_dilation2 < 1)
    throw ConfigError("conv dilations must be >= 1");
}

MetaConfig meta_config_from(const RunConfig& cfg) {
  MetaConfig m;
  m.delta_t = static_cast<int>(cfg.get_int("delta_t"));
  m.latent_dim = static_cast<int>(cfg.get_int("latent_dim"));
  m.encoder_resample_len = static_cast<int>(cfg.get_int("encoder_resample_len"));
  m.encoder_hidden = static_cast<int>(cfg.get_int("encoder_hidden"));
  m.conv_channels = static_cast<int>(cfg.get_int("conv_channels"));
  m.conv_kernel = static_cast<int>(cfg.get_int("conv_kernel"));
  m.conv_dilation1 = static_cast<int>(cfg.get_int("conv_dilation1"));
  m.conv_dilation2 = static_cast<int>(cfg.get_int("conv_dilation2"));
  m.head_hidden = static_cast<int>(cfg.get_int("head_hidden"));
  m.beta = cfg.get_double("beta");
  m.alpha = cfg.get_double("alpha");
  m.gamma = cfg.get_double("gamma");
  m.denoise_sigma = cfg.get_double("denoise_sigma");
  m.inner_steps_train = static_cast<int>(cfg.get_int("inner_steps_train"));
  m.inner_steps_deploy = static_cast<int>(cfg.get_int("inner_steps_deploy"));
  m.second_order = cfg.get_bool("second_order");
  m.validate();
  return m;
}

TaskNet::TaskNet(const MetaConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

ParamSet TaskNet::init_params(std::uint64_t seed) const {
  const std::size_t in = 2 * static_cast<std::size_t>(cfg_.encoder_resample_len);
  const std::size_t hid = cfg_.encoder_hidden;
  const std::size_t lat = cfg_.latent_dim;
  const std::size_t c = cfg_.conv_channels;
  const std::size_t k = cfg_.conv_kernel;
  const std::size_t t = cfg_.window_len();
  const std::size_t head = cfg_.head_hidden;
  const std::size_t combined = t * c + lat;

  Rng rng(Rng::derive(seed, {0x7a5e7u}));
  ParamSet p;
  p.add("enc.w1", xavier({in, hid}, in, hid, rng));
  p.add("enc.b1", Tensor::zeros({1, hid}));
  p.add("enc.mu_w", xavier({hid, lat}, hid, lat, rng));
  p.add("enc.mu_b", Tensor::zeros({1, lat}));
  p.add("enc.sig_w", xavier({hid, lat}, hid, lat, rng));
  p.add("enc.sig_b", Tensor::zeros({1, lat}));
  p.add("pred.conv1_w", xavier({c, 2, k}, 2 * k, c * k, rng));
  p.add("pred.conv1_b", Tensor::zeros({1, c}));
  p.add("pred.proj_w", xavier({2, c}, 2, c, rng));
  p.add("pred.conv2_w", xavier({c, c, k}, c * k, c * k, rng));
  p.add("pred.conv2_b", Tensor::zeros({1, c}));
  p.add("pred.w3", xavier({combined, head}, combined, head, rng));
  p.add("pred.b3", Tensor::zeros({1, head}));
  p.add("pred.w4", xavier({head, 1}, head, 1, rng));
  p.add("pred.b4", Tensor::zeros({1, 1}));
  return p;
}

TaskNet::Latent TaskNet::encode(Tape& t, const ParamVars& p,
                                const dataset::Trajectory& traj) const {
  traj.validate();
  const std::size_t r = cfg_.encoder_resample_len;
  const std::size_t l = traj.length();
  Tensor x = Tensor::zeros({1, 2 * r});
  // linear resample onto r points covering the whole trajectory
  for (std::size_t i = 0; i < r; ++i) {
    const double pos = static_cast<double>(i) * static_cast<double>(l - 1) /
                       static_cast<double>(r - 1);
    const std::size_t lo = std::min(static_cast<std::size_t>(pos), l - 2);
    const double frac = pos - static_cast<double>(lo);
    const dataset::Sample& a = traj.samples[lo];
    const dataset::Sample& b = traj.samples[lo + 1];
    x.data[2 * i] = a.angle + frac * (b.angle - a.angle);
    x.data[2 * i + 1] = a.velocity + frac * (b.velocity - a.velocity);
  }
  Var input = t.leaf(std::move(x), false);
  Var h = t.tanh(autodiff::linear(t, input, p.at("enc.w1"), p.at("enc.b1")));
  Latent out;
  out.mu = autodiff::linear(t, h, p.at("enc.mu_w"), p.at("enc.mu_b"));
  out.sigma = t.add_scalar(
      t.softplus(autodiff::linear(t, h, p.at("enc.sig_w"), p.at("enc.sig_b"))),
      kSigmaFloor);
  return out;
}

Var TaskNet::sample_latent(Tape& t, const Latent& dist, std::uint64_t seed) const {
  Tensor eps = Tensor::zeros(t.shape(dist.mu));
  Rng rng(seed);
  for (double& v : eps.data) v = rng.gaussian();
  return t.add(dist.mu, t.mul(dist.sigma, t.leaf(std::move(eps), false)));
}

Var TaskNet::forward(Tape& t, const ParamVars& p, Var x, std::size_t batch, Var z) const {
  const std::size_t win = cfg_.window_len();
  const std::size_t c = cfg_.conv_channels;
  const std::size_t k = cfg_.conv_kernel;
  const std::size_t rows = batch * win;

  ConvSpec s1{batch, win, 2, k, static_cast<std::size_t>(cfg_.conv_dilation1), true};
  Var w1 = t.transpose(t.reshape(p.at("pred.conv1_w"), {c, 2 * k}));
  Var pre1 = t.add(t.matmul(t.im2col(x, s1), w1),
                   autodiff::row_broadcast(t, p.at("pred.conv1_b"), rows));
  Var h1 = t.add(t.tanh(pre1), t.matmul(x, p.at("pred.proj_w")));

  ConvSpec s2{batch, win, c, k, static_cast<std::size_t>(cfg_.conv_dilation2), true};
  Var w2 = t.transpose(t.reshape(p.at("pred.conv2_w"), {c, c * k}));
  Var pre2 = t.add(t.matmul(t.im2col(h1, s2), w2),
                   autodiff::row_broadcast(t, p.at("pred.conv2_b"), rows));
  Var h2 = t.add(t.tanh(pre2), h1);

  Var features = t.reshape(h2, {batch, win * c});
  Var combined = t.concat({features, autodiff::row_broadcast(t, z, batch)}, 1);
  Var h3 = t.tanh(autodiff::linear(t, combined, p.at("pred.w3"), p.at("pred.b3")));
  return autodiff::linear(t, h3, p.at("pred.w4"), p.at("pred.b4"));
}

Var TaskNet::predict(Tape& t, const ParamVars& p,
                     const std::vector<dataset::TemporalWindow>& windows, Var z) const {
  if (windows.empty()) throw TooShortError("predict needs at least one window");
  const std::size_t win = cfg_.window_len();
  if (t.shape(z) != std::vector<std::size_t>{1, static_cast<std::size_t>(cfg_.latent_dim)})
    throw ShapeMismatchError("latent z must be a {1, latent_dim} row");
  const std::size_t batch = windows.size();
  Tensor x = Tensor::zeros({batch * win, 2});
  for (std::size_t b = 0; b < batch; ++b) {
    if (windows[b].history.size() != win)
      throw ShapeMismatchError("window history length does not match delta_t + 1");
    for (std::size_t j = 0; j < win; ++j) {
      x.data[(b * win + j) * 2] = windows[b].history[j][0];
      x.data[(b * win + j) * 2 + 1] = windows[b].history[j][1];
    }
  }
  return forward(t, p, t.leaf(std::move(x), false), batch, z);
}

double TaskNet::predict_next(const ParamSet& params, const dataset::TemporalWindow& window,
                             const std::vector<double>& z) const {
  if (z.size() != static_cast<std::size_t>(cfg_.latent_dim))
    throw ShapeMismatchError("latent z has the wrong length");
  Tape t;
  ParamVars p = autodiff::lift(t, params, false);
  Var zv = t.leaf(Tensor{{1, z.size()}, z}, false);
  return t.value(predict(t, p, {window}, zv));
}

Var TaskNet::loss_kl(Tape& t, const Latent& dist) const {
  Var second = t.mul(dist.sigma, dist.sigma);
  Var log_term = t.add_scalar(t.mul_scalar(t.log(dist.sigma), 2.0), 1.0);
  Var integrand = t.sub(t.add(t.mul(dist.mu, dist.mu), second), log_term);
  return t.mul_scalar(t.sum(integrand), 0.5);
}

Var TaskNet::loss_rec(Tape& t, const ParamVars& p,
                      const std::vector<dataset::TemporalWindow>& windows, Var z) const {
  Var pred = predict(t, p, windows, z);
  Tensor target = Tensor::zeros({windows.size(), 1});
  for (std::size_t b = 0; b < windows.size(); ++b) target.data[b] = windows[b].target;
  return autodiff::mse(t, pred, t.leaf(std::move(target), false));
}

Var TaskNet::loss_total(Tape& t, const ParamVars& p, const dataset::Trajectory& traj,
                        double beta, LatentMode mode, std::uint64_t seed) const {
  const auto windows = dataset::make_windows(traj, cfg_.delta_t);
  Latent dist = encode(t, p, traj);
  Var z = mode == LatentMode::kStochastic ? sample_latent(t, dist, seed) : dist.mu;
  return t.add(loss_rec(t, p, windows, z), t.mul_scalar(loss_kl(t, dist), beta));
}

Var TaskNet::loss_train(Tape& t, const ParamVars& p, const dataset::Trajectory& traj,
                        double beta, double noise_sigma, LatentMode mode,
                        std::uint64_t seed) const {
  if (noise_sigma < 0.0) throw BadParamsError("noise_sigma must be >= 0");
  const auto windows = dataset::make_windows(traj, cfg_.delta_t);
  Latent dist = encode(t, p, traj);
  Var z = mode == LatentMode::kStochastic ? sample_latent(t, dist, seed) : dist.mu;
  Var loss = t.add(loss_rec(t, p, windows, z), t.mul_scalar(loss_kl(t, dist), beta));
  if (noise_sigma == 0.0) return loss;

  Rng rng(Rng::derive(seed, {0xd0u}));
  std::vector<double> angles;
  angles.reserve(traj.length());
  for (const dataset::Sample& s : traj.samples)
    angles.push_back(s.angle + rng.gaussian(0.0, noise_sigma));
  const dataset::Trajectory noisy = dataset::extract_trajectory(angles, traj.dt);
  auto noisy_windows = dataset::make_windows(noisy, cfg_.delta_t);
  for (std::size_t i = 0; i < noisy_windows.size(); ++i)
    noisy_windows[i].target = windows[i].target;
  return t.add(loss, loss_rec(t, p, noisy_windows, z));
}

dataset::Trajectory TaskNet::rollout(const ParamSet& params,
                                     const std::vector<std::array<double, 2>>& seed_history,
                                     const std::vector<double>& z, int n_steps,
                                     double dt) const {
  if (n_steps < 1) throw Error("rollout needs n_steps >= 1");
  if (!(dt > 0.0)) throw Error("rollout needs dt > 0");
  if (seed_history.size() != static_cast<std::size_t>(cfg_.window_len()))
    throw ShapeMismatchError("seed history length does not match delta_t + 1");
  if (z.size() != static_cast<std::size_t>(cfg_.latent_dim))
    throw ShapeMismatchError("latent z has the wrong length");

  dataset::TemporalWindow window;
  window.history = seed_history;
  dataset::Trajectory out;
  out.dt = dt;
  out.samples.reserve(n_steps);
  for (int step = 0; step < n_steps; ++step) {
    // the graph is rebuilt per step, keeping memory flat over long rollouts
    Tape t;
    ParamVars p = autodiff::lift(t, params, false);
    Var zv = t.leaf(Tensor{{1, z.size()}, z}, false);
    const double raw = t.value(predict(t, p, {window}, zv));
    const double q = std::clamp(raw, kElbowLo, kElbowHi);
    const double v = (q - window.history.back()[0]) / dt;
    out.samples.push_back({q, v});
    window.history.erase(window.history.begin());
    window.history.push_back({q, v});
  }
  return out;
}

}  // namespace metaexo::tasknet
