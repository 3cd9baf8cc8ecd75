#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "metaexo/autodiff/ops.hpp"
#include "metaexo/autodiff/paramset.hpp"
#include "metaexo/autodiff/tape.hpp"
#include "metaexo/common/config.hpp"
#include "metaexo/dataset/dataset.hpp"

namespace metaexo::tasknet {

using autodiff::ParamSet;
using autodiff::ParamVars;
using autodiff::Tape;
using autodiff::Var;

struct MetaConfig {
  int delta_t = 9;
  int latent_dim = 128;
  int encoder_resample_len = 64;
  int encoder_hidden = 128;
  int conv_channels = 32;
  int conv_kernel = 3;
  int conv_dilation1 = 1;
  int conv_dilation2 = 2;
  int head_hidden = 64;
  double beta = 1e-3;
  double alpha = 0.01;
  double gamma = 1e-3;
  double denoise_sigma = 0.05;  // angle corruption scale for training windows
  int inner_steps_train = 1;
  int inner_steps_deploy = 5;
  bool second_order = true;

  int window_len() const { return delta_t + 1; }
  void validate() const;  // all positive, dilations >= 1
};

MetaConfig meta_config_from(const RunConfig& cfg);

enum class LatentMode { kStochastic, kDeterministic };

/// Task-conditioned next-step predictor: a trajectory encoder emitting a
/// KL-regularized latent and a two-layer dilated causal convolution stack
/// with residual connections feeding a feedforward head.
class TaskNet {
 public:
  explicit TaskNet(const MetaConfig& cfg);

  const MetaConfig& config() const { return cfg_; }

  /// Xavier-uniform weights, zero biases. Deterministic in the seed.
  ParamSet init_params(std::uint64_t seed) const;

  struct Latent {
    Var mu;     // {1, latent_dim}
    Var sigma;  // {1, latent_dim}, >= 1e-4 elementwise
  };

  Latent encode(Tape& t, const ParamVars& p, const dataset::Trajectory& traj) const;

  /// Reparameterized draw mu + sigma * eps; gradients flow through both.
  Var sample_latent(Tape& t, const Latent& dist, std::uint64_t seed) const;

  /// Batched next-step predictions, one row per window. z is {1, latent_dim}.
  Var predict(Tape& t, const ParamVars& p,
              const std::vector<dataset::TemporalWindow>& windows, Var z) const;

  /// Single-window convenience wrapper evaluating on a private tape.
  double predict_next(const ParamSet& params, const dataset::TemporalWindow& window,
                      const std::vector<double>& z) const;

  /// KL(N(mu, sigma^2) || N(0, I)), summed over latent dimensions.
  Var loss_kl(Tape& t, const Latent& dist) const;

  /// Mean over windows of the squared next-step error.
  Var loss_rec(Tape& t, const ParamVars& p,
               const std::vector<dataset::TemporalWindow>& windows, Var z) const;

  /// loss_rec + beta * loss_kl with the latent drawn per `mode`.
  Var loss_total(Tape& t, const ParamVars& p, const dataset::Trajectory& traj,
                 double beta, LatentMode mode, std::uint64_t seed = 0) const;

  /// loss_total plus a denoising term: a second window batch built from an
  /// angle-corrupted copy of the trajectory (velocities re-differenced, so
  /// the corruption matches what autoregressive closure feeds back) keeps the
  /// clean next-step targets. noise_sigma = 0 reduces to loss_total exactly.
  Var loss_train(Tape& t, const ParamVars& p, const dataset::Trajectory& traj,
                 double beta, double noise_sigma, LatentMode mode,
                 std::uint64_t seed = 0) const;

  /// Autoregressive reference generation from a seed window. Angles are
  /// clamped to the elbow limits before velocities are differenced.
  dataset::Trajectory rollout(const ParamSet& params,
                              const std::vector<std::array<double, 2>>& seed_history,
                              const std::vector<double>& z, int n_steps, double dt) const;

 private:
  Var forward(Tape& t, const ParamVars& p, Var x, std::size_t batch, Var z) const;

  MetaConfig cfg_;
};

}  // namespace metaexo::tasknet
